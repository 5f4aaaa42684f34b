#pragma once

#include "fgc/mapgen.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fgc {

/// [attribute][class] table of per-class values (class0, class1).
using ClassTable = PerAttribute<PerClass<double>>;

/// Predicted maps for one image. `overall` is optional: when absent the
/// class-agnostic count is the mean over attributes of the per-attribute class sums.
struct PredictionStack {
    std::string image_id;
    std::optional<DensityGrid> overall;
    PerAttribute<PerClass<DensityGrid>> classes;

    DensityGrid& cls(Attribute a, Label c) { return classes[index(a)][index(c)]; }
    const DensityGrid& cls(Attribute a, Label c) const { return classes[index(a)][index(c)]; }
    double overall_count() const;
};

/// Predicted segmentation per attribute: channels {class0, class1, background}.
using SegmentationPrediction = PerAttribute<std::array<DensityGrid, 3>>;

/// Ground truth needed for scoring one image.
struct GroundTruth {
    DensityStack density;
    UnknownMasks masks;
};

/// Sum of cells where mask == 0.
double masked_count(const DensityGrid& grid, const BinaryGrid& mask);

/// Mean over images of |pred - gt|.
double count_mae(std::span<const double> pred_totals, std::span<const double> gt_totals);

/// MAE of per-image counts taken only over unmasked pixels.
double masked_mae(std::span<const DensityGrid> pred, std::span<const DensityGrid> gt,
                  std::span<const BinaryGrid> masks);

/// (1/A) sum_a (1/C_a) sum_c MMAE[a][c]
double cmmae(const ClassTable& mmae);

/// Same recombination over a ragged table; throws InputError unless it holds
/// exactly 3 attributes x 2 finite class values.
double cmmae(const std::vector<std::vector<double>>& mmae);

/// Sum over attributes and classes of the per-pixel mean squared error. With
/// `masked`, unknown-masked pixels drop out of both the sum and the pixel count
/// (an attribute whose pixels are all masked contributes 0).
double loss_class_mse(const PredictionStack& pred, const DensityStack& gt, const UnknownMasks& masks, bool masked);

/// sum_a MSE(sum_c gt[a][c], sum_c pred[a][c]); gt sums include the unknown
/// channel. Never masked.
double loss_total_count(const PredictionStack& pred, const DensityStack& gt);

inline constexpr double kLogFloor = 1e-12;

/// Soft cross-entropy: targets (S0, S1, 0) on foreground, (0, 0, 1) on
/// background; unknown-masked pixels excluded. Throws InputError when a
/// predicted triple does not sum to 1 (within 1e-6).
double loss_soft_xent(const SegmentationPrediction& pred, const SegmentationStack& gt, const UnknownMasks& masks);

/// D[a][c] = overall * S[a][c] for the two class channels.
PerAttribute<PerClass<DensityGrid>> fuse_density_segmentation(const DensityGrid& overall,
                                                              const SegmentationPrediction& seg);

struct ImageEval {
    std::string image_id;
    double gt_count = 0.0;
    double pred_count = 0.0;
    ClassTable gt_class_counts{};    // masked
    ClassTable pred_class_counts{};  // masked
};

struct EvalReport {
    std::vector<ImageEval> images;
    double mae = 0.0;
    ClassTable mmae{};
    double cmmae = 0.0;
};

/// Counts for one image pair; the ground truth's masks apply to both sides.
ImageEval evaluate_image(const PredictionStack& pred, const GroundTruth& gt);

/// MAE, MMAE table and CMMAE over per-image rows, reduced in row order.
EvalReport summarize(std::vector<ImageEval> images);

/// Pairs predictions with ground truth by image_id (ground-truth order) and
/// fills the report. Unpaired ids on either side throw InputError listing them.
EvalReport evaluate(std::span<const PredictionStack> preds, std::span<const GroundTruth> gts);

std::string report_to_json(const EvalReport& report);

/// Header: method,MAE,CMMAE,species_elephant,species_fur,sex_male,sex_female,age_adult,age_pup
std::string report_to_csv(const EvalReport& report, std::string_view method);

}  // namespace fgc
