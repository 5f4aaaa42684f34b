#pragma once

#include "fgc/clustering.hpp"
#include "fgc/grid.hpp"
#include "fgc/types.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace fgc {

struct KernelSpec {
    double sigma = 12.0;
    /// Half-width of the square support window, in multiples of sigma.
    double truncation_radius = 4.0;
    /// Rescale each object's in-bounds mass to exactly 1.
    bool renormalize = true;

    void validate() const;
    /// ceil(truncation_radius * sigma)
    int radius_pixels() const;
};

enum class DensityMethod { fixed_kernel, cluster_spread };

DensityMethod parse_density_method(std::string_view text);  // "fixed" | "cluster"
std::string_view density_method_name(DensityMethod m);

template <class T>
using PerAttribute = std::array<T, kNumAttributes>;
template <class T>
using PerLabel = std::array<T, kLabelsPerAttribute>;
template <class T>
using PerClass = std::array<T, kClassesPerAttribute>;

/// Per-image ground-truth density: the overall map plus, for every attribute,
/// one map per class and one for unknown. For every attribute the three
/// channels sum to `overall`.
struct DensityStack {
    std::string image_id;
    DensityGrid overall;
    PerAttribute<PerLabel<DensityGrid>> channels;
    int downsample_factor = 1;

    int width() const { return overall.width(); }
    int height() const { return overall.height(); }
    DensityGrid& channel(Attribute a, Label l) { return channels[index(a)][index(l)]; }
    const DensityGrid& channel(Attribute a, Label l) const { return channels[index(a)][index(l)]; }
};

/// Soft segmentation per attribute: S[a][c] = D[a][c] / (D[a][0] + D[a][1]).
using SoftSegmentation = PerAttribute<PerClass<DensityGrid>>;
using UnknownMasks = PerAttribute<BinaryGrid>;

struct SegmentationStack {
    SoftSegmentation soft;
    /// 1 where overall density < tau.
    BinaryGrid background;
    /// 1 where the attribute's unknown channel dominates a foreground pixel.
    UnknownMasks unknown_mask;
};

/// Pixel holding a sub-pixel coordinate: (floor(x), floor(y)) clamped to the image.
std::pair<int, int> rasterize(Point p, int width, int height);

/// One Gaussian per object at its rasterized medoid.
DensityStack fixed_kernel_density(std::span<const AggregatedObject> objects, int width, int height,
                                  const KernelSpec& kernel, int downsample = 1);

/// Weight 1/J at each member's rasterized pixel (coinciding weights add), smoothed
/// by the Gaussian, per object.
DensityStack cluster_spread_density(std::span<const AggregatedObject> objects, int width, int height,
                                    const KernelSpec& kernel, int downsample = 1);

/// Dispatches on `method`. With downsample > 1 each object is rendered at full
/// resolution and sum-pooled into ceil(w/f) x ceil(h/f) cells before being added
/// to the stack.
DensityStack render_density(std::span<const AggregatedObject> objects, int width, int height,
                            const KernelSpec& kernel, DensityMethod method, int downsample = 1);

inline constexpr double kDivisionEpsilon = 1e-12;
inline constexpr double kDefaultTau = 1e-4;

SoftSegmentation soft_segmentation(const DensityStack& density, double eps = kDivisionEpsilon);

BinaryGrid background_channel(const DensityStack& density, double tau);

/// mask[a](p) = 1 iff overall(p) >= tau and D[a][unknown](p) > max(D[a][class0](p), D[a][class1](p)).
UnknownMasks unknown_loss_mask(const DensityStack& density, double tau);

SegmentationStack segmentation_stack(const DensityStack& density, double tau);

/// factor x factor sum pooling; partial blocks at the right/bottom edge are
/// treated as zero-padded.
DensityGrid downsample_preserving_count(const DensityGrid& grid, int factor);

DensityStack downsample_preserving_count(const DensityStack& stack, int factor);

}  // namespace fgc
