#pragma once

#include "fgc/clustering.hpp"
#include "fgc/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fgc {

/// Row = true label, column = reported label; rows sum to 1.
using ConfusionMatrix = std::array<std::array<double, kLabelsPerAttribute>, kLabelsPerAttribute>;

using PerAttributeConfusion = std::array<ConfusionMatrix, kNumAttributes>;

ConfusionMatrix identity_confusion();

struct SimConfig {
    std::uint64_t seed = 0;
    int width = 512;
    int height = 512;
    int n_images = 10;
    double objects_per_image = 34.0;  // Poisson mean
    double min_separation = 24.0;
    int n_users = 10;
    double participation = 1.0;
    double sigma_user = 3.0;
    PerAttributeConfusion confusion = {identity_confusion(), identity_confusion(), identity_confusion()};
    /// Probability that an object's true label is class0, per attribute.
    std::array<double, kNumAttributes> class0_prior = {0.5, 0.5, 0.5};
    Timestamp start_time{};
    std::int64_t interval_seconds = 3600;
    int max_placement_attempts = 1000;

    void validate() const;
};

struct TrueObject {
    Point location;
    Responses labels = kAllUnknown;
};

struct SimScene {
    int image_index = 0;
    ImageRecord image;
    std::vector<TrueObject> objects;
    std::vector<DotAnnotation> dots;
    /// object_of[i] is the index into `objects` that dots[i] was drawn from.
    std::vector<std::size_t> object_of;
};

std::string sim_image_id(int image_index);
std::string sim_user_id(int user_index);

/// Object layout and labels for one image; depends only on (seed, image_index).
/// Throws InputError when min_separation cannot be met within the attempt budget.
SimScene generate_scene(const SimConfig& config, int image_index);

/// Each user joins the image with probability `participation`; a participant
/// drops one dot per object, displaced by isotropic N(0, sigma_user^2) noise and
/// redrawn until it lands inside the image, with responses passed through the
/// confusion matrices. Also fills scene.dots / scene.object_of.
std::vector<DotAnnotation> simulate_annotations(SimScene& scene, const SimConfig& config);

/// generate_scene followed by simulate_annotations.
SimScene simulate_image(const SimConfig& config, int image_index);

struct RecoveryReport {
    std::size_t n_true = 0;
    std::size_t n_recovered = 0;
    std::size_t matched = 0;
    std::size_t unmatched_true = 0;
    std::size_t unmatched_recovered = 0;
    double matched_fraction = 0.0;  // matched / n_true (1 when both sides are empty)
    long long count_error = 0;      // n_recovered - n_true
    double mean_localization_error = 0.0;
    std::array<double, kNumAttributes> label_accuracy{};  // over matched pairs; 1 when none matched
};

/// Greedy nearest-pair matching of medoids to true objects within `radius`
/// (default 2 * sigma_user + 1e-6): pairs are taken in order of increasing distance.
RecoveryReport oracle_evaluate(const SimScene& scene, std::span<const AggregatedObject> aggregated, double radius);
RecoveryReport oracle_evaluate(const SimScene& scene, std::span<const AggregatedObject> aggregated,
                               const SimConfig& config);

/// Reads {"confusion": {attr: 3x3}, "priors": {attr: p_class0}}; both keys
/// optional, and a bare {attr: 3x3} object is accepted as the confusion part.
void load_confusion_file(std::istream& in, SimConfig& config);

/// One line per true object: {image_id, object, x, y, labels, dots:[{user_id,x,y}]}.
void write_truth_jsonl(std::ostream& out, const SimScene& scene);

}  // namespace fgc
