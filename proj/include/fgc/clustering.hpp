#pragma once

#include "fgc/ingest.hpp"
#include "fgc/types.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fgc {

enum class Linkage { single, average };

Linkage parse_linkage(std::string_view text);
std::string_view linkage_name(Linkage l);

struct ClusterParams {
    Linkage linkage = Linkage::average;
    /// Largest linkage distance (pixels) at which two clusters may still merge.
    double distance_threshold = 24.0;
    int min_cluster_size = 2;

    void validate() const;
};

/// A consensus cluster of dots from distinct users.
struct AggregatedObject {
    std::string image_id;
    std::vector<DotAnnotation> members;
    Point medoid;
    Responses labels = kAllUnknown;

    std::size_t member_count() const { return members.size(); }
};

struct ClusterStats {
    std::size_t discarded_clusters = 0;
    std::size_t discarded_dots = 0;
};

/// Agglomerative clustering of one image's dots under Euclidean distance with a
/// cannot-link constraint: clusters sharing a user_id never merge. Each step
/// takes the globally smallest permitted linkage distance (ties go to the
/// lexicographically smallest pair of cluster ids) and stops once none is
/// <= distance_threshold. Clusters smaller than min_cluster_size are dropped.
///
/// Dots are first put in a canonical order (y, x, user, responses), so the
/// result does not depend on input order. Output is sorted by medoid (y, x).
std::vector<AggregatedObject> cluster_image_annotations(std::span<const DotAnnotation> dots,
                                                        const ClusterParams& params,
                                                        ClusterStats* stats = nullptr);

/// Member minimizing the summed Euclidean distance to all members; exact ties
/// resolve to the smallest (y, x).
Point medoid(std::span<const Point> points);

/// Per attribute: a known class wins only with strictly more votes than the
/// other class and at least as many as unknown; everything else is unknown.
Responses majority_vote_labels(std::span<const DotAnnotation> members);

struct AggregationResult {
    /// One entry per image, in image-table order.
    std::vector<std::vector<AggregatedObject>> per_image;
    ClusterStats stats;
};

/// Groups annotations by image and clusters each image, `jobs` images at a time.
AggregationResult aggregate_dataset(const Dataset& dataset, const ClusterParams& params, int jobs = 1);

// JSONL with one object per line:
// {image_id, medoid:[x,y], n_members, members:[{user_id,x,y}...], labels:{species,sex,age}}
void write_objects_jsonl(std::ostream& out, std::span<const AggregatedObject> objects);
std::vector<AggregatedObject> read_objects_jsonl(std::istream& in);

}  // namespace fgc
