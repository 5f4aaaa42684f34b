#include "fgc/clustering.hpp"

#include "fgc/parallel.hpp"
#include "table_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace fgc {

namespace {

using ordered_json = nlohmann::ordered_json;

bool canonical_less(const DotAnnotation& a, const DotAnnotation& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.responses < b.responses;
}

double distance(const DotAnnotation& a, const DotAnnotation& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Disjoint-set forest over dot indices.
class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::size_t> parent_;
};

// Greedy agglomeration of one connected component. `members` holds indices
// into `dots` in canonical order; the returned clusters hold the same indices.
// A cluster occupies the slot of its smallest member, which doubles as its id.
std::vector<std::vector<std::size_t>> agglomerate(const std::vector<DotAnnotation>& dots,
                                                  const std::vector<int>& user_of,
                                                  const std::vector<std::size_t>& members,
                                                  const ClusterParams& params) {
    const std::size_t m = members.size();
    std::vector<std::vector<std::size_t>> clusters(m);
    for (std::size_t i = 0; i < m; ++i) clusters[i] = {members[i]};
    if (m == 1) return clusters;

    std::vector<double> dist(m * m, 0.0);
    std::vector<std::uint8_t> blocked(m * m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double d = distance(dots[members[i]], dots[members[j]]);
            dist[i * m + j] = dist[j * m + i] = d;
            const std::uint8_t b = user_of[members[i]] == user_of[members[j]];
            blocked[i * m + j] = blocked[j * m + i] = b;
        }
    }

    std::vector<std::uint8_t> active(m, 1);
    const double threshold = params.distance_threshold;
    while (true) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = m;
        std::size_t bj = m;
        for (std::size_t i = 0; i < m; ++i) {
            if (!active[i]) continue;
            const double* row = &dist[i * m];
            const std::uint8_t* brow = &blocked[i * m];
            for (std::size_t j = i + 1; j < m; ++j) {
                if (!active[j] || brow[j]) continue;
                if (row[j] < best) {
                    best = row[j];
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi == m || best > threshold) break;

        // Merge bj into bi (bi < bj, so bi keeps the smaller id).
        const double ni = static_cast<double>(clusters[bi].size());
        const double nj = static_cast<double>(clusters[bj].size());
        for (std::size_t k = 0; k < m; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            double d = 0.0;
            if (params.linkage == Linkage::single) {
                d = std::min(dist[bi * m + k], dist[bj * m + k]);
            } else {
                d = (ni * dist[bi * m + k] + nj * dist[bj * m + k]) / (ni + nj);
            }
            dist[bi * m + k] = dist[k * m + bi] = d;
            const std::uint8_t b = blocked[bi * m + k] | blocked[bj * m + k];
            blocked[bi * m + k] = blocked[k * m + bi] = b;
        }
        auto& into = clusters[bi];
        into.insert(into.end(), clusters[bj].begin(), clusters[bj].end());
        std::sort(into.begin(), into.end());
        clusters[bj].clear();
        active[bj] = 0;
    }

    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < m; ++i) {
        if (active[i]) out.push_back(std::move(clusters[i]));
    }
    return out;
}

Label vote(std::size_t class0, std::size_t class1, std::size_t unknown) {
    if (class0 > class1 && class0 >= unknown) return Label::class0;
    if (class1 > class0 && class1 >= unknown) return Label::class1;
    return Label::unknown;
}

}  // namespace

Linkage parse_linkage(std::string_view text) {
    if (text == "single") return Linkage::single;
    if (text == "average") return Linkage::average;
    throw InputError("unknown linkage '" + std::string(text) + "'");
}

std::string_view linkage_name(Linkage l) { return l == Linkage::single ? "single" : "average"; }

void ClusterParams::validate() const {
    if (!(distance_threshold > 0.0) || !std::isfinite(distance_threshold)) {
        throw InputError("distance threshold must be positive");
    }
    if (min_cluster_size < 1) throw InputError("minimum cluster size must be at least 1");
}

Point medoid(std::span<const Point> points) {
    if (points.empty()) throw InputError("medoid of an empty point set");
    std::vector<double> d(points.size());
    Point best = points.front();
    double best_sum = std::numeric_limits<double>::infinity();
    for (const Point& c : points) {
        for (std::size_t k = 0; k < points.size(); ++k) d[k] = std::hypot(c.x - points[k].x, c.y - points[k].y);
        // Summing in sorted order makes equal distance multisets produce equal sums.
        std::sort(d.begin(), d.end());
        const double sum = std::accumulate(d.begin(), d.end(), 0.0);
        if (sum < best_sum || (sum == best_sum && (c.y < best.y || (c.y == best.y && c.x < best.x)))) {
            best_sum = sum;
            best = c;
        }
    }
    return best;
}

Responses majority_vote_labels(std::span<const DotAnnotation> members) {
    Responses labels = kAllUnknown;
    for (Attribute a : kAttributes) {
        std::array<std::size_t, kLabelsPerAttribute> votes{};
        for (const auto& m : members) ++votes[index(m.response(a))];
        labels[index(a)] = vote(votes[0], votes[1], votes[2]);
    }
    return labels;
}

std::vector<AggregatedObject> cluster_image_annotations(std::span<const DotAnnotation> input,
                                                        const ClusterParams& params, ClusterStats* stats) {
    params.validate();
    std::vector<AggregatedObject> objects;
    if (input.empty()) return objects;
    for (const auto& d : input) {
        if (d.image_id != input.front().image_id) {
            throw InputError("cluster_image_annotations: dots from more than one image ('" + input.front().image_id +
                             "', '" + d.image_id + "')");
        }
    }

    std::vector<DotAnnotation> dots(input.begin(), input.end());
    std::sort(dots.begin(), dots.end(), canonical_less);
    const std::size_t n = dots.size();

    std::vector<int> user_of(n);
    {
        std::unordered_map<std::string_view, int> ids;
        for (std::size_t i = 0; i < n; ++i) {
            user_of[i] = ids.emplace(dots[i].user_id, static_cast<int>(ids.size())).first->second;
        }
    }

    // Any permitted merge joins clusters with some cross pair of distinct users
    // within the threshold (true for single and average linkage), so components of
    // that proximity graph can be clustered independently.
    const double threshold = params.distance_threshold;
    UnionFind components(n);
    {
        std::vector<std::size_t> by_x(n);
        std::iota(by_x.begin(), by_x.end(), std::size_t{0});
        std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) {
            return dots[a].x < dots[b].x || (dots[a].x == dots[b].x && a < b);
        });
        for (std::size_t p = 0; p < n; ++p) {
            const auto& a = dots[by_x[p]];
            for (std::size_t q = p + 1; q < n && dots[by_x[q]].x - a.x <= threshold; ++q) {
                const auto& b = dots[by_x[q]];
                if (user_of[by_x[p]] != user_of[by_x[q]] && distance(a, b) <= threshold) {
                    components.unite(by_x[p], by_x[q]);
                }
            }
        }
    }

    std::vector<std::vector<std::size_t>> groups;
    {
        std::vector<std::size_t> group_of(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t root = components.find(i);
            if (group_of[root] == n) {
                group_of[root] = groups.size();
                groups.emplace_back();
            }
            groups[group_of[root]].push_back(i);
        }
    }

    ClusterStats local;
    std::vector<Point> pts;
    for (const auto& group : groups) {
        for (auto& cluster : agglomerate(dots, user_of, group, params)) {
            if (cluster.size() < static_cast<std::size_t>(params.min_cluster_size)) {
                ++local.discarded_clusters;
                local.discarded_dots += cluster.size();
                continue;
            }
            AggregatedObject obj;
            obj.image_id = dots.front().image_id;
            obj.members.reserve(cluster.size());
            pts.clear();
            for (std::size_t idx : cluster) {
                obj.members.push_back(dots[idx]);
                pts.push_back(dots[idx].point());
            }
            obj.medoid = medoid(pts);
            obj.labels = majority_vote_labels(obj.members);
            objects.push_back(std::move(obj));
        }
    }

    std::sort(objects.begin(), objects.end(), [](const AggregatedObject& a, const AggregatedObject& b) {
        if (a.medoid.y != b.medoid.y) return a.medoid.y < b.medoid.y;
        if (a.medoid.x != b.medoid.x) return a.medoid.x < b.medoid.x;
        // Members are canonical and user-disjoint within a cluster, so the first
        // member identifies the cluster.
        return canonical_less(a.members.front(), b.members.front());
    });
    if (stats) {
        stats->discarded_clusters += local.discarded_clusters;
        stats->discarded_dots += local.discarded_dots;
    }
    return objects;
}

AggregationResult aggregate_dataset(const Dataset& dataset, const ClusterParams& params, int jobs) {
    params.validate();
    std::unordered_map<std::string_view, std::size_t> slot;
    for (std::size_t i = 0; i < dataset.images.size(); ++i) slot.emplace(dataset.images[i].image_id, i);

    std::vector<std::vector<std::size_t>> by_image(dataset.images.size());
    for (std::size_t k = 0; k < dataset.annotations.size(); ++k) {
        auto it = slot.find(dataset.annotations[k].image_id);
        if (it == slot.end()) throw InputError("annotation references unknown image id " + dataset.annotations[k].image_id);
        by_image[it->second].push_back(k);
    }

    AggregationResult result;
    result.per_image.resize(by_image.size());
    std::vector<ClusterStats> stats(by_image.size());
    parallel_for(by_image.size(), jobs, [&](std::size_t i) {
        std::vector<DotAnnotation> dots;
        dots.reserve(by_image[i].size());
        for (std::size_t k : by_image[i]) dots.push_back(dataset.annotations[k]);
        result.per_image[i] = cluster_image_annotations(dots, params, &stats[i]);
    });
    for (const auto& s : stats) {
        result.stats.discarded_clusters += s.discarded_clusters;
        result.stats.discarded_dots += s.discarded_dots;
    }
    return result;
}

void write_objects_jsonl(std::ostream& out, std::span<const AggregatedObject> objects) {
    std::string buf;
    for (const auto& obj : objects) {
        ordered_json members = ordered_json::array();
        for (const auto& m : obj.members) members.push_back({{"user_id", m.user_id}, {"x", m.x}, {"y", m.y}});
        ordered_json labels = ordered_json::object();
        for (Attribute a : kAttributes) labels[std::string(attribute_name(a))] = label_name(a, obj.labels[index(a)]);
        ordered_json line = {{"image_id", obj.image_id},
                             {"medoid", {obj.medoid.x, obj.medoid.y}},
                             {"n_members", obj.members.size()},
                             {"members", std::move(members)},
                             {"labels", std::move(labels)}};
        buf += line.dump();
        buf += '\n';
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<AggregatedObject> read_objects_jsonl(std::istream& in) {
    const std::string text = detail::slurp(in);
    detail::LineReader reader(text);
    std::string_view line;
    std::vector<AggregatedObject> objects;
    while (reader.next(line)) {
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        const auto ln = std::to_string(reader.line_number());
        try {
            const auto j = nlohmann::json::parse(line);
            AggregatedObject obj;
            obj.image_id = j.at("image_id").get<std::string>();
            const auto& med = j.at("medoid");
            if (!med.is_array() || med.size() != 2) throw InputError("medoid must be [x, y]");
            obj.medoid = {med[0].get<double>(), med[1].get<double>()};
            for (const auto& m : j.at("members")) {
                DotAnnotation d;
                d.image_id = obj.image_id;
                d.user_id = m.at("user_id").get<std::string>();
                d.x = m.at("x").get<double>();
                d.y = m.at("y").get<double>();
                obj.members.push_back(std::move(d));
            }
            if (auto it = j.find("n_members"); it != j.end() && it->get<std::size_t>() != obj.members.size()) {
                throw InputError("n_members disagrees with members");
            }
            const auto& labels = j.at("labels");
            for (Attribute a : kAttributes) {
                auto it = labels.find(std::string(attribute_name(a)));
                obj.labels[index(a)] =
                    (it == labels.end() || it->is_null()) ? Label::unknown : parse_label(a, it->get<std::string>());
            }
            objects.push_back(std::move(obj));
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("invalid aggregated object: ") + e.what() + ", line " + ln);
        } catch (const InputError& e) {
            throw InputError(std::string(e.what()) + ", line " + ln);
        }
    }
    return objects;
}

}  // namespace fgc
