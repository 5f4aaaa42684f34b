#include "fgc/sim.hpp"

#include "fgc/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

namespace fgc {

namespace {

Label draw_label(SplitMix64& rng, const ConfusionMatrix& confusion, Label truth) {
    const auto& row = confusion[index(truth)];
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
        acc += row[k];
        if (u < acc) return static_cast<Label>(k);
    }
    // Rounding left u above the cumulative sum; fall back to the last nonzero entry.
    for (std::size_t k = row.size(); k-- > 0;) {
        if (row[k] > 0.0) return static_cast<Label>(k);
    }
    return Label::unknown;
}

void check_probability(double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError(what + " must lie in [0, 1]");
}

}  // namespace

ConfusionMatrix identity_confusion() {
    ConfusionMatrix m{};
    for (std::size_t i = 0; i < kLabelsPerAttribute; ++i) m[i][i] = 1.0;
    return m;
}

void SimConfig::validate() const {
    if (width < 1 || height < 1) throw InputError("image dimensions must be positive");
    if (n_images < 0) throw InputError("image count must be nonnegative");
    if (!(objects_per_image >= 0.0) || !std::isfinite(objects_per_image)) {
        throw InputError("mean objects per image must be nonnegative");
    }
    if (!(min_separation >= 0.0)) throw InputError("min separation must be nonnegative");
    if (n_users < 0) throw InputError("user count must be nonnegative");
    check_probability(participation, "participation");
    if (!(sigma_user >= 0.0) || !std::isfinite(sigma_user)) throw InputError("sigma_user must be nonnegative");
    for (Attribute a : kAttributes) {
        const std::string name(attribute_name(a));
        check_probability(class0_prior[index(a)], name + " prior");
        for (const auto& row : confusion[index(a)]) {
            double sum = 0.0;
            for (double p : row) {
                check_probability(p, name + " confusion entry");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw InputError(name + " confusion rows must sum to 1");
        }
    }
    if (max_placement_attempts < 1) throw InputError("placement attempts must be positive");
}

std::string sim_image_id(int image_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img%06d", image_index);
    return buf;
}

std::string sim_user_id(int user_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "u%04d", user_index);
    return buf;
}

SimScene generate_scene(const SimConfig& config, int image_index) {
    SimScene scene;
    scene.image_index = image_index;
    scene.image.image_id = sim_image_id(image_index);
    scene.image.width = config.width;
    scene.image.height = config.height;
    scene.image.timestamp = config.start_time + std::chrono::seconds(config.interval_seconds * image_index);

    auto rng = SplitMix64::stream(config.seed, static_cast<std::uint64_t>(image_index), 0);
    const auto count = rng.poisson(config.objects_per_image);
    const double min_sep2 = config.min_separation * config.min_separation;
    scene.objects.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        Point p;
        bool placed = false;
        for (int attempt = 0; attempt < config.max_placement_attempts && !placed; ++attempt) {
            p = {rng.uniform() * config.width, rng.uniform() * config.height};
            placed = std::all_of(scene.objects.begin(), scene.objects.end(), [&](const TrueObject& o) {
                const double dx = o.location.x - p.x, dy = o.location.y - p.y;
                return dx * dx + dy * dy >= min_sep2;
            });
        }
        if (!placed) {
            throw InputError("could not place " + std::to_string(count) + " objects " +
                             std::to_string(config.min_separation) + " px apart in a " +
                             std::to_string(config.width) + "x" + std::to_string(config.height) + " image " +
                             scene.image.image_id + "; lower the object density or the separation");
        }
        TrueObject obj;
        obj.location = p;
        for (Attribute a : kAttributes) {
            obj.labels[index(a)] = rng.uniform() < config.class0_prior[index(a)] ? Label::class0 : Label::class1;
        }
        scene.objects.push_back(obj);
    }
    return scene;
}

std::vector<DotAnnotation> simulate_annotations(SimScene& scene, const SimConfig& config) {
    scene.dots.clear();
    scene.object_of.clear();
    const int image_index = scene.image_index;
    const double w = scene.image.width;
    const double h = scene.image.height;
    const double max_x = std::nextafter(w, 0.0);
    const double max_y = std::nextafter(h, 0.0);

    for (int u = 0; u < config.n_users; ++u) {
        auto rng = SplitMix64::stream(config.seed, static_cast<std::uint64_t>(image_index),
                                      static_cast<std::uint64_t>(u) + 1);
        if (!(rng.uniform() < config.participation)) continue;
        const std::string user = sim_user_id(u);
        for (std::size_t k = 0; k < scene.objects.size(); ++k) {
            const auto& obj = scene.objects[k];
            double x = obj.location.x;
            double y = obj.location.y;
            if (config.sigma_user > 0.0) {
                for (int attempt = 0; attempt < 64; ++attempt) {
                    x = obj.location.x + config.sigma_user * rng.normal();
                    y = obj.location.y + config.sigma_user * rng.normal();
                    if (x >= 0.0 && x < w && y >= 0.0 && y < h) break;
                }
                x = std::clamp(x, 0.0, max_x);
                y = std::clamp(y, 0.0, max_y);
            }
            DotAnnotation dot;
            dot.image_id = scene.image.image_id;
            dot.user_id = user;
            dot.x = x;
            dot.y = y;
            for (Attribute a : kAttributes) {
                dot.responses[index(a)] = draw_label(rng, config.confusion[index(a)], obj.labels[index(a)]);
            }
            scene.dots.push_back(std::move(dot));
            scene.object_of.push_back(k);
        }
    }
    return scene.dots;
}

SimScene simulate_image(const SimConfig& config, int image_index) {
    SimScene scene = generate_scene(config, image_index);
    simulate_annotations(scene, config);
    return scene;
}

RecoveryReport oracle_evaluate(const SimScene& scene, std::span<const AggregatedObject> aggregated, double radius) {
    RecoveryReport r;
    r.n_true = scene.objects.size();
    r.n_recovered = aggregated.size();
    r.count_error = static_cast<long long>(r.n_recovered) - static_cast<long long>(r.n_true);

    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t t = 0; t < scene.objects.size(); ++t) {
        for (std::size_t f = 0; f < aggregated.size(); ++f) {
            const double d = std::hypot(scene.objects[t].location.x - aggregated[f].medoid.x,
                                        scene.objects[t].location.y - aggregated[f].medoid.y);
            if (d <= radius) pairs.emplace_back(d, t, f);
        }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> used_true(r.n_true), used_found(r.n_recovered);
    std::array<std::size_t, kNumAttributes> correct{};
    double loc = 0.0;
    for (const auto& [d, t, f] : pairs) {
        if (used_true[t] || used_found[f]) continue;
        used_true[t] = used_found[f] = true;
        ++r.matched;
        loc += d;
        for (Attribute a : kAttributes) {
            if (aggregated[f].labels[index(a)] == scene.objects[t].labels[index(a)]) ++correct[index(a)];
        }
    }
    r.unmatched_true = r.n_true - r.matched;
    r.unmatched_recovered = r.n_recovered - r.matched;
    r.matched_fraction = r.n_true == 0 ? (r.n_recovered == 0 ? 1.0 : 0.0)
                                       : static_cast<double>(r.matched) / static_cast<double>(r.n_true);
    r.mean_localization_error = r.matched ? loc / static_cast<double>(r.matched) : 0.0;
    for (std::size_t a = 0; a < kNumAttributes; ++a) {
        r.label_accuracy[a] = r.matched ? static_cast<double>(correct[a]) / static_cast<double>(r.matched) : 1.0;
    }
    return r;
}

RecoveryReport oracle_evaluate(const SimScene& scene, std::span<const AggregatedObject> aggregated,
                               const SimConfig& config) {
    return oracle_evaluate(scene, aggregated, 2.0 * config.sigma_user + 1e-6);
}

void load_confusion_file(std::istream& in, SimConfig& config) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid confusion file: ") + e.what());
    }
    if (!j.is_object()) throw InputError("confusion file must hold a JSON object");
    const bool wrapped = j.contains("confusion") || j.contains("priors");
    const nlohmann::json confusion = wrapped ? j.value("confusion", nlohmann::json::object()) : j;
    try {
        for (const auto& [key, matrix] : confusion.items()) {
            const Attribute a = parse_attribute(key);
            if (!matrix.is_array() || matrix.size() != kLabelsPerAttribute) {
                throw InputError("confusion for " + key + " must be a 3x3 array");
            }
            for (std::size_t r = 0; r < kLabelsPerAttribute; ++r) {
                if (!matrix[r].is_array() || matrix[r].size() != kLabelsPerAttribute) {
                    throw InputError("confusion for " + key + " must be a 3x3 array");
                }
                for (std::size_t c = 0; c < kLabelsPerAttribute; ++c) {
                    config.confusion[index(a)][r][c] = matrix[r][c].get<double>();
                }
            }
        }
        if (wrapped && j.contains("priors")) {
            for (const auto& [key, p] : j["priors"].items()) config.class0_prior[index(parse_attribute(key))] = p.get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid confusion file: ") + e.what());
    }
    config.validate();
}

void write_truth_jsonl(std::ostream& out, const SimScene& scene) {
    std::vector<nlohmann::ordered_json> dots(scene.objects.size(), nlohmann::ordered_json::array());
    for (std::size_t i = 0; i < scene.dots.size(); ++i) {
        const auto& d = scene.dots[i];
        dots[scene.object_of[i]].push_back({{"user_id", d.user_id}, {"x", d.x}, {"y", d.y}});
    }
    std::string buf;
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        const auto& obj = scene.objects[k];
        nlohmann::ordered_json labels = nlohmann::ordered_json::object();
        for (Attribute a : kAttributes) labels[std::string(attribute_name(a))] = label_name(a, obj.labels[index(a)]);
        nlohmann::ordered_json line = {{"image_id", scene.image.image_id},
                                       {"object", k},
                                       {"x", obj.location.x},
                                       {"y", obj.location.y},
                                       {"labels", std::move(labels)},
                                       {"dots", std::move(dots[k])}};
        buf += line.dump();
        buf += '\n';
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace fgc
