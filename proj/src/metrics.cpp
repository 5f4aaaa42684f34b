#include "fgc/metrics.hpp"

#include "fgc/ingest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace fgc {

namespace {

void require_finite(const DensityGrid& g, const char* what) {
    for (double v : g.values()) {
        if (!std::isfinite(v)) throw InputError(std::string("non-finite value in ") + what);
    }
}

}  // namespace

double PredictionStack::overall_count() const {
    if (overall) return integral(*overall);
    double total = 0.0;
    for (Attribute a : kAttributes) {
        for (Label c : kClasses) total += integral(cls(a, c));
    }
    return total / static_cast<double>(kNumAttributes);
}

double masked_count(const DensityGrid& grid, const BinaryGrid& mask) {
    require_same_shape(grid, mask, "density vs mask");
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!mask[i]) sum += grid[i];
    }
    return sum;
}

double count_mae(std::span<const double> pred_totals, std::span<const double> gt_totals) {
    if (pred_totals.size() != gt_totals.size()) {
        throw InputError("count_mae: " + std::to_string(pred_totals.size()) + " predictions vs " +
                         std::to_string(gt_totals.size()) + " ground-truth counts");
    }
    if (pred_totals.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred_totals.size(); ++i) sum += std::abs(pred_totals[i] - gt_totals[i]);
    return sum / static_cast<double>(pred_totals.size());
}

double masked_mae(std::span<const DensityGrid> pred, std::span<const DensityGrid> gt,
                  std::span<const BinaryGrid> masks) {
    if (pred.size() != gt.size() || gt.size() != masks.size()) throw InputError("masked_mae: sequence length mismatch");
    std::vector<double> p(pred.size());
    std::vector<double> g(gt.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        require_same_shape(pred[i], gt[i], "prediction vs ground truth");
        p[i] = masked_count(pred[i], masks[i]);
        g[i] = masked_count(gt[i], masks[i]);
    }
    return count_mae(p, g);
}

double cmmae(const ClassTable& mmae) {
    double total = 0.0;
    for (const auto& per_attr : mmae) {
        double s = 0.0;
        for (double v : per_attr) s += v;
        total += s / static_cast<double>(per_attr.size());
    }
    return total / static_cast<double>(mmae.size());
}

double cmmae(const std::vector<std::vector<double>>& mmae) {
    if (mmae.size() != kNumAttributes) {
        throw InputError("CMMAE needs " + std::to_string(kNumAttributes) + " attributes, got " +
                         std::to_string(mmae.size()));
    }
    ClassTable table{};
    for (std::size_t a = 0; a < kNumAttributes; ++a) {
        if (mmae[a].size() != kClassesPerAttribute) {
            throw InputError("CMMAE: attribute " + std::to_string(a) + " has " + std::to_string(mmae[a].size()) +
                             " class values, expected " + std::to_string(kClassesPerAttribute));
        }
        for (std::size_t c = 0; c < kClassesPerAttribute; ++c) {
            if (!std::isfinite(mmae[a][c])) throw InputError("CMMAE: non-finite entry");
            table[a][c] = mmae[a][c];
        }
    }
    return cmmae(table);
}

double loss_class_mse(const PredictionStack& pred, const DensityStack& gt, const UnknownMasks& masks, bool masked) {
    double loss = 0.0;
    for (Attribute a : kAttributes) {
        const auto& mask = masks[index(a)];
        for (Label c : kClasses) {
            const auto& p = pred.cls(a, c);
            const auto& g = gt.channel(a, c);
            require_same_shape(p, g, "class prediction vs ground truth");
            if (masked) require_same_shape(g, mask, "ground truth vs mask");
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (masked && mask[i]) continue;
                const double d = p[i] - g[i];
                sum += d * d;
                ++n;
            }
            if (n > 0) loss += sum / static_cast<double>(n);
        }
    }
    return loss;
}

double loss_total_count(const PredictionStack& pred, const DensityStack& gt) {
    double loss = 0.0;
    for (Attribute a : kAttributes) {
        const auto& p0 = pred.cls(a, Label::class0);
        const auto& p1 = pred.cls(a, Label::class1);
        const auto& g0 = gt.channel(a, Label::class0);
        const auto& g1 = gt.channel(a, Label::class1);
        const auto& gu = gt.channel(a, Label::unknown);
        require_same_shape(p0, g0, "class prediction vs ground truth");
        require_same_shape(p1, g0, "class prediction vs ground truth");
        if (g0.empty()) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < g0.size(); ++i) {
            const double d = (g0[i] + g1[i] + gu[i]) - (p0[i] + p1[i]);
            sum += d * d;
        }
        loss += sum / static_cast<double>(g0.size());
    }
    return loss;
}

double loss_soft_xent(const SegmentationPrediction& pred, const SegmentationStack& gt, const UnknownMasks& masks) {
    double loss = 0.0;
    for (Attribute a : kAttributes) {
        const auto& ch = pred[index(a)];
        const auto& s0 = gt.soft[index(a)][0];
        const auto& s1 = gt.soft[index(a)][1];
        const auto& mask = masks[index(a)];
        for (const auto& g : ch) require_same_shape(g, gt.background, "segmentation prediction vs ground truth");
        require_same_shape(mask, gt.background, "mask vs ground truth");
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < gt.background.size(); ++i) {
            const double q0 = ch[0][i], q1 = ch[1][i], qb = ch[2][i];
            if (!(std::abs(q0 + q1 + qb - 1.0) <= 1e-6) || q0 < 0.0 || q1 < 0.0 || qb < 0.0) {
                throw InputError("segmentation prediction for " + std::string(attribute_name(a)) +
                                 " is not normalized at pixel " + std::to_string(i));
            }
            if (mask[i]) continue;
            double term = 0.0;
            if (gt.background[i]) {
                term = -std::log(std::max(qb, kLogFloor));
            } else {
                if (s0[i] > 0.0) term -= s0[i] * std::log(std::max(q0, kLogFloor));
                if (s1[i] > 0.0) term -= s1[i] * std::log(std::max(q1, kLogFloor));
            }
            sum += term;
            ++n;
        }
        if (n > 0) loss += sum / static_cast<double>(n);
    }
    return loss;
}

PerAttribute<PerClass<DensityGrid>> fuse_density_segmentation(const DensityGrid& overall,
                                                              const SegmentationPrediction& seg) {
    PerAttribute<PerClass<DensityGrid>> out;
    for (Attribute a : kAttributes) {
        const auto& s = seg[index(a)];
        require_same_shape(overall, s[0], "overall vs segmentation");
        require_same_shape(overall, s[1], "overall vs segmentation");
        for (std::size_t i = 0; i < overall.size(); ++i) {
            if (s[0][i] + s[1][i] > 1.0 + 1e-6) {
                throw InputError("foreground segmentation exceeds 1 for " + std::string(attribute_name(a)));
            }
        }
        for (std::size_t c = 0; c < kClassesPerAttribute; ++c) {
            auto& d = out[index(a)][c];
            d = DensityGrid(overall.width(), overall.height());
            for (std::size_t i = 0; i < overall.size(); ++i) d[i] = overall[i] * s[c][i];
        }
    }
    return out;
}

EvalReport evaluate(std::span<const PredictionStack> preds, std::span<const GroundTruth> gts) {
    std::map<std::string_view, const PredictionStack*> by_id;
    for (const auto& p : preds) {
        if (!by_id.emplace(p.image_id, &p).second) throw InputError("duplicate prediction for image " + p.image_id);
    }
    std::set<std::string_view> gt_ids;
    std::vector<std::string> missing_pred;
    for (const auto& g : gts) {
        gt_ids.insert(g.density.image_id);
        if (!by_id.count(g.density.image_id)) missing_pred.push_back(g.density.image_id);
    }
    std::vector<std::string> missing_gt;
    for (const auto& p : preds) {
        if (!gt_ids.count(p.image_id)) missing_gt.push_back(p.image_id);
    }
    if (!missing_pred.empty() || !missing_gt.empty()) {
        std::string msg = "unpaired image ids:";
        for (const auto& id : missing_pred) msg += " " + id + " (no prediction)";
        for (const auto& id : missing_gt) msg += " " + id + " (no ground truth)";
        throw InputError(msg);
    }

    std::vector<ImageEval> rows;
    rows.reserve(gts.size());
    for (const auto& g : gts) rows.push_back(evaluate_image(*by_id.at(g.density.image_id), g));
    return summarize(std::move(rows));
}

ImageEval evaluate_image(const PredictionStack& p, const GroundTruth& g) {
    ImageEval ev;
    ev.image_id = g.density.image_id;
    if (p.overall) {
        require_same_shape(*p.overall, g.density.overall, "overall prediction vs ground truth");
        require_finite(*p.overall, "overall prediction");
    }
    ev.gt_count = integral(g.density.overall);
    for (Attribute a : kAttributes) {
        for (Label c : kClasses) {
            const auto& pg = p.cls(a, c);
            require_same_shape(pg, g.density.channel(a, c), "class prediction vs ground truth");
            require_finite(pg, "class prediction");
            ev.gt_class_counts[index(a)][index(c)] = masked_count(g.density.channel(a, c), g.masks[index(a)]);
            ev.pred_class_counts[index(a)][index(c)] = masked_count(pg, g.masks[index(a)]);
        }
    }
    ev.pred_count = p.overall_count();
    return ev;
}

EvalReport summarize(std::vector<ImageEval> images) {
    EvalReport report;
    report.images = std::move(images);
    const std::size_t n = report.images.size();
    std::vector<double> pc(n), gc(n);
    for (std::size_t i = 0; i < n; ++i) {
        pc[i] = report.images[i].pred_count;
        gc[i] = report.images[i].gt_count;
    }
    report.mae = count_mae(pc, gc);
    for (std::size_t a = 0; a < kNumAttributes; ++a) {
        for (std::size_t c = 0; c < kClassesPerAttribute; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                pc[i] = report.images[i].pred_class_counts[a][c];
                gc[i] = report.images[i].gt_class_counts[a][c];
            }
            report.mmae[a][c] = count_mae(pc, gc);
        }
    }
    report.cmmae = cmmae(report.mmae);
    return report;
}

namespace {
std::string class_key(std::size_t a, std::size_t c) {
    const auto attr = static_cast<Attribute>(a);
    return std::string(attribute_name(attr)) + "_" + std::string(label_name(attr, static_cast<Label>(c)));
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["n_images"] = report.images.size();
    j["MAE"] = report.mae;
    j["CMMAE"] = report.cmmae;
    nlohmann::ordered_json mmae = nlohmann::ordered_json::object();
    for (std::size_t a = 0; a < kNumAttributes; ++a) {
        for (std::size_t c = 0; c < kClassesPerAttribute; ++c) mmae[class_key(a, c)] = report.mmae[a][c];
    }
    j["MMAE"] = std::move(mmae);
    nlohmann::ordered_json images = nlohmann::ordered_json::array();
    for (const auto& ev : report.images) {
        nlohmann::ordered_json row;
        row["image_id"] = ev.image_id;
        row["gt_count"] = ev.gt_count;
        row["pred_count"] = ev.pred_count;
        row["abs_error"] = std::abs(ev.pred_count - ev.gt_count);
        nlohmann::ordered_json gtc = nlohmann::ordered_json::object();
        nlohmann::ordered_json pdc = nlohmann::ordered_json::object();
        for (std::size_t a = 0; a < kNumAttributes; ++a) {
            for (std::size_t c = 0; c < kClassesPerAttribute; ++c) {
                gtc[class_key(a, c)] = ev.gt_class_counts[a][c];
                pdc[class_key(a, c)] = ev.pred_class_counts[a][c];
            }
        }
        row["gt_masked_class_counts"] = std::move(gtc);
        row["pred_masked_class_counts"] = std::move(pdc);
        images.push_back(std::move(row));
    }
    j["images"] = std::move(images);
    return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report, std::string_view method) {
    std::string out = "method,MAE,CMMAE";
    for (std::size_t a = 0; a < kNumAttributes; ++a) {
        for (std::size_t c = 0; c < kClassesPerAttribute; ++c) out += "," + class_key(a, c);
    }
    out += "\n";
    out += std::string(method) + "," + format_double(report.mae) + "," + format_double(report.cmmae);
    for (std::size_t a = 0; a < kNumAttributes; ++a) {
        for (std::size_t c = 0; c < kClassesPerAttribute; ++c) out += "," + format_double(report.mmae[a][c]);
    }
    out += "\n";
    return out;
}

}  // namespace fgc
