#include "fgc/mapgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fgc {

namespace {

struct Stamp {
    int x = 0;
    int y = 0;
    double weight = 0.0;
};

int ceil_div(int a, int b) { return (a + b - 1) / b; }

DensityStack empty_stack(int width, int height, int downsample) {
    const int cw = ceil_div(width, downsample);
    const int ch = ceil_div(height, downsample);
    DensityStack stack;
    stack.overall = DensityGrid(cw, ch);
    for (auto& per_attr : stack.channels) {
        for (auto& g : per_attr) g = DensityGrid(cw, ch);
    }
    stack.downsample_factor = downsample;
    return stack;
}

std::vector<Stamp> object_stamps(const AggregatedObject& obj, DensityMethod method, int width, int height) {
    std::vector<Stamp> stamps;
    if (method == DensityMethod::fixed_kernel) {
        auto [x, y] = rasterize(obj.medoid, width, height);
        stamps.push_back({x, y, 1.0});
        return stamps;
    }
    if (obj.members.empty()) throw InputError("cluster-spread density needs member dots");
    const double w = 1.0 / static_cast<double>(obj.members.size());
    stamps.reserve(obj.members.size());
    for (const auto& m : obj.members) {
        if (!(m.x >= 0.0 && m.x < width && m.y >= 0.0 && m.y < height)) {
            throw InputError("member dot outside image " + obj.image_id);
        }
        auto [x, y] = rasterize(m.point(), width, height);
        stamps.push_back({x, y, w});
    }
    std::sort(stamps.begin(), stamps.end(),
              [](const Stamp& a, const Stamp& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
    std::vector<Stamp> merged;
    for (const auto& s : stamps) {
        if (!merged.empty() && merged.back().x == s.x && merged.back().y == s.y) {
            merged.back().weight += s.weight;
        } else {
            merged.push_back(s);
        }
    }
    return merged;
}

}  // namespace

void KernelSpec::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("kernel sigma must be positive");
    if (!(truncation_radius >= 1.0) || !std::isfinite(truncation_radius)) {
        throw InputError("kernel truncation radius must be at least 1 sigma");
    }
}

int KernelSpec::radius_pixels() const { return static_cast<int>(std::ceil(truncation_radius * sigma)); }

DensityMethod parse_density_method(std::string_view text) {
    if (text == "fixed") return DensityMethod::fixed_kernel;
    if (text == "cluster") return DensityMethod::cluster_spread;
    throw InputError("unknown density method '" + std::string(text) + "'");
}

std::string_view density_method_name(DensityMethod m) {
    return m == DensityMethod::fixed_kernel ? "fixed" : "cluster";
}

std::pair<int, int> rasterize(Point p, int width, int height) {
    const int x = std::clamp(static_cast<int>(std::floor(p.x)), 0, width - 1);
    const int y = std::clamp(static_cast<int>(std::floor(p.y)), 0, height - 1);
    return {x, y};
}

DensityStack render_density(std::span<const AggregatedObject> objects, int width, int height,
                            const KernelSpec& kernel, DensityMethod method, int downsample) {
    if (width < 1 || height < 1) throw InputError("image dimensions must be positive");
    if (downsample < 1) throw InputError("downsample factor must be positive");
    kernel.validate();

    DensityStack stack = empty_stack(width, height, downsample);
    if (!objects.empty()) stack.image_id = objects.front().image_id;

    const int radius = kernel.radius_pixels();
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    const double two_var = 2.0 * kernel.sigma * kernel.sigma;
    for (int k = -radius; k <= radius; ++k) {
        taps[static_cast<std::size_t>(k + radius)] = std::exp(-static_cast<double>(k) * k / two_var);
    }
    const double tap_sum = std::accumulate(taps.begin(), taps.end(), 0.0);
    const double full_window_mass = tap_sum * tap_sum;

    const int cw = stack.width();
    std::vector<double> patch;
    std::vector<double> pooled;
    for (const auto& obj : objects) {
        if (!(obj.medoid.x >= 0.0 && obj.medoid.x < width && obj.medoid.y >= 0.0 && obj.medoid.y < height)) {
            throw InputError("medoid outside image " + obj.image_id);
        }
        const auto stamps = object_stamps(obj, method, width, height);

        int x0 = width, x1 = -1, y0 = height, y1 = -1;
        for (const auto& s : stamps) {
            x0 = std::min(x0, s.x);
            x1 = std::max(x1, s.x);
            y0 = std::min(y0, s.y);
            y1 = std::max(y1, s.y);
        }
        x0 = std::max(0, x0 - radius);
        y0 = std::max(0, y0 - radius);
        x1 = std::min(width - 1, x1 + radius);
        y1 = std::min(height - 1, y1 + radius);
        const int pw = x1 - x0 + 1;
        const int ph = y1 - y0 + 1;
        patch.assign(static_cast<std::size_t>(pw) * ph, 0.0);

        for (const auto& s : stamps) {
            const int sx0 = std::max(x0, s.x - radius);
            const int sx1 = std::min(x1, s.x + radius);
            const int sy0 = std::max(y0, s.y - radius);
            const int sy1 = std::min(y1, s.y + radius);
            const double* gx = taps.data() + (sx0 - s.x + radius);
            const int n = sx1 - sx0 + 1;
            for (int y = sy0; y <= sy1; ++y) {
                const double wy = s.weight * taps[static_cast<std::size_t>(y - s.y + radius)];
                double* row = patch.data() + static_cast<std::size_t>(y - y0) * pw + (sx0 - x0);
                for (int i = 0; i < n; ++i) row[i] += wy * gx[i];
            }
        }

        const double mass = std::accumulate(patch.begin(), patch.end(), 0.0);
        const double scale = kernel.renormalize ? 1.0 / mass : 1.0 / full_window_mass;
        for (double& v : patch) v *= scale;

        // Pool into output cells (identity when downsample == 1).
        const int f = downsample;
        const int cx0 = x0 / f, cx1 = x1 / f, cy0 = y0 / f, cy1 = y1 / f;
        const int cpw = cx1 - cx0 + 1;
        const std::vector<double>* source = &patch;
        if (f > 1) {
            pooled.assign(static_cast<std::size_t>(cpw) * (cy1 - cy0 + 1), 0.0);
            for (int y = y0; y <= y1; ++y) {
                const double* row = patch.data() + static_cast<std::size_t>(y - y0) * pw;
                double* out = pooled.data() + static_cast<std::size_t>(y / f - cy0) * cpw;
                for (int x = x0; x <= x1; ++x) out[x / f - cx0] += row[x - x0];
            }
            source = &pooled;
        }

        std::array<double*, kNumAttributes + 1> targets{};
        targets[0] = stack.overall.values().data();
        for (Attribute a : kAttributes) targets[1 + index(a)] = stack.channel(a, obj.labels[index(a)]).values().data();
        for (int cy = cy0; cy <= cy1; ++cy) {
            const double* src = source->data() + static_cast<std::size_t>(cy - cy0) * cpw;
            const std::size_t offset = static_cast<std::size_t>(cy) * cw + cx0;
            for (double* t : targets) {
                double* dst = t + offset;
                for (int i = 0; i < cpw; ++i) dst[i] += src[i];
            }
        }
    }
    return stack;
}

DensityStack fixed_kernel_density(std::span<const AggregatedObject> objects, int width, int height,
                                  const KernelSpec& kernel, int downsample) {
    return render_density(objects, width, height, kernel, DensityMethod::fixed_kernel, downsample);
}

DensityStack cluster_spread_density(std::span<const AggregatedObject> objects, int width, int height,
                                    const KernelSpec& kernel, int downsample) {
    return render_density(objects, width, height, kernel, DensityMethod::cluster_spread, downsample);
}

SoftSegmentation soft_segmentation(const DensityStack& density, double eps) {
    SoftSegmentation seg;
    const int w = density.width();
    const int h = density.height();
    for (Attribute a : kAttributes) {
        const auto& d0 = density.channel(a, Label::class0);
        const auto& d1 = density.channel(a, Label::class1);
        auto& s0 = seg[index(a)][0];
        auto& s1 = seg[index(a)][1];
        s0 = DensityGrid(w, h);
        s1 = DensityGrid(w, h);
        for (std::size_t i = 0; i < d0.size(); ++i) {
            const double denom = d0[i] + d1[i];
            if (denom > eps) {
                s0[i] = std::clamp(d0[i] / denom, 0.0, 1.0);
                s1[i] = std::clamp(d1[i] / denom, 0.0, 1.0);
            }
        }
    }
    return seg;
}

BinaryGrid background_channel(const DensityStack& density, double tau) {
    if (!(tau > 0.0)) throw InputError("background threshold must be positive");
    BinaryGrid bg(density.width(), density.height());
    const auto& overall = density.overall;
    for (std::size_t i = 0; i < overall.size(); ++i) bg[i] = overall[i] < tau ? 1 : 0;
    return bg;
}

UnknownMasks unknown_loss_mask(const DensityStack& density, double tau) {
    if (!(tau > 0.0)) throw InputError("mask threshold must be positive");
    UnknownMasks masks;
    const auto& overall = density.overall;
    for (Attribute a : kAttributes) {
        const auto& d0 = density.channel(a, Label::class0);
        const auto& d1 = density.channel(a, Label::class1);
        const auto& du = density.channel(a, Label::unknown);
        auto& mask = masks[index(a)];
        mask = BinaryGrid(density.width(), density.height());
        for (std::size_t i = 0; i < overall.size(); ++i) {
            mask[i] = (overall[i] >= tau && du[i] > std::max(d0[i], d1[i])) ? 1 : 0;
        }
    }
    return masks;
}

SegmentationStack segmentation_stack(const DensityStack& density, double tau) {
    return {soft_segmentation(density), background_channel(density, tau), unknown_loss_mask(density, tau)};
}

DensityGrid downsample_preserving_count(const DensityGrid& grid, int factor) {
    if (factor < 1) throw InputError("downsample factor must be positive");
    if (factor == 1) return grid;
    const int cw = ceil_div(grid.width(), factor);
    const int ch = ceil_div(grid.height(), factor);
    DensityGrid out(cw, ch);
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) out.at(x / factor, y / factor) += grid.at(x, y);
    }
    return out;
}

DensityStack downsample_preserving_count(const DensityStack& stack, int factor) {
    DensityStack out;
    out.image_id = stack.image_id;
    out.overall = downsample_preserving_count(stack.overall, factor);
    for (std::size_t a = 0; a < kNumAttributes; ++a) {
        for (std::size_t l = 0; l < kLabelsPerAttribute; ++l) {
            out.channels[a][l] = downsample_preserving_count(stack.channels[a][l], factor);
        }
    }
    out.downsample_factor = stack.downsample_factor * factor;
    return out;
}

}  // namespace fgc
