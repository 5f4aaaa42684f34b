#include "fgc/map_store.hpp"

#include "fgc/fgct.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace fgc {

namespace fs = std::filesystem;

namespace {

bool plain_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

BinaryGrid to_binary(const DensityGrid& g) {
    BinaryGrid b(g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) b[i] = g[i] != 0.0 ? 1 : 0;
    return b;
}

}  // namespace

std::string encode_path_component(std::string_view id) {
    std::string out;
    for (std::size_t i = 0; i < id.size(); ++i) {
        const char c = id[i];
        if (plain_char(c) && !(i == 0 && c == '.')) {
            out += c;
        } else {
            char buf[4];
            std::snprintf(buf, sizeof(buf), "%%%02X", static_cast<unsigned char>(c));
            out += buf;
        }
    }
    return out;
}

std::string decode_path_component(std::string_view name) {
    std::string out;
    for (std::size_t i = 0; i < name.size(); ++i) {
        if (name[i] == '%' && i + 2 < name.size() && hex_value(name[i + 1]) >= 0 && hex_value(name[i + 2]) >= 0) {
            out += static_cast<char>(hex_value(name[i + 1]) * 16 + hex_value(name[i + 2]));
            i += 2;
        } else {
            out += name[i];
        }
    }
    return out;
}

std::string density_channel_name(Attribute a, Label l) {
    return "density_" + std::string(attribute_name(a)) + "_" + std::string(label_name(a, l));
}

std::string segmentation_channel_name(Attribute a, Label c) {
    return "seg_" + std::string(attribute_name(a)) + "_" + std::string(label_name(a, c));
}

std::string mask_channel_name(Attribute a) { return "mask_" + std::string(attribute_name(a)); }

std::vector<std::string> channel_names() {
    std::vector<std::string> names{"density_overall"};
    for (Attribute a : kAttributes) {
        for (Label l : {Label::class0, Label::class1, Label::unknown}) names.push_back(density_channel_name(a, l));
    }
    for (Attribute a : kAttributes) {
        for (Label c : kClasses) names.push_back(segmentation_channel_name(a, c));
    }
    names.emplace_back("background");
    for (Attribute a : kAttributes) names.push_back(mask_channel_name(a));
    return names;
}

void write_image_maps(const fs::path& root, const DensityStack& density, const SegmentationStack& segmentation,
                      const MapMetadata& meta) {
    const fs::path dir = root / encode_path_component(density.image_id);
    fs::create_directories(dir);
    write_fgct(dir / "density_overall.fgct", density.overall);
    for (Attribute a : kAttributes) {
        for (Label l : {Label::class0, Label::class1, Label::unknown}) {
            write_fgct(dir / (density_channel_name(a, l) + ".fgct"), density.channel(a, l));
        }
    }
    for (Attribute a : kAttributes) {
        for (Label c : kClasses) {
            write_fgct(dir / (segmentation_channel_name(a, c) + ".fgct"), segmentation.soft[index(a)][index(c)]);
        }
    }
    write_fgct(dir / "background.fgct", segmentation.background);
    for (Attribute a : kAttributes) write_fgct(dir / (mask_channel_name(a) + ".fgct"), segmentation.unknown_mask[index(a)]);

    nlohmann::ordered_json side;
    side["image_id"] = density.image_id;
    side["channels"] = channel_names();
    side["dims"] = {density.height(), density.width()};
    side["image_dims"] = {meta.image_height, meta.image_width};
    side["method"] = meta.method;
    side["sigma"] = meta.sigma;
    side["truncation_radius"] = meta.truncation_radius;
    side["renormalize"] = meta.renormalize;
    side["tau"] = meta.tau;
    side["tau_per_cell"] = meta.tau * meta.downsample * meta.downsample;
    side["downsample"] = meta.downsample;
    write_file_atomic(dir / "sidecar.json", side.dump(2) + "\n");
}

std::vector<std::pair<std::string, fs::path>> list_image_dirs(const fs::path& root) {
    if (!fs::is_directory(root)) throw InputError("not a directory: " + root.string());
    std::vector<std::pair<std::string, fs::path>> out;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        std::string id = decode_path_component(entry.path().filename().string());
        const fs::path side = entry.path() / "sidecar.json";
        if (fs::exists(side)) {
            std::ifstream in(side);
            const auto j = nlohmann::json::parse(in, nullptr, false);
            if (!j.is_discarded() && j.contains("image_id") && j["image_id"].is_string()) {
                id = j["image_id"].get<std::string>();
            }
        }
        out.emplace_back(std::move(id), entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

GroundTruth read_ground_truth(const fs::path& dir, const std::string& image_id) {
    GroundTruth gt;
    gt.density.image_id = image_id;
    gt.density.overall = read_fgct_grid(dir / "density_overall.fgct");
    for (Attribute a : kAttributes) {
        for (Label l : {Label::class0, Label::class1, Label::unknown}) {
            gt.density.channel(a, l) = read_fgct_grid(dir / (density_channel_name(a, l) + ".fgct"));
            require_same_shape(gt.density.channel(a, l), gt.density.overall, "ground-truth channel");
        }
        gt.masks[index(a)] = to_binary(read_fgct_grid(dir / (mask_channel_name(a) + ".fgct")));
        require_same_shape(gt.masks[index(a)], gt.density.overall, "ground-truth mask");
    }
    return gt;
}

PredictionStack read_prediction(const fs::path& dir, const std::string& image_id) {
    PredictionStack pred;
    pred.image_id = image_id;
    if (fs::exists(dir / "density_overall.fgct")) pred.overall = read_fgct_grid(dir / "density_overall.fgct");
    for (Attribute a : kAttributes) {
        for (Label c : kClasses) pred.cls(a, c) = read_fgct_grid(dir / (density_channel_name(a, c) + ".fgct"));
    }
    return pred;
}

}  // namespace fgc
