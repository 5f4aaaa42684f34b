#pragma once

#include "fgc/mapgen.hpp"
#include "fgc/metrics.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fgc {

// On-disk layout, one directory per image under a root:
//   <root>/<encoded image_id>/density_overall.fgct
//                            /density_<attribute>_<label>.fgct   (9, label includes unknown)
//                            /seg_<attribute>_<class>.fgct       (6)
//                            /background.fgct
//                            /mask_<attribute>.fgct              (3)
//                            /sidecar.json
// Prediction directories need only the six density_<attribute>_<class> files;
// density_overall is optional.

struct MapMetadata {
    std::string method;
    double sigma = 12.0;
    double truncation_radius = 4.0;
    bool renormalize = true;
    double tau = kDefaultTau;  // per full-resolution pixel; cells hold downsample^2 pixels
    int downsample = 1;
    int image_width = 0;
    int image_height = 0;
};

/// Percent-encodes everything outside [A-Za-z0-9._-], and a leading '.', so
/// arbitrary ids are safe directory names.
std::string encode_path_component(std::string_view id);
std::string decode_path_component(std::string_view name);

std::string density_channel_name(Attribute a, Label l);
std::string segmentation_channel_name(Attribute a, Label c);
std::string mask_channel_name(Attribute a);

/// All channel names written per image, in sidecar order.
std::vector<std::string> channel_names();

void write_image_maps(const std::filesystem::path& root, const DensityStack& density,
                      const SegmentationStack& segmentation, const MapMetadata& meta);

/// (image_id, directory) for every image directory under root, sorted by image_id.
std::vector<std::pair<std::string, std::filesystem::path>> list_image_dirs(const std::filesystem::path& root);

GroundTruth read_ground_truth(const std::filesystem::path& image_dir, const std::string& image_id);
PredictionStack read_prediction(const std::filesystem::path& image_dir, const std::string& image_id);

}  // namespace fgc
