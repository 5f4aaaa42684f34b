#pragma once

#include "fgc/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fgc {

enum class TableFormat { csv, jsonl };

/// Picks jsonl for `.jsonl`/`.json` extensions, csv otherwise.
TableFormat format_from_extension(const std::filesystem::path& path);

struct Dataset {
    std::vector<ImageRecord> images;
    std::vector<DotAnnotation> annotations;
};

// Image metadata table: image_id,width,height,timestamp (RFC 3339).
std::vector<ImageRecord> read_image_metadata(std::istream& in, TableFormat format);
std::vector<ImageRecord> read_image_metadata(const std::filesystem::path& path, TableFormat format);

/// Parses an annotation table against the image table. Every data row yields one
/// DotAnnotation in file order; blank or missing attribute cells become unknown.
/// Malformed rows throw InputError naming the 1-based line (the header is line 1
/// for csv). Rows referencing images absent from `images` are collected and
/// reported together in a single InputError.
std::vector<DotAnnotation> read_annotations(std::istream& in, TableFormat format,
                                            std::span<const ImageRecord> images);

/// Loads the image table and then the annotation table.
Dataset parse_annotation_file(const std::filesystem::path& annotations, TableFormat format,
                              const std::filesystem::path& image_metadata);

/// Writes the csv header unless `header` is false (to append rows in chunks).
void write_annotations(std::ostream& out, std::span<const DotAnnotation> annotations, TableFormat format,
                       bool header = true);
void write_image_metadata(std::ostream& out, std::span<const ImageRecord> images, TableFormat format);

struct ValidationReport {
    std::size_t total_annotations = 0;
    /// [attribute][label] response counts, unknown included.
    std::array<std::array<std::size_t, kLabelsPerAttribute>, kNumAttributes> label_counts{};
    std::map<std::string, std::size_t> annotations_per_image;
    std::map<std::string, std::size_t> annotations_per_user;
    std::map<std::string, std::size_t> users_per_image;
    /// Filled in by aggregation: clusters dropped for being below the minimum size.
    std::size_t discarded_clusters = 0;
    std::size_t discarded_dots = 0;
    std::vector<std::string> warnings;
};

ValidationReport validate_dataset(std::span<const ImageRecord> images,
                                  std::span<const DotAnnotation> annotations);

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

/// train: t < train_before; val: train_before <= t < val_before; test: t >= val_before.
/// Ids keep input order within each set.
DatasetSplit temporal_split(std::span<const ImageRecord> images, Timestamp train_before, Timestamp val_before);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace fgc
