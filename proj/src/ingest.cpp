#include "fgc/ingest.hpp"

#include "table_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_map>

namespace fgc {

namespace {

using json = nlohmann::json;

constexpr std::string_view kAnnotationHeader = "image_id,user_id,x,y,species,sex,age";
constexpr std::string_view kImageHeader = "image_id,width,height,timestamp";

[[noreturn]] void fail_line(std::size_t line, const std::string& reason) {
    throw InputError(reason + ", line " + std::to_string(line));
}

class ImageIndex {
public:
    explicit ImageIndex(std::span<const ImageRecord> images) {
        by_id_.reserve(images.size());
        for (const auto& img : images) by_id_.emplace(img.image_id, &img);
    }

    const ImageRecord* find(const std::string& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : it->second;
    }

private:
    std::unordered_map<std::string, const ImageRecord*> by_id_;
};

// Validates one annotation against the image table. Unknown ids are collected
// rather than thrown so the final error can list all of them.
void check_annotation(const DotAnnotation& dot, const ImageIndex& images_by_id, std::size_t line,
                      std::set<std::string>& missing) {
    if (dot.image_id.empty()) fail_line(line, "empty image_id");
    if (dot.user_id.empty()) fail_line(line, "empty user_id");
    if (!std::isfinite(dot.x) || !std::isfinite(dot.y)) fail_line(line, "non-finite coordinate");
    if (dot.x < 0.0 || dot.y < 0.0) fail_line(line, "coordinate out of bounds");
    const ImageRecord* img = images_by_id.find(dot.image_id);
    if (img == nullptr) {
        missing.insert(dot.image_id);
        return;
    }
    if (dot.x >= img->width || dot.y >= img->height) fail_line(line, "coordinate out of bounds");
}

void throw_missing(const std::set<std::string>& missing) {
    if (missing.empty()) return;
    std::string msg = "annotations reference unknown image ids:";
    for (const auto& id : missing) msg += " " + id;
    throw InputError(msg);
}

double json_number(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) fail_line(line, std::string("missing or non-numeric '") + key + "'");
    return it->get<double>();
}

std::string json_string(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) fail_line(line, std::string("missing '") + key + "'");
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    fail_line(line, std::string("'") + key + "' must be a string");
}

Label json_label(const json& obj, Attribute a, std::size_t line) {
    auto it = obj.find(std::string(attribute_name(a)));
    if (it == obj.end() || it->is_null()) return Label::unknown;
    if (!it->is_string()) fail_line(line, "attribute '" + std::string(attribute_name(a)) + "' must be a string");
    try {
        return parse_label(a, it->get<std::string>());
    } catch (const InputError& e) {
        fail_line(line, e.what());
    }
}

int parse_dimension(std::string_view text, std::size_t line, const char* name) {
    int v = 0;
    if (!detail::parse_number(text, v)) fail_line(line, std::string("invalid ") + name);
    if (v < 1) fail_line(line, std::string(name) + " must be positive");
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

TableFormat format_from_extension(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return (ext == ".jsonl" || ext == ".json") ? TableFormat::jsonl : TableFormat::csv;
}

std::vector<ImageRecord> read_image_metadata(std::istream& in, TableFormat format) {
    const std::string text = detail::slurp(in);
    detail::LineReader reader(text);
    std::string_view line;
    std::vector<ImageRecord> images;
    std::set<std::string> seen;

    auto add = [&](ImageRecord rec, std::size_t ln) {
        if (rec.image_id.empty()) fail_line(ln, "empty image_id");
        if (!seen.insert(rec.image_id).second) fail_line(ln, "duplicate image_id '" + rec.image_id + "'");
        images.push_back(std::move(rec));
    };

    if (format == TableFormat::csv) {
        if (!reader.next(line)) return images;
        if (line != kImageHeader) fail_line(1, "expected header '" + std::string(kImageHeader) + "'");
        std::vector<std::string_view> fields;
        std::deque<std::string> storage;
        while (reader.next(line)) {
            const auto ln = reader.line_number();
            if (line.empty()) continue;
            if (!detail::split_csv(line, fields, storage) || fields.size() != 4) fail_line(ln, "expected 4 fields");
            ImageRecord rec;
            rec.image_id = std::string(fields[0]);
            rec.width = parse_dimension(fields[1], ln, "width");
            rec.height = parse_dimension(fields[2], ln, "height");
            try {
                rec.timestamp = parse_rfc3339(fields[3]);
            } catch (const InputError& e) {
                fail_line(ln, e.what());
            }
            add(std::move(rec), ln);
        }
        return images;
    }

    while (reader.next(line)) {
        const auto ln = reader.line_number();
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) fail_line(ln, "invalid JSON object");
        ImageRecord rec;
        rec.image_id = json_string(obj, "image_id", ln);
        const double w = json_number(obj, "width", ln);
        const double h = json_number(obj, "height", ln);
        if (w < 1 || h < 1 || w != std::floor(w) || h != std::floor(h)) fail_line(ln, "width/height must be positive integers");
        rec.width = static_cast<int>(w);
        rec.height = static_cast<int>(h);
        try {
            rec.timestamp = parse_rfc3339(json_string(obj, "timestamp", ln));
        } catch (const InputError& e) {
            fail_line(ln, e.what());
        }
        add(std::move(rec), ln);
    }
    return images;
}

std::vector<ImageRecord> read_image_metadata(const std::filesystem::path& path, TableFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open image metadata " + path.string());
    return read_image_metadata(in, format);
}

std::vector<DotAnnotation> read_annotations(std::istream& in, TableFormat format,
                                            std::span<const ImageRecord> images) {
    const std::string text = detail::slurp(in);
    const ImageIndex image_index(images);
    detail::LineReader reader(text);
    std::string_view line;
    std::vector<DotAnnotation> out;
    std::set<std::string> missing;

    if (format == TableFormat::csv) {
        if (!reader.next(line)) return out;
        if (line != kAnnotationHeader) fail_line(1, "expected header '" + std::string(kAnnotationHeader) + "'");
        out.reserve(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
        std::vector<std::string_view> fields;
        std::deque<std::string> storage;
        while (reader.next(line)) {
            const auto ln = reader.line_number();
            if (line.empty()) continue;
            if (!detail::split_csv(line, fields, storage) || fields.size() != 7) fail_line(ln, "expected 7 fields");
            DotAnnotation dot;
            dot.image_id = std::string(fields[0]);
            dot.user_id = std::string(fields[1]);
            if (!detail::parse_number(fields[2], dot.x)) fail_line(ln, "invalid x");
            if (!detail::parse_number(fields[3], dot.y)) fail_line(ln, "invalid y");
            for (Attribute a : kAttributes) {
                try {
                    dot.responses[index(a)] = parse_label(a, fields[4 + index(a)]);
                } catch (const InputError& e) {
                    fail_line(ln, e.what());
                }
            }
            check_annotation(dot, image_index, ln, missing);
            out.push_back(std::move(dot));
        }
        throw_missing(missing);
        return out;
    }

    while (reader.next(line)) {
        const auto ln = reader.line_number();
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) fail_line(ln, "invalid JSON object");
        DotAnnotation dot;
        dot.image_id = json_string(obj, "image_id", ln);
        dot.user_id = json_string(obj, "user_id", ln);
        dot.x = json_number(obj, "x", ln);
        dot.y = json_number(obj, "y", ln);
        for (Attribute a : kAttributes) dot.responses[index(a)] = json_label(obj, a, ln);
        check_annotation(dot, image_index, ln, missing);
        out.push_back(std::move(dot));
    }
    throw_missing(missing);
    return out;
}

Dataset parse_annotation_file(const std::filesystem::path& annotations, TableFormat format,
                              const std::filesystem::path& image_metadata) {
    Dataset ds;
    ds.images = read_image_metadata(image_metadata, format_from_extension(image_metadata));
    std::ifstream in(annotations, std::ios::binary);
    if (!in) throw InputError("cannot open annotations " + annotations.string());
    ds.annotations = read_annotations(in, format, ds.images);
    return ds;
}

void write_annotations(std::ostream& out, std::span<const DotAnnotation> annotations, TableFormat format,
                       bool header) {
    std::string buf;
    buf.reserve(64 * annotations.size() + 64);
    if (format == TableFormat::csv) {
        if (header) {
            buf += kAnnotationHeader;
            buf += '\n';
        }
        for (const auto& d : annotations) {
            detail::write_csv_field(buf, d.image_id);
            buf += ',';
            detail::write_csv_field(buf, d.user_id);
            buf += ',';
            buf += format_double(d.x);
            buf += ',';
            buf += format_double(d.y);
            for (Attribute a : kAttributes) {
                buf += ',';
                buf += label_name(a, d.response(a));
            }
            buf += '\n';
        }
    } else {
        for (const auto& d : annotations) {
            json obj = {{"image_id", d.image_id}, {"user_id", d.user_id}, {"x", d.x}, {"y", d.y}};
            for (Attribute a : kAttributes) obj[std::string(attribute_name(a))] = label_name(a, d.response(a));
            buf += obj.dump();
            buf += '\n';
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_image_metadata(std::ostream& out, std::span<const ImageRecord> images, TableFormat format) {
    std::string buf;
    if (format == TableFormat::csv) {
        buf += kImageHeader;
        buf += '\n';
        for (const auto& img : images) {
            detail::write_csv_field(buf, img.image_id);
            buf += ',' + std::to_string(img.width) + ',' + std::to_string(img.height) + ',' +
                   format_rfc3339(img.timestamp) + '\n';
        }
    } else {
        for (const auto& img : images) {
            json obj = {{"image_id", img.image_id},
                        {"width", img.width},
                        {"height", img.height},
                        {"timestamp", format_rfc3339(img.timestamp)}};
            buf += obj.dump();
            buf += '\n';
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

ValidationReport validate_dataset(std::span<const ImageRecord> images, std::span<const DotAnnotation> annotations) {
    ValidationReport report;
    report.total_annotations = annotations.size();
    for (const auto& img : images) {
        report.annotations_per_image[img.image_id] = 0;
        report.users_per_image[img.image_id] = 0;
    }

    std::map<std::string, std::set<std::string>> users;
    std::set<std::tuple<std::string_view, std::string_view, double, double>> seen;
    std::map<std::string, std::size_t> duplicates;
    for (const auto& d : annotations) {
        for (Attribute a : kAttributes) ++report.label_counts[index(a)][index(d.response(a))];
        ++report.annotations_per_image[d.image_id];
        ++report.annotations_per_user[d.user_id];
        users[d.image_id].insert(d.user_id);
        if (!seen.emplace(d.image_id, d.user_id, d.x, d.y).second) {
            ++duplicates[d.image_id + "/" + d.user_id + " at (" + format_double(d.x) + ", " + format_double(d.y) + ")"];
        }
    }
    for (const auto& [img, set] : users) report.users_per_image[img] = set.size();
    for (const auto& [where, n] : duplicates) {
        report.warnings.push_back("duplicate dot: " + where + (n > 1 ? " (x" + std::to_string(n + 1) + ")" : ""));
    }
    return report;
}

DatasetSplit temporal_split(std::span<const ImageRecord> images, Timestamp train_before, Timestamp val_before) {
    if (val_before < train_before) throw InputError("split boundaries out of order");
    DatasetSplit split;
    for (const auto& img : images) {
        if (img.timestamp < train_before) {
            split.train.push_back(img.image_id);
        } else if (img.timestamp < val_before) {
            split.val.push_back(img.image_id);
        } else {
            split.test.push_back(img.image_id);
        }
    }
    return split;
}

}  // namespace fgc
