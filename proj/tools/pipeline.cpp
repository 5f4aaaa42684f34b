#include "pipeline.hpp"

#include "fgc/fgct.hpp"
#include "fgc/ingest.hpp"
#include "fgc/map_store.hpp"
#include "fgc/metrics.hpp"
#include "fgc/parallel.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace fgc::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string hex(const unsigned char* data, unsigned int n) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < n; ++i) {
        out += kDigits[data[i] >> 4];
        out += kDigits[data[i] & 0xF];
    }
    return out;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw std::runtime_error("SHA-256 unavailable");
        }
    }
    void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
    std::string finish() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int n = 0;
        EVP_DigestFinal_ex(ctx_.get(), md, &n);
        return hex(md, n);
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::string file_sha256(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    Sha256 sha;
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        sha.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return sha.finish();
}

// Digest of a directory tree's listing (relative paths and sizes), not its contents.
std::string listing_sha256(const fs::path& dir) {
    std::vector<std::pair<std::string, std::uintmax_t>> entries;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) entries.emplace_back(fs::relative(e.path(), dir).generic_string(), e.file_size());
    }
    std::sort(entries.begin(), entries.end());
    Sha256 sha;
    for (const auto& [name, size] : entries) {
        const std::string line = name + "\t" + std::to_string(size) + "\n";
        sha.update(line.data(), line.size());
    }
    return sha.finish();
}

// Run manifest: tool version, full config snapshot, input digests, timings.
class Manifest {
public:
    explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
        json_["tool"] = "fgc";
        json_["version"] = kToolVersion;
        json_["command"] = std::move(command);
        json_["config"] = ordered_json::object();
        json_["inputs"] = ordered_json::array();
        json_["outputs"] = ordered_json::object();
        json_["timing"] = ordered_json::object();
    }

    ordered_json& config() { return json_["config"]; }
    ordered_json& outputs() { return json_["outputs"]; }

    void add_file(const fs::path& path) {
        json_["inputs"].push_back({{"path", path.string()},
                                   {"bytes", fs::file_size(path)},
                                   {"sha256", file_sha256(path)}});
    }

    void add_directory(const fs::path& path) {
        json_["inputs"].push_back({{"path", path.string()}, {"listing_sha256", listing_sha256(path)}});
    }

    void phase(const std::string& name) {
        const auto now = std::chrono::steady_clock::now();
        json_["timing"][name + "_seconds"] = std::chrono::duration<double>(now - last_).count();
        last_ = now;
    }

    void write(const fs::path& path) {
        json_["timing"]["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_file_atomic(path, json_.dump(2) + "\n");
    }

private:
    ordered_json json_;
    std::chrono::steady_clock::time_point start_;
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir.string());
    const fs::path probe = dir / ".fgc_write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw InputError("output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
}

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) ensure_directory(file.parent_path());
}

void require_file(const fs::path& path, const char* what) {
    if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " not found: " + path.string());
}

ordered_json kernel_json(const KernelSpec& k) {
    return {{"sigma", k.sigma}, {"truncation_radius", k.truncation_radius}, {"renormalize", k.renormalize}};
}

ordered_json label_counts_json(const ValidationReport& r) {
    ordered_json out = ordered_json::object();
    for (Attribute a : kAttributes) {
        ordered_json per = ordered_json::object();
        for (Label l : {Label::class0, Label::class1, Label::unknown}) {
            per[std::string(label_name(a, l))] = r.label_counts[index(a)][index(l)];
        }
        out[std::string(attribute_name(a))] = std::move(per);
    }
    return out;
}

// Buffered writer that lands at `path` by rename once complete.
class AtomicFile {
public:
    explicit AtomicFile(fs::path path) : path_(std::move(path)), tmp_(path_.string() + ".tmp") {
        out_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!out_) throw InputError("cannot write " + tmp_.string());
    }
    std::ostream& stream() { return out_; }
    void commit() {
        out_.close();
        if (!out_) throw InputError("write failed: " + tmp_.string());
        fs::rename(tmp_, path_);
    }

private:
    fs::path path_;
    fs::path tmp_;
    std::ofstream out_;
};

}  // namespace

void run_simulate(const SimulateOptions& opts) {
    Manifest manifest("simulate");
    SimConfig config = opts.config;
    config.start_time = parse_rfc3339(opts.start_time);
    if (opts.confusion_file) {
        std::ifstream in(*opts.confusion_file);
        if (!in) throw InputError("cannot open confusion file " + opts.confusion_file->string());
        load_confusion_file(in, config);
        manifest.add_file(*opts.confusion_file);
    }
    config.validate();
    ensure_directory(opts.out);

    auto& c = manifest.config();
    c["seed"] = config.seed;
    c["images"] = config.n_images;
    c["width"] = config.width;
    c["height"] = config.height;
    c["mean_objects"] = config.objects_per_image;
    c["min_separation"] = config.min_separation;
    c["users"] = config.n_users;
    c["participation"] = config.participation;
    c["sigma_user"] = config.sigma_user;
    c["start_time"] = format_rfc3339(config.start_time);
    c["interval_seconds"] = config.interval_seconds;
    c["max_placement_attempts"] = config.max_placement_attempts;
    ordered_json conf = ordered_json::object();
    ordered_json priors = ordered_json::object();
    for (Attribute a : kAttributes) {
        conf[std::string(attribute_name(a))] = config.confusion[index(a)];
        priors[std::string(attribute_name(a))] = config.class0_prior[index(a)];
    }
    c["confusion"] = std::move(conf);
    c["class0_prior"] = std::move(priors);
    c["rng"] = "splitmix64";

    AtomicFile annotations(opts.out / "annotations.csv");
    AtomicFile truth(opts.out / "truth.jsonl");
    write_annotations(annotations.stream(), {}, TableFormat::csv);

    std::vector<ImageRecord> images;
    images.reserve(static_cast<std::size_t>(config.n_images));
    std::size_t n_objects = 0;
    std::size_t n_dots = 0;
    constexpr int kChunk = 256;
    for (int first = 0; first < config.n_images; first += kChunk) {
        const int count = std::min(kChunk, config.n_images - first);
        std::vector<SimScene> scenes(static_cast<std::size_t>(count));
        parallel_for(scenes.size(), opts.jobs, [&](std::size_t i) {
            scenes[i] = simulate_image(config, first + static_cast<int>(i));
        });
        for (const auto& scene : scenes) {
            images.push_back(scene.image);
            write_annotations(annotations.stream(), scene.dots, TableFormat::csv, false);
            write_truth_jsonl(truth.stream(), scene);
            n_objects += scene.objects.size();
            n_dots += scene.dots.size();
        }
    }
    annotations.commit();
    truth.commit();
    {
        std::ostringstream ss;
        write_image_metadata(ss, images, TableFormat::csv);
        write_file_atomic(opts.out / "images.csv", ss.str());
    }
    manifest.phase("simulate");
    manifest.outputs() = {{"images", images.size()}, {"objects", n_objects}, {"annotations", n_dots}};
    manifest.write(opts.out / "manifest.json");
    std::cerr << "simulate: " << images.size() << " images, " << n_objects << " objects, " << n_dots
              << " annotations -> " << opts.out.string() << "\n";
}

void run_aggregate(const AggregateOptions& opts) {
    Manifest manifest("aggregate");
    opts.params.validate();
    require_file(opts.annotations, "annotation file");
    require_file(opts.images, "image metadata file");
    const TableFormat format = opts.format == "auto"  ? format_from_extension(opts.annotations)
                               : opts.format == "csv" ? TableFormat::csv
                                                      : TableFormat::jsonl;
    const Dataset dataset = parse_annotation_file(opts.annotations, format, opts.images);
    manifest.phase("parse");

    ValidationReport report = validate_dataset(dataset.images, dataset.annotations);
    const AggregationResult result = aggregate_dataset(dataset, opts.params, opts.jobs);
    report.discarded_clusters = result.stats.discarded_clusters;
    report.discarded_dots = result.stats.discarded_dots;
    manifest.phase("cluster");

    ensure_parent(opts.out);
    std::size_t n_objects = 0;
    {
        AtomicFile out(opts.out);
        for (const auto& objs : result.per_image) {
            write_objects_jsonl(out.stream(), objs);
            n_objects += objs.size();
        }
        out.commit();
    }

    ordered_json rep;
    rep["total_annotations"] = report.total_annotations;
    rep["objects"] = n_objects;
    rep["discarded_clusters"] = report.discarded_clusters;
    rep["discarded_dots"] = report.discarded_dots;
    rep["label_counts"] = label_counts_json(report);
    rep["annotations_per_user"] = report.annotations_per_user;
    ordered_json per_image = ordered_json::object();
    for (std::size_t i = 0; i < dataset.images.size(); ++i) {
        const auto& id = dataset.images[i].image_id;
        per_image[id] = {{"annotations", report.annotations_per_image.at(id)},
                         {"users", report.users_per_image.at(id)},
                         {"objects", result.per_image[i].size()}};
    }
    rep["images"] = std::move(per_image);
    rep["warnings"] = report.warnings;
    fs::path report_path = opts.report.value_or(fs::path(opts.out).replace_extension(".validation.json"));
    ensure_parent(report_path);
    write_file_atomic(report_path, rep.dump(2) + "\n");
    manifest.phase("write");

    manifest.add_file(opts.annotations);
    manifest.add_file(opts.images);
    auto& c = manifest.config();
    c["format"] = format == TableFormat::csv ? "csv" : "jsonl";
    c["linkage"] = linkage_name(opts.params.linkage);
    c["threshold"] = opts.params.distance_threshold;
    c["min_cluster_size"] = opts.params.min_cluster_size;
    c["jobs"] = opts.jobs;
    manifest.outputs() = {{"objects", opts.out.string()}, {"report", report_path.string()}};
    manifest.write(fs::path(opts.out).replace_extension(".manifest.json"));
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "aggregate: " << dataset.annotations.size() << " annotations -> " << n_objects << " objects ("
              << report.discarded_clusters << " clusters below minimum size)\n";
}

void run_genmaps(const GenmapsOptions& opts) {
    Manifest manifest("genmaps");
    const DensityMethod method = parse_density_method(opts.method);
    opts.kernel.validate();
    if (!(opts.tau > 0.0)) throw InputError("--tau must be positive");
    if (opts.downsample < 1) throw InputError("--downsample must be positive");
    require_file(opts.objects, "aggregated objects file");
    require_file(opts.images, "image metadata file");

    const auto images = read_image_metadata(opts.images, format_from_extension(opts.images));
    std::vector<AggregatedObject> objects;
    {
        std::ifstream in(opts.objects, std::ios::binary);
        objects = read_objects_jsonl(in);
    }
    std::map<std::string, std::vector<AggregatedObject>> by_image;
    for (const auto& img : images) by_image[img.image_id];
    std::size_t n_objects = objects.size();
    for (auto& obj : objects) {
        auto it = by_image.find(obj.image_id);
        if (it == by_image.end()) throw InputError("object references unknown image id " + obj.image_id);
        it->second.push_back(std::move(obj));
    }
    objects.clear();
    manifest.phase("parse");

    ensure_directory(opts.out);
    // tau is per full-resolution pixel; pooled cells hold f*f pixels of density.
    const double tau = opts.tau * opts.downsample * opts.downsample;
    MapMetadata meta;
    meta.method = std::string(density_method_name(method));
    meta.sigma = opts.kernel.sigma;
    meta.truncation_radius = opts.kernel.truncation_radius;
    meta.renormalize = opts.kernel.renormalize;
    meta.tau = opts.tau;
    meta.downsample = opts.downsample;

    parallel_for(images.size(), opts.jobs, [&](std::size_t i) {
        const auto& img = images[i];
        const auto& objs = by_image.at(img.image_id);
        DensityStack density = render_density(objs, img.width, img.height, opts.kernel, method, opts.downsample);
        density.image_id = img.image_id;
        const SegmentationStack seg = segmentation_stack(density, tau);
        MapMetadata m = meta;
        m.image_width = img.width;
        m.image_height = img.height;
        write_image_maps(opts.out, density, seg, m);
    });
    manifest.phase("render");

    manifest.add_file(opts.objects);
    manifest.add_file(opts.images);
    auto& c = manifest.config();
    c["method"] = meta.method;
    c["kernel"] = kernel_json(opts.kernel);
    c["tau"] = opts.tau;
    c["tau_per_output_cell"] = tau;
    c["downsample"] = opts.downsample;
    c["division_epsilon"] = kDivisionEpsilon;
    c["jobs"] = opts.jobs;
    manifest.outputs() = {{"images", images.size()}, {"objects", n_objects}, {"channels", channel_names()}};
    manifest.write(opts.out / "manifest.json");
    std::cerr << "genmaps: " << images.size() << " images, " << n_objects << " objects -> " << opts.out.string()
              << "\n";
}

void run_evaluate(const EvaluateOptions& opts) {
    Manifest manifest("evaluate");
    const auto pred_dirs = list_image_dirs(opts.pred);
    const auto gt_dirs = list_image_dirs(opts.gt);

    std::map<std::string, fs::path> preds(pred_dirs.begin(), pred_dirs.end());
    std::vector<std::string> unpaired;
    for (const auto& [id, dir] : gt_dirs) {
        if (!preds.count(id)) unpaired.push_back(id + " (no prediction)");
    }
    std::map<std::string, fs::path> gts(gt_dirs.begin(), gt_dirs.end());
    for (const auto& [id, dir] : pred_dirs) {
        if (!gts.count(id)) unpaired.push_back(id + " (no ground truth)");
    }
    if (!unpaired.empty()) {
        std::string msg = "unpaired image ids:";
        for (const auto& u : unpaired) msg += " " + u;
        throw InputError(msg);
    }

    std::vector<ImageEval> rows(gt_dirs.size());
    parallel_for(gt_dirs.size(), opts.jobs, [&](std::size_t i) {
        const auto& [id, gt_dir] = gt_dirs[i];
        const GroundTruth gt = read_ground_truth(gt_dir, id);
        const PredictionStack pred = read_prediction(preds.at(id), id);
        rows[i] = evaluate_image(pred, gt);
    });
    const EvalReport report = summarize(std::move(rows));
    manifest.phase("evaluate");

    ensure_parent(opts.report);
    write_file_atomic(opts.report, report_to_json(report));
    const fs::path csv = opts.csv.value_or(fs::path(opts.report).replace_extension(".csv"));
    ensure_parent(csv);
    write_file_atomic(csv, report_to_csv(report, opts.method_name));

    manifest.add_directory(opts.pred);
    manifest.add_directory(opts.gt);
    manifest.config() = {{"method_name", opts.method_name}, {"jobs", opts.jobs}};
    manifest.outputs() = {{"report", opts.report.string()}, {"csv", csv.string()}};
    manifest.write(fs::path(opts.report).replace_extension(".manifest.json"));
    std::cerr << "evaluate: " << report.images.size() << " images, MAE " << report.mae << ", CMMAE " << report.cmmae
              << "\n";
}

void run_split(const SplitOptions& opts) {
    Manifest manifest("split");
    require_file(opts.images, "image metadata file");
    const auto images = read_image_metadata(opts.images, format_from_extension(opts.images));
    const Timestamp train_before = parse_rfc3339(opts.train_before);
    const Timestamp val_before = parse_rfc3339(opts.val_before);
    const DatasetSplit split = temporal_split(images, train_before, val_before);
    ensure_directory(opts.out);
    auto write_ids = [&](const char* name, const std::vector<std::string>& ids) {
        std::string text;
        for (const auto& id : ids) text += id + "\n";
        write_file_atomic(opts.out / name, text);
    };
    write_ids("train.txt", split.train);
    write_ids("val.txt", split.val);
    write_ids("test.txt", split.test);

    manifest.add_file(opts.images);
    manifest.config() = {{"train_before", format_rfc3339(train_before)}, {"val_before", format_rfc3339(val_before)}};
    manifest.outputs() = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
    manifest.write(opts.out / "manifest.json");
    std::cerr << "split: " << split.train.size() << " train, " << split.val.size() << " val, " << split.test.size()
              << " test\n";
}

}  // namespace fgc::cli
