// fgc: crowd-sourced dot annotations -> consensus objects -> ground-truth maps -> counting metrics.
//
// Exit codes: 0 success, 1 internal error, 2 user/input error.

#include "pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace fgc;
using namespace fgc::cli;

void add_jobs(CLI::App* cmd, int& jobs) {
    cmd->add_option("--jobs,-j", jobs, "Worker threads for per-image work")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fine-grained counting ground truth and evaluation toolkit"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Generate synthetic scenes and crowd-sourced dots");
    simulate->add_option("--seed", sim.config.seed, "Random seed");
    simulate->add_option("--images", sim.config.n_images, "Number of images")->check(CLI::NonNegativeNumber);
    simulate->add_option("--width", sim.config.width, "Image width (px)")->check(CLI::PositiveNumber);
    simulate->add_option("--height", sim.config.height, "Image height (px)")->check(CLI::PositiveNumber);
    simulate->add_option("--mean-objects", sim.config.objects_per_image, "Poisson mean of objects per image")
        ->capture_default_str();
    simulate->add_option("--min-separation", sim.config.min_separation, "Minimum distance between objects (px)")
        ->capture_default_str();
    simulate->add_option("--users", sim.config.n_users, "Number of annotators")->check(CLI::NonNegativeNumber);
    simulate->add_option("--participation", sim.config.participation, "Per-image participation probability")
        ->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--sigma-user", sim.config.sigma_user, "Dot placement noise (px)")->capture_default_str();
    simulate->add_option("--confusion", sim.confusion_file, "JSON confusion matrices (and optional priors)");
    simulate->add_option("--start-time", sim.start_time, "Timestamp of the first image (RFC 3339)");
    simulate->add_option("--interval-seconds", sim.config.interval_seconds, "Time between consecutive images");
    simulate->add_option("--out", sim.out, "Output directory")->required();
    add_jobs(simulate, sim.jobs);

    AggregateOptions agg;
    std::string linkage = "average";
    auto* aggregate = app.add_subcommand("aggregate", "Cluster dots into consensus objects");
    aggregate->add_option("--annotations", agg.annotations, "Annotation table (csv or jsonl)")->required();
    aggregate->add_option("--images", agg.images, "Image metadata table")->required();
    aggregate->add_option("--format", agg.format, "Annotation table format")
        ->check(CLI::IsMember({"auto", "csv", "jsonl"}));
    aggregate->add_option("--linkage", linkage, "Cluster linkage")->check(CLI::IsMember({"single", "average"}));
    aggregate->add_option("--threshold", agg.params.distance_threshold, "Merge distance threshold (px)")
        ->capture_default_str();
    aggregate->add_option("--min-cluster-size", agg.params.min_cluster_size, "Smallest cluster kept")
        ->capture_default_str();
    aggregate->add_option("--out", agg.out, "Aggregated objects JSONL")->required();
    aggregate->add_option("--report", agg.report, "Validation report JSON (default <out>.validation.json)");
    add_jobs(aggregate, agg.jobs);

    GenmapsOptions gen;
    bool no_renormalize = false;
    auto* genmaps = app.add_subcommand("genmaps", "Render density, segmentation and mask maps");
    genmaps->add_option("--objects", gen.objects, "Aggregated objects JSONL")->required();
    genmaps->add_option("--images", gen.images, "Image metadata table")->required();
    genmaps->add_option("--method", gen.method, "Density method")->check(CLI::IsMember({"fixed", "cluster"}));
    genmaps->add_option("--sigma", gen.kernel.sigma, "Gaussian bandwidth (px)")->capture_default_str();
    genmaps->add_option("--truncation", gen.kernel.truncation_radius, "Kernel half-width in sigmas")
        ->capture_default_str();
    genmaps->add_flag("--no-renormalize", no_renormalize, "Do not rescale border-truncated kernels to unit mass");
    genmaps->add_option("--tau", gen.tau, "Background threshold (objects per full-resolution pixel)")
        ->capture_default_str();
    genmaps->add_option("--downsample", gen.downsample, "Sum-pooling factor")->check(CLI::PositiveNumber);
    genmaps->add_option("--out", gen.out, "Output directory")->required();
    add_jobs(genmaps, gen.jobs);

    EvaluateOptions ev;
    auto* evaluate = app.add_subcommand("evaluate", "Score predicted maps against ground truth");
    evaluate->add_option("--pred", ev.pred, "Prediction map directory")->required();
    evaluate->add_option("--gt", ev.gt, "Ground-truth map directory")->required();
    evaluate->add_option("--report", ev.report, "Report JSON path")->required();
    evaluate->add_option("--csv", ev.csv, "Report CSV path (default <report>.csv)");
    evaluate->add_option("--method-name", ev.method_name, "Row label in the CSV table");
    add_jobs(evaluate, ev.jobs);

    SplitOptions sp;
    auto* split = app.add_subcommand("split", "Temporal train/val/test split");
    split->add_option("--images", sp.images, "Image metadata table")->required();
    split->add_option("--train-before", sp.train_before, "Images before this time go to train")->required();
    split->add_option("--val-before", sp.val_before, "Images before this time (and not train) go to val")
        ->required();
    split->add_option("--out", sp.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate) {
            run_simulate(sim);
        } else if (*aggregate) {
            agg.params.linkage = parse_linkage(linkage);
            run_aggregate(agg);
        } else if (*genmaps) {
            gen.kernel.renormalize = !no_renormalize;
            run_genmaps(gen);
        } else if (*evaluate) {
            run_evaluate(ev);
        } else if (*split) {
            run_split(sp);
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
