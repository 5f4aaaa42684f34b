#pragma once

#include "fgc/clustering.hpp"
#include "fgc/mapgen.hpp"
#include "fgc/sim.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace fgc::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct SimulateOptions {
    SimConfig config;
    std::optional<std::filesystem::path> confusion_file;
    std::string start_time = "2014-11-01T00:00:00Z";
    std::filesystem::path out;
    int jobs = 1;
};

struct AggregateOptions {
    std::filesystem::path annotations;
    std::filesystem::path images;
    std::string format = "auto";
    ClusterParams params;
    std::filesystem::path out;
    std::optional<std::filesystem::path> report;
    int jobs = 1;
};

struct GenmapsOptions {
    std::filesystem::path objects;
    std::filesystem::path images;
    std::string method = "fixed";
    KernelSpec kernel;
    double tau = kDefaultTau;
    int downsample = 1;
    std::filesystem::path out;
    int jobs = 1;
};

struct EvaluateOptions {
    std::filesystem::path pred;
    std::filesystem::path gt;
    std::filesystem::path report;
    std::optional<std::filesystem::path> csv;
    std::string method_name = "pred";
    int jobs = 1;
};

struct SplitOptions {
    std::filesystem::path images;
    std::string train_before;
    std::string val_before;
    std::filesystem::path out;
};

void run_simulate(const SimulateOptions& opts);
void run_aggregate(const AggregateOptions& opts);
void run_genmaps(const GenmapsOptions& opts);
void run_evaluate(const EvaluateOptions& opts);
void run_split(const SplitOptions& opts);

}  // namespace fgc::cli
