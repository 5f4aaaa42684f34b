#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fgc/clustering.hpp"
#include "fgc/fgct.hpp"
#include "fgc/map_store.hpp"
#include "fixture_4x4.hpp"
#include "test_support.hpp"

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace fgc;
namespace fs = std::filesystem;

namespace {

std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

int run(const std::string& args, const fs::path& log) {
    const char* bin = std::getenv("FGC_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "FGC_BIN is not set");
    const std::string cmd = quote(bin) + " " + args + " >" + quote(log.string()) + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Relative path -> contents for every non-manifest file under root.
std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto name = e.path().filename().string();
        if (name.find("manifest") != std::string::npos) continue;
        out[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return out;
}

std::string p(const fs::path& path) { return quote(path.string()); }

}  // namespace

TEST_CASE("full pipeline is deterministic and conserves counts") {
    test::TempDir dir("cli_pipe");
    for (const char* run_name : {"a", "b"}) {
        const fs::path r = dir / run_name;
        const auto log = dir / (std::string(run_name) + ".log");
        REQUIRE(run("simulate --seed 1 --images 6 --users 5 --width 300 --height 240 --min-separation 50 --mean-objects 8 --out " +
                        p(r / "sim"),
                    log) == 0);
        REQUIRE(run("aggregate --annotations " + p(r / "sim/annotations.csv") + " --images " +
                        p(r / "sim/images.csv") + " --out " + p(r / "objects.jsonl"),
                    log) == 0);
        REQUIRE(run("genmaps --method cluster --objects " + p(r / "objects.jsonl") + " --images " +
                        p(r / "sim/images.csv") + " --out " + p(r / "gt"),
                    log) == 0);
        REQUIRE(run("genmaps --method fixed --downsample 8 --objects " + p(r / "objects.jsonl") + " --images " +
                        p(r / "sim/images.csv") + " --out " + p(r / "gt8"),
                    log) == 0);
        REQUIRE(run("evaluate --pred " + p(r / "gt") + " --gt " + p(r / "gt") + " --report " + p(r / "report.json"),
                    log) == 0);
    }
    CHECK(tree(dir / "a") == tree(dir / "b"));

    const fs::path a = dir / "a";
    for (const char* f : {"annotations.csv", "images.csv", "truth.jsonl", "manifest.json"}) {
        CHECK(fs::exists(a / "sim" / f));
    }
    auto manifest = nlohmann::json::parse(slurp(a / "sim/manifest.json"));
    CHECK(manifest.at("config").at("seed") == 1);
    CHECK(manifest.contains("outputs"));

    // Well-separated objects: every truth object is recovered, and maps integrate to counts.
    std::ifstream objs_in(a / "objects.jsonl");
    auto objects = read_objects_jsonl(objs_in);
    std::size_t truth_lines = 0;
    {
        std::ifstream t(a / "sim/truth.jsonl");
        for (std::string line; std::getline(t, line);) truth_lines += !line.empty();
    }
    CHECK(objects.size() == truth_lines);
    std::map<std::string, int> per_image;
    for (const auto& o : objects) ++per_image[o.image_id];
    for (const auto& [id, d] : list_image_dirs(a / "gt")) {
        const double n = per_image[id];
        CHECK(std::abs(integral(read_fgct_grid(d / "density_overall.fgct")) - n) <= 1e-6 * std::max(1.0, n));
        const auto d8 = a / "gt8" / d.filename();
        auto g8 = read_fgct_grid(d8 / "density_overall.fgct");
        CHECK(g8.width() == 38);
        CHECK(g8.height() == 30);
        CHECK(std::abs(integral(g8) - n) <= 1e-6 * std::max(1.0, n));
    }
    CHECK(list_image_dirs(a / "gt").size() == 6);

    auto report = nlohmann::json::parse(slurp(a / "report.json"));
    CHECK(report.at("MAE").get<double>() == 0.0);
    CHECK(report.at("CMMAE").get<double>() == 0.0);
    const std::string csv = slurp(a / "report.csv");
    CHECK(csv.rfind("method,MAE,CMMAE,species_elephant,species_fur,sex_male,sex_female,age_adult,age_pup\n", 0) == 0);
}

TEST_CASE("methods agree on single-member clusters") {
    test::TempDir dir("cli_agree");
    REQUIRE(run("simulate --seed 4 --images 3 --users 1 --width 120 --height 90 --mean-objects 5 --out " +
                    p(dir / "sim"),
                dir / "log") == 0);
    REQUIRE(run("aggregate --min-cluster-size 1 --annotations " + p(dir / "sim/annotations.csv") + " --images " +
                    p(dir / "sim/images.csv") + " --out " + p(dir / "objects.jsonl"),
                dir / "log") == 0);
    std::ifstream objs_in(dir / "objects.jsonl");
    auto objects = read_objects_jsonl(objs_in);
    std::size_t dots = 0;
    {
        std::ifstream a(dir / "sim/annotations.csv");
        for (std::string line; std::getline(a, line);) ++dots;
    }
    CHECK(objects.size() == dots - 1);  // every dot is its own object
    for (const char* m : {"fixed", "cluster"}) {
        REQUIRE(run(std::string("genmaps --method ") + m + " --objects " + p(dir / "objects.jsonl") + " --images " +
                        p(dir / "sim/images.csv") + " --out " + p(dir / m),
                    dir / "log") == 0);
    }
    auto fixed = tree(dir / "fixed");
    auto cluster = tree(dir / "cluster");
    REQUIRE(fixed.size() == cluster.size());
    for (const auto& [name, bytes] : fixed) {
        if (name.find("sidecar") != std::string::npos) continue;
        CHECK_MESSAGE(cluster.at(name) == bytes, name);
    }
}

TEST_CASE("evaluate on the 4x4 fixture") {
    test::TempDir dir("cli_fixture");
    auto gt = fixture::ground_truth();
    SegmentationStack seg = segmentation_stack(gt.density, 0.5);
    seg.unknown_mask = gt.masks;
    MapMetadata meta;
    meta.method = "fixed";
    write_image_maps(dir / "gt", gt.density, seg, meta);
    const auto pred = fixture::prediction();
    const fs::path pd = dir / "pred" / encode_path_component(pred.image_id);
    fs::create_directories(pd);
    write_fgct(pd / "density_overall.fgct", *pred.overall);
    for (Attribute a : kAttributes) {
        for (Label c : kClasses) write_fgct(pd / (density_channel_name(a, c) + ".fgct"), pred.cls(a, c));
    }
    REQUIRE(run("evaluate --pred " + p(dir / "pred") + " --gt " + p(dir / "gt") + " --report " +
                    p(dir / "r.json") + " --csv " + p(dir / "r.csv") + " --method-name hand",
                dir / "log") == 0);
    auto r = nlohmann::json::parse(slurp(dir / "r.json"));
    CHECK(r.at("MAE").get<double>() == fixture::kExpectedMae);
    CHECK(r.at("CMMAE").get<double>() == fixture::kExpectedCmmae);
    CHECK(r.at("MMAE").at("age_adult").get<double>() == 3.0);
    CHECK(slurp(dir / "r.csv") ==
          "method,MAE,CMMAE,species_elephant,species_fur,sex_male,sex_female,age_adult,age_pup\n"
          "hand,1,1,0,1,1,0,3,1\n");

    // An extra ground-truth image has no prediction.
    auto other = fixture::ground_truth();
    other.density.image_id = "lonely";
    write_image_maps(dir / "gt", other.density, seg, meta);
    CHECK(run("evaluate --pred " + p(dir / "pred") + " --gt " + p(dir / "gt") + " --report " + p(dir / "r2.json"),
              dir / "log") == 2);
    CHECK(slurp(dir / "log").find("lonely") != std::string::npos);
}

TEST_CASE("error exits") {
    test::TempDir dir("cli_err");
    const auto log = dir / "log";
    REQUIRE(run("simulate --images 0 --out " + p(dir / "empty"), log) == 0);
    CHECK(slurp(dir / "empty/annotations.csv") == "image_id,user_id,x,y,species,sex,age\n");
    CHECK(slurp(dir / "empty/images.csv") == "image_id,width,height,timestamp\n");

    CHECK(run("aggregate --annotations " + p(dir / "empty/annotations.csv") + " --images " + p(dir / "nope.csv") +
                  " --out " + p(dir / "o.jsonl"),
              log) == 2);
    CHECK(run("genmaps --method magic --objects x --images y --out z", log) == 2);
    CHECK(run("frobnicate", log) == 2);
    CHECK(run("simulate --images 1", log) == 2);  // --out is required

    {
        std::ofstream bad(dir / "bad.csv");
        bad << "image_id,user_id,x,y,species,sex,age\nimg000000,u1,9999,1,,,\n";
    }
    REQUIRE(run("simulate --images 1 --out " + p(dir / "one"), log) == 0);
    CHECK(run("aggregate --annotations " + p(dir / "bad.csv") + " --images " + p(dir / "one/images.csv") +
                  " --out " + p(dir / "o.jsonl"),
              log) == 2);
    CHECK(slurp(log).find("line 2") != std::string::npos);

    {
        std::ofstream blocker(dir / "file");
        blocker << "x";
    }
    CHECK(run("simulate --images 1 --out " + p(dir / "file/sub"), log) == 2);
    CHECK(run("--version", log) == 0);
}

TEST_CASE("split") {
    test::TempDir dir("cli_split");
    REQUIRE(run("simulate --images 10 --mean-objects 1 --out " + p(dir / "sim"), dir / "log") == 0);
    // Images are hourly from 2014-11-01T00:00:00Z.
    REQUIRE(run("split --images " + p(dir / "sim/images.csv") +
                    " --train-before 2014-11-01T04:00:00Z --val-before 2014-11-01T07:30:00Z --out " + p(dir / "s"),
                dir / "log") == 0);
    auto lines = [&](const char* f) {
        std::vector<std::string> out;
        std::ifstream in(dir / "s" / f);
        for (std::string l; std::getline(in, l);) out.push_back(l);
        return out;
    };
    CHECK(lines("train.txt") == std::vector<std::string>{"img000000", "img000001", "img000002", "img000003"});
    CHECK(lines("val.txt") == std::vector<std::string>{"img000004", "img000005", "img000006", "img000007"});
    CHECK(lines("test.txt") == std::vector<std::string>{"img000008", "img000009"});
    CHECK(run("split --images " + p(dir / "sim/images.csv") +
                  " --train-before 2014-11-02T00:00:00Z --val-before 2014-11-01T00:00:00Z --out " + p(dir / "s2"),
              dir / "log") == 2);
}
