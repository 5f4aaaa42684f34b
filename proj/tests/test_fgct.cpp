#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fgc/fgct.hpp"
#include "fgc/map_store.hpp"
#include "fixture_4x4.hpp"
#include "test_support.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

using namespace fgc;

namespace {

std::string bytes_of(const Tensor& t) {
    std::ostringstream out;
    write_fgct(out, t);
    return out.str();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("byte layout") {
    Tensor t{{2, 3}, {0.0f, 1.0f, -2.5f, 3.0f, 4.0f, 1e-3f}};
    const std::string b = bytes_of(t);
    REQUIRE(b.size() == 4 + 2 + 1 + 1 + 2 * 4 + 6 * 4);
    CHECK(b.substr(0, 4) == "FGCT");
    CHECK(static_cast<unsigned char>(b[4]) == 1);
    CHECK(static_cast<unsigned char>(b[5]) == 0);
    CHECK(static_cast<unsigned char>(b[6]) == 1);
    CHECK(static_cast<unsigned char>(b[7]) == 2);
    const unsigned char dims[] = {2, 0, 0, 0, 3, 0, 0, 0};
    CHECK(std::memcmp(b.data() + 8, dims, 8) == 0);
    // -2.5f is 0xC0200000, little-endian.
    const unsigned char v2[] = {0x00, 0x00, 0x20, 0xC0};
    CHECK(std::memcmp(b.data() + 16 + 2 * 4, v2, 4) == 0);
}

TEST_CASE("stream round-trip") {
    std::mt19937 rng(1);
    std::normal_distribution<float> n;
    for (std::uint32_t rank = 0; rank <= 4; ++rank) {
        Tensor t;
        for (std::uint32_t r = 0; r < rank; ++r) t.dims.push_back(1 + (r * 3 + 2) % 5);
        t.values.resize(t.element_count());
        for (float& v : t.values) v = n(rng);
        std::istringstream in(bytes_of(t));
        Tensor back = read_fgct(in);
        CHECK(back.dims == t.dims);
        CHECK(back.values == t.values);
    }
}

TEST_CASE("malformed files are rejected") {
    Tensor t{{2, 2}, {1, 2, 3, 4}};
    std::string b = bytes_of(t);
    auto read = [](std::string s) {
        std::istringstream in(s);
        return read_fgct(in);
    };
    CHECK_THROWS_AS(read("FGC"), InputError);
    CHECK_THROWS_AS(read("XGCT" + b.substr(4)), InputError);
    CHECK_THROWS_AS(read(b.substr(0, b.size() - 1)), InputError);
    CHECK_THROWS_AS(read(b + "x"), InputError);
    std::string v2 = b;
    v2[4] = 2;
    CHECK_THROWS_AS(read(v2), InputError);
    std::string f64 = b;
    f64[6] = 2;
    CHECK_THROWS_AS(read(f64), InputError);
    Tensor bad{{3}, {1, 2}};
    std::ostringstream out;
    CHECK_THROWS_AS(write_fgct(out, bad), InputError);
}

TEST_CASE("grid files") {
    test::TempDir dir("fgct");
    DensityGrid g(5, 3);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.25 * double(i);
    write_fgct(dir / "g.fgct", g);
    auto back = read_fgct_grid(dir / "g.fgct");
    CHECK(back == g);
    CHECK(back.width() == 5);
    CHECK(back.height() == 3);

    BinaryGrid m(2, 2);
    m.at(1, 0) = 1;
    write_fgct(dir / "m.fgct", m);
    auto mb = read_fgct_grid(dir / "m.fgct");
    CHECK(mb.at(1, 0) == 1.0);
    CHECK(mb.at(0, 1) == 0.0);

    // Atomic overwrite leaves no temp files behind.
    write_fgct(dir / "g.fgct", DensityGrid(1, 1, 7.0));
    CHECK(read_fgct_grid(dir / "g.fgct").at(0, 0) == 7.0);
    int files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
    CHECK(files == 2);
    CHECK_THROWS(read_fgct_grid(dir / "missing.fgct"));
}

TEST_CASE("path component encoding") {
    for (std::string id : {"img000001", "a/b", "..", ".hidden", "sp ace%", "ünï", ""}) {
        const auto enc = encode_path_component(id);
        CHECK(enc.find('/') == std::string::npos);
        CHECK((enc.empty() || enc[0] != '.'));
        CHECK(decode_path_component(enc) == id);
    }
    CHECK(encode_path_component("img-1_a.b") == "img-1_a.b");
}

TEST_CASE("map store round-trip") {
    test::TempDir dir("store");
    auto gt = fixture::ground_truth();
    gt.density.image_id = "odd/id";
    SegmentationStack seg = segmentation_stack(gt.density, 0.5);
    seg.unknown_mask = gt.masks;
    MapMetadata meta;
    meta.method = "fixed";
    meta.image_width = meta.image_height = 4;
    write_image_maps(dir.path(), gt.density, seg, meta);

    auto listed = list_image_dirs(dir.path());
    REQUIRE(listed.size() == 1);
    CHECK(listed[0].first == "odd/id");
    CHECK(std::distance(std::filesystem::directory_iterator(listed[0].second), {}) == 21);
    CHECK(channel_names().size() == 20);

    auto back = read_ground_truth(listed[0].second, listed[0].first);
    CHECK(back.density.overall == gt.density.overall);
    CHECK(back.density.channels == gt.density.channels);
    for (std::size_t a = 0; a < 3; ++a) CHECK(back.masks[a] == gt.masks[a]);

    auto side = nlohmann::json::parse(slurp(listed[0].second / "sidecar.json"));
    CHECK(side.at("image_id") == "odd/id");
    CHECK(side.at("method") == "fixed");

    auto pred = read_prediction(listed[0].second, listed[0].first);
    REQUIRE(pred.overall.has_value());
    CHECK(pred.cls(Attribute::sex, Label::class1) == gt.density.channel(Attribute::sex, Label::class1));

    std::filesystem::remove(listed[0].second / "density_overall.fgct");
    CHECK(!read_prediction(listed[0].second, listed[0].first).overall.has_value());
    std::filesystem::remove(listed[0].second / "density_age_pup.fgct");
    CHECK_THROWS(read_prediction(listed[0].second, listed[0].first));
}
