#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fgc/clustering.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

using namespace fgc;
using fgc::test::dot;

namespace {

using Members = std::vector<std::tuple<double, double, std::string>>;

Members key(const std::vector<DotAnnotation>& dots) {
    Members k;
    for (const auto& d : dots) k.emplace_back(d.y, d.x, d.user_id);
    std::sort(k.begin(), k.end());
    return k;
}

// Straight from the definition: recompute every linkage from raw dot pairs at
// every step, merge the closest permitted pair, stop above the threshold.
std::vector<Members> naive_clusters(const std::vector<DotAnnotation>& dots, const ClusterParams& p) {
    std::vector<std::vector<DotAnnotation>> clusters;
    for (const auto& d : dots) clusters.push_back({d});
    auto linkage = [&](const auto& a, const auto& b) {
        double best = std::numeric_limits<double>::infinity(), sum = 0.0;
        for (const auto& u : a) {
            for (const auto& v : b) {
                if (u.user_id == v.user_id) return std::numeric_limits<double>::infinity();
                const double d = std::hypot(u.x - v.x, u.y - v.y);
                best = std::min(best, d);
                sum += d;
            }
        }
        return p.linkage == Linkage::single ? best : sum / double(a.size() * b.size());
    };
    for (;;) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double d = linkage(clusters[i], clusters[j]);
                if (d < best) best = d, bi = i, bj = j;
            }
        }
        if (!(best <= p.distance_threshold)) break;
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    std::vector<Members> out;
    for (const auto& c : clusters) {
        if (static_cast<int>(c.size()) >= p.min_cluster_size) out.push_back(key(c));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Members> clusters_of(const std::vector<AggregatedObject>& objs) {
    std::vector<Members> out;
    for (const auto& o : objs) out.push_back(key(o.members));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<DotAnnotation> random_dots(std::mt19937_64& rng, int n, int users, double extent) {
    std::uniform_real_distribution<double> u(0.0, extent);
    std::uniform_int_distribution<int> user(0, users - 1);
    std::uniform_int_distribution<int> lab(0, 2);
    std::vector<DotAnnotation> dots;
    for (int i = 0; i < n; ++i) {
        Responses r{Label(lab(rng)), Label(lab(rng)), Label(lab(rng))};
        dots.push_back(dot("u" + std::to_string(user(rng)), u(rng), u(rng), r));
    }
    return dots;
}

}  // namespace

TEST_CASE("three close dots and one stray") {
    ClusterParams p{Linkage::average, 15.0, 2};
    std::vector<DotAnnotation> dots{dot("a", 100, 100), dot("b", 102, 101), dot("c", 100.5, 102.5), dot("d", 150, 100)};
    ClusterStats stats;
    auto objs = cluster_image_annotations(dots, p, &stats);
    REQUIRE(objs.size() == 1);
    CHECK(objs[0].member_count() == 3);
    CHECK(stats.discarded_clusters == 1);
    CHECK(stats.discarded_dots == 1);
    CHECK(clusters_of(objs) == naive_clusters(dots, p));
}

TEST_CASE("same user never merges") {
    ClusterParams p{Linkage::average, 15.0, 2};
    std::vector<DotAnnotation> dots{dot("a", 10, 10), dot("a", 11, 10)};
    CHECK(cluster_image_annotations(dots, p).empty());
    p.linkage = Linkage::single;
    CHECK(cluster_image_annotations(dots, p).empty());
}

TEST_CASE("two separated groups of four") {
    ClusterParams p{Linkage::average, 15.0, 2};
    std::vector<DotAnnotation> dots;
    for (int g = 0; g < 2; ++g) {
        for (int u = 0; u < 4; ++u) dots.push_back(dot("u" + std::to_string(u), 50 + 200 * g + u, 60 + (u % 2)));
    }
    auto objs = cluster_image_annotations(dots, p);
    REQUIRE(objs.size() == 2);
    CHECK(objs[0].member_count() == 4);
    CHECK(objs[1].member_count() == 4);
    CHECK(objs[0].medoid.x < objs[1].medoid.x);
}

TEST_CASE("empty input and mixed images") {
    CHECK(cluster_image_annotations({}, ClusterParams{}).empty());
    std::vector<DotAnnotation> dots{dot("a", 1, 1, kAllUnknown, "x"), dot("b", 1, 1, kAllUnknown, "y")};
    CHECK_THROWS_AS(cluster_image_annotations(dots, ClusterParams{}), InputError);
}

TEST_CASE("min cluster size 1 keeps singletons") {
    ClusterParams p{Linkage::average, 15.0, 1};
    std::vector<DotAnnotation> dots{dot("a", 10, 10), dot("a", 11, 10), dot("a", 80, 80)};
    CHECK(cluster_image_annotations(dots, p).size() == 3);
}

TEST_CASE("agrees with the naive definition on random scenes") {
    std::mt19937_64 rng(42);
    int nontrivial = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + trial % 24;
        auto dots = random_dots(rng, n, 2 + trial % 6, 60.0);
        for (Linkage l : {Linkage::single, Linkage::average}) {
            ClusterParams p{l, 4.0 + trial % 20, 1 + trial % 3};
            auto got = clusters_of(cluster_image_annotations(dots, p));
            auto want = naive_clusters(dots, p);
            CHECK(got == want);
            for (const auto& c : want) nontrivial += c.size() > 2;
        }
    }
    CHECK(nontrivial > 50);
}

TEST_CASE("output is invariant to input order") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto dots = random_dots(rng, 40, 5, 100.0);
        // A duplicated point exercises exact ties.
        dots.push_back(dots.front());
        dots.back().user_id = "dup";
        ClusterParams p{trial % 2 ? Linkage::single : Linkage::average, 12.0, 2};
        auto a = cluster_image_annotations(dots, p);
        std::shuffle(dots.begin(), dots.end(), rng);
        auto b = cluster_image_annotations(dots, p);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(key(a[i].members) == key(b[i].members));
            CHECK(a[i].medoid.x == b[i].medoid.x);
            CHECK(a[i].medoid.y == b[i].medoid.y);
            CHECK(a[i].labels == b[i].labels);
        }
    }
}

TEST_CASE("clusters hold distinct users and output is sorted") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        auto dots = random_dots(rng, 60, 4, 120.0);
        auto objs = cluster_image_annotations(dots, ClusterParams{Linkage::single, 20.0, 2});
        for (std::size_t i = 0; i < objs.size(); ++i) {
            std::set<std::string> users;
            for (const auto& m : objs[i].members) users.insert(m.user_id);
            CHECK(users.size() == objs[i].member_count());
            if (i > 0) {
                const auto& prev = objs[i - 1].medoid;
                const auto& cur = objs[i].medoid;
                CHECK((prev.y < cur.y || (prev.y == cur.y && prev.x <= cur.x)));
            }
        }
    }
}

TEST_CASE("single linkage: raising the threshold only coarsens") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        auto dots = random_dots(rng, 30, 1, 80.0);
        // Distinct users: the cannot-link constraint never interferes.
        for (std::size_t i = 0; i < dots.size(); ++i) dots[i].user_id = "u" + std::to_string(i);
        auto fine = cluster_image_annotations(dots, ClusterParams{Linkage::single, 6.0, 1});
        auto coarse = cluster_image_annotations(dots, ClusterParams{Linkage::single, 12.0, 1});
        CHECK(coarse.size() <= fine.size());
        for (const auto& f : fine) {
            auto fk = key(f.members);
            bool contained = false;
            for (const auto& c : coarse) {
                auto ck = key(c.members);
                contained |= std::includes(ck.begin(), ck.end(), fk.begin(), fk.end());
            }
            CHECK(contained);
        }
    }
}

TEST_CASE("medoid") {
    CHECK(medoid(std::vector<Point>{{5, 5}}) == Point{5, 5});
    CHECK(medoid(std::vector<Point>{{0, 0}, {0, 10}, {0, 1}}) == Point{0, 1});
    CHECK(medoid(std::vector<Point>{{0, 0}, {0, 2}, {2, 0}, {2, 2}}) == Point{0, 0});
    CHECK(medoid(std::vector<Point>{{2, 2}, {2, 0}, {0, 2}, {0, 0}}) == Point{0, 0});
    CHECK_THROWS(medoid(std::vector<Point>{}));

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 50);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Point> pts(1 + trial % 9);
        for (auto& p : pts) p = {u(rng), u(rng)};
        double best = std::numeric_limits<double>::infinity();
        Point want{};
        for (const auto& c : pts) {
            double s = 0;
            for (const auto& q : pts) s += std::hypot(c.x - q.x, c.y - q.y);
            const bool lower = c.y < want.y || (c.y == want.y && c.x < want.x);
            if (s < best || (s == best && lower)) best = s, want = c;
        }
        CHECK(medoid(pts) == want);
    }
}

TEST_CASE("majority vote") {
    auto vote = [](std::vector<Label> species) {
        std::vector<DotAnnotation> m;
        for (Label l : species) m.push_back(dot("u", 0, 0, {l, Label::unknown, Label::unknown}));
        return majority_vote_labels(m)[0];
    };
    using L = Label;
    CHECK(vote({L::class0, L::class0, L::class1}) == L::class0);
    CHECK(vote({L::class0, L::class1}) == L::unknown);
    CHECK(vote({L::unknown, L::unknown, L::unknown}) == L::unknown);
    CHECK(vote({L::class1, L::unknown}) == L::class1);
    CHECK(vote({L::class1, L::unknown, L::unknown}) == L::unknown);
    CHECK(vote({L::class1, L::class1, L::unknown, L::unknown, L::class0}) == L::class1);
    std::vector<DotAnnotation> m{dot("a", 0, 0, {L::class0, L::class1, L::unknown}),
                                 dot("b", 0, 0, {L::class0, L::class1, L::class0})};
    CHECK(majority_vote_labels(m) == Responses{L::class0, L::class1, L::class0});
}

TEST_CASE("objects JSONL round-trip") {
    std::mt19937_64 rng(4);
    auto dots = random_dots(rng, 50, 5, 100.0);
    auto objs = cluster_image_annotations(dots, ClusterParams{});
    REQUIRE(!objs.empty());
    std::ostringstream out;
    write_objects_jsonl(out, objs);
    std::istringstream in(out.str());
    auto back = read_objects_jsonl(in);
    REQUIRE(back.size() == objs.size());
    for (std::size_t i = 0; i < objs.size(); ++i) {
        CHECK(back[i].image_id == objs[i].image_id);
        CHECK(back[i].medoid == objs[i].medoid);
        CHECK(back[i].labels == objs[i].labels);
        CHECK(key(back[i].members) == key(objs[i].members));
    }
    std::istringstream bad("{\"image_id\":\"a\"}\n");
    CHECK_THROWS_AS(read_objects_jsonl(bad), InputError);
}
