#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "oracles.hpp"
#include "tara/pointcloud.hpp"

using namespace tara;

namespace {

std::tuple<long, long, long> voxel_of(const Point& p, double s) {
    return {static_cast<long>(std::floor(p.x / s)), static_cast<long>(std::floor(p.y / s)),
            static_cast<long>(std::floor(p.z / s))};
}

PointCloud shuffled(PointCloud c, std::uint64_t seed) {
    Rng rng(seed);
    std::shuffle(c.points.begin(), c.points.end(), rng);
    return c;
}

PointCloud cluster(Rng& rng, Point centre, std::size_t n, double half_width) {
    std::uniform_real_distribution<double> u(-half_width, half_width);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) c.points.push_back({centre.x + u(rng), centre.y + u(rng), centre.z + u(rng)});
    return c;
}

Point centroid(const PointCloud& c) {
    Point m;
    for (const auto& p : c.points) m = {m.x + p.x, m.y + p.y, m.z + p.z};
    const double n = static_cast<double>(c.size());
    return {m.x / n, m.y / n, m.z / n};
}

double max_norm(const PointCloud& c) {
    double m = 0.0;
    for (const auto& p : c.points) m = std::max(m, std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z));
    return m;
}

}  // namespace

TEST_CASE("voxel_downsample examples") {
    CHECK(voxel_downsample({}, 0.005).empty());

    const PointCloud one{{{0.1, 0.2, 0.3}}};
    CHECK(voxel_downsample(one, 0.005) == one);

    const auto merged = voxel_downsample(PointCloud{{{0, 0, 0}, {0.002, 0, 0}}}, 0.005);
    REQUIRE(merged.size() == 1);
    CHECK(merged.points[0].x == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(merged.points[0].y == 0.0);
    CHECK(merged.points[0].z == 0.0);
}

TEST_CASE("voxel binning uses floor for negative coordinates") {
    // -0.001 and +0.001 straddle zero and must land in different cells.
    CHECK(voxel_downsample(PointCloud{{{-0.001, 0, 0}, {0.001, 0, 0}}}, 0.005).size() == 2);
    CHECK(voxel_downsample(PointCloud{{{-0.001, 0, 0}, {-0.004, 0, 0}}}, 0.005).size() == 1);
}

TEST_CASE("voxel_downsample properties on random clouds") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto cloud = oracle::random_cloud(rng, 400);
        const double s = std::uniform_real_distribution<double>(0.002, 0.03)(rng);
        const auto out = voxel_downsample(cloud, s);

        std::set<std::tuple<long, long, long>> in_cells, out_cells;
        for (const auto& p : cloud.points) in_cells.insert(voxel_of(p, s));
        for (const auto& p : out.points) out_cells.insert(voxel_of(p, s));
        CHECK(out_cells.size() == out.size());  // one point per cell
        CHECK(out.size() == in_cells.size());
        CHECK(out.size() <= cloud.size());
        CHECK(out_cells == in_cells);

        std::set<std::tuple<long, long, long>> again;
        for (const auto& p : voxel_downsample(out, s).points) again.insert(voxel_of(p, s));
        CHECK(again == out_cells);

        CHECK(oracle::sorted_points(voxel_downsample(shuffled(cloud, trial), s)) == oracle::sorted_points(out));
    }
}

TEST_CASE("roi_crop examples and bounds") {
    const PointCloud c{{{0, 0, 0.3}, {0, 0, 0.7}, {0, 0, 0.1}, {0, 0, 0.6}, {0, 0, 0.0999}}};
    const auto out = roi_crop(c, 0.1, 0.6);
    CHECK(out.points == std::vector<Point>{{0, 0, 0.3}, {0, 0, 0.1}, {0, 0, 0.6}});

    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto cloud = oracle::random_cloud(rng, 300);
        const auto kept = roi_crop(cloud, 0.3, 0.4);
        for (const auto& p : kept.points) {
            CHECK(p.z >= 0.3);
            CHECK(p.z <= 0.4);
            CHECK(std::find(cloud.points.begin(), cloud.points.end(), p) != cloud.points.end());
        }
        std::size_t expected = 0;
        for (const auto& p : cloud.points) expected += p.z >= 0.3 && p.z <= 0.4;
        CHECK(kept.size() == expected);
    }
}

TEST_CASE("largest_component examples") {
    Rng rng(3);
    const auto tight = cluster(rng, {0, 0, 0}, 50, 0.004);
    CHECK(oracle::sorted_points(largest_component(tight, 0.02)) == oracle::sorted_points(tight));

    auto big = cluster(rng, {0, 0, 0.3}, 100, 0.004);
    const auto small = cluster(rng, {0.2, 0, 0.3}, 20, 0.004);
    PointCloud both = big;
    both.points.insert(both.points.end(), small.points.begin(), small.points.end());
    CHECK(oracle::sorted_points(largest_component(shuffled(both, 1), 0.02)) == oracle::sorted_points(big));

    CHECK_THROWS_AS(largest_component({}, 0.02), EmptyCloud);
}

TEST_CASE("largest_component matches brute-force union-find") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const auto cloud = oracle::random_cloud(rng, 500);
        const double r = std::uniform_real_distribution<double>(0.005, 0.05)(rng);
        const auto got = oracle::sorted_points(largest_component(cloud, r));
        CHECK(got == oracle::brute_largest_component(cloud, r));

        // Component labels induce the same partition as the oracle.
        const auto fast = connected_components(cloud, r);
        const auto slow = oracle::brute_components(cloud, r);
        for (std::size_t i = 0; i < cloud.size(); ++i)
            for (std::size_t j = i + 1; j < cloud.size(); ++j)
                if ((fast[i] == fast[j]) != (slow[i] == slow[j])) FAIL("partition differs at ", i, ",", j);

        CHECK(oracle::sorted_points(largest_component(shuffled(cloud, trial), r)) == got);
    }
}

TEST_CASE("normalize_unit_sphere examples") {
    const auto a = normalize_unit_sphere(PointCloud{{{1, 0, 0}, {3, 0, 0}}});
    CHECK(oracle::sorted_points(a) == std::vector<Point>{{-1, 0, 0}, {1, 0, 0}});
    const PointCloud canon{{{-1, 0, 0}, {1, 0, 0}}};
    CHECK(oracle::sorted_points(normalize_unit_sphere(canon)) == canon.points);
    CHECK_THROWS_AS(normalize_unit_sphere(PointCloud{{{5, 5, 5}, {5, 5, 5}}}), DegenerateCloud);
}

TEST_CASE("normalize_unit_sphere properties") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        auto cloud = oracle::random_cloud(rng, 300);
        if (cloud.size() < 2) continue;
        const auto out = normalize_unit_sphere(cloud);
        const Point c = centroid(out);
        CHECK(std::sqrt(c.x * c.x + c.y * c.y + c.z * c.z) <= 1e-9);
        CHECK(std::abs(max_norm(out) - 1.0) <= 1e-9);

        // Distance ratios survive translation + uniform scale.
        const auto in_sorted = oracle::sorted_points(cloud);
        const auto out_sorted = oracle::sorted_points(out);
        const double d0 = std::sqrt(squared_distance(in_sorted.front(), in_sorted.back()));
        const double e0 = std::sqrt(squared_distance(out_sorted.front(), out_sorted.back()));
        for (std::size_t i = 1; i < in_sorted.size(); ++i) {
            const double d = std::sqrt(squared_distance(in_sorted[i - 1], in_sorted[i]));
            const double e = std::sqrt(squared_distance(out_sorted[i - 1], out_sorted[i]));
            if (d0 > 0 && d > 0) CHECK(std::abs((e / e0) / (d / d0) - 1.0) <= 1e-9);
        }
        CHECK(normalize_unit_sphere(shuffled(cloud, trial)) == out);
    }
}

TEST_CASE("resample_fixed examples") {
    Rng rng(31);
    const auto big = cluster(rng, {0, 0, 0}, 2000, 1.0);
    const auto sub = resample_fixed(big, 1500, 9);
    CHECK(sub.size() == 1500);
    const auto all = oracle::sorted_points(big);
    for (const auto& p : sub.points) CHECK(std::binary_search(all.begin(), all.end(), p));
    CHECK(std::set<Point>(sub.points.begin(), sub.points.end()).size() == 1500);  // without replacement

    const auto exact = cluster(rng, {0, 0, 0}, 1500, 1.0);
    CHECK(resample_fixed(exact, 1500, 9).points == oracle::sorted_points(exact));

    const auto few = cluster(rng, {0, 0, 0}, 10, 1.0);
    const auto up = resample_fixed(few, 15, 9);
    CHECK(up.size() == 15);
    const std::set<Point> distinct(up.points.begin(), up.points.end());
    const std::set<Point> original(few.points.begin(), few.points.end());
    CHECK(distinct == original);

    CHECK_THROWS_AS(resample_fixed({}, 15, 9), EmptyCloud);
}

TEST_CASE("resample_fixed is order-insensitive and seed-deterministic") {
    Rng rng(37);
    const auto cloud = cluster(rng, {0, 0, 0}, 900, 1.0);
    const auto a = resample_fixed(cloud, 500, 77);
    CHECK(resample_fixed(shuffled(cloud, 4), 500, 77) == a);
    CHECK(resample_fixed(cloud, 500, 78) != a);
    CHECK(is_sorted(a));
}

TEST_CASE("preprocess_frame examples") {
    PreprocessConfig cfg;
    Rng rng(41);
    // A dorsal-like dome inside the ROI plus a detached blob of clutter.
    PointCloud raw;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
        const double x = 0.3 * u(rng), y = 0.18 * u(rng);
        const double q = 1.0 - (x * x) / 0.09 - (y * y) / 0.0324;
        if (q < 0) continue;
        raw.points.push_back({x, y, 0.45 - 0.14 * std::sqrt(q)});
    }
    const auto clutter = cluster(rng, {0.8, 0.8, 0.5}, 200, 0.01);
    raw.points.insert(raw.points.end(), clutter.points.begin(), clutter.points.end());

    const auto out = preprocess_frame(raw, cfg, 5);
    CHECK(out.size() == 1500);
    const Point c = centroid(out);
    CHECK(std::sqrt(c.x * c.x + c.y * c.y + c.z * c.z) < 0.05);  // resampling shifts the exact centroid slightly
    CHECK(max_norm(out) <= 1.0 + 1e-12);
    CHECK(max_norm(out) >= 0.95);

    // The output is a resample of one connected component: recover the
    // chain up to normalization and check every output point belongs to it.
    const auto comp = largest_component(roi_crop(voxel_downsample(raw, cfg.voxel_size), cfg.roi_min, cfg.roi_max),
                                        cfg.component_radius);
    CHECK(oracle::brute_largest_component(comp, cfg.component_radius).size() == comp.size());
    const auto norm = oracle::sorted_points(normalize_unit_sphere(comp));
    for (const auto& p : out.points) CHECK(std::binary_search(norm.begin(), norm.end(), p));

    PointCloud far;
    for (const auto& p : raw.points) far.points.push_back({p.x, p.y, p.z + 1.0});
    try {
        preprocess_frame(far, cfg, 5);
        FAIL("expected FramePreprocessFailed");
    } catch (const FramePreprocessFailed& e) {
        CHECK(e.stage() == PreprocessStage::roi);
    }

    CHECK_THROWS_AS(preprocess_frame({}, cfg, 5), FramePreprocessFailed);
    CHECK(preprocess_frame(shuffled(raw, 8), cfg, 5) == out);
}

TEST_CASE("PreprocessConfig validation") {
    PreprocessConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.voxel_size = 0;
    CHECK_THROWS_AS(cfg.validate(), InfeasibleConfig);
    cfg = {};
    cfg.roi_max = cfg.roi_min;
    CHECK_THROWS_AS(cfg.validate(), InfeasibleConfig);
    cfg = {};
    cfg.target_points = 0;
    CHECK_THROWS_AS(cfg.validate(), InfeasibleConfig);
}

TEST_CASE("cloud file round trip and rejects") {
    Rng rng(43);
    const auto cloud = oracle::random_cloud(rng, 200);
    std::stringstream ss;
    write_cloud(ss, cloud);
    CHECK(parse_cloud(ss) == cloud);

    std::istringstream comments("# header\n1 2 3\n\n# mid\n4 5 6\n");
    CHECK(parse_cloud(comments).points == std::vector<Point>{{1, 2, 3}, {4, 5, 6}});

    std::istringstream two("1 2\n");
    CHECK_THROWS_AS(parse_cloud(two), FormatError);
    std::istringstream four("1 2 3 4\n");
    CHECK_THROWS_AS(parse_cloud(four), FormatError);
    std::istringstream nan("1 nan 3\n");
    CHECK_THROWS_AS(parse_cloud(nan), FormatError);
}
