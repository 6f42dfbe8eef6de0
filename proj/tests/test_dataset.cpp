#include <pdl/dataset.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace pdl;

namespace {

FieldSeries synthetic_series(std::size_t nx, std::size_t ny, std::size_t nz, std::size_t nt)
{
    FieldSeries s;
    s.grid = Grid3D::spanning(nx, ny, nz, 40.0, 40.0, 20.0);
    for (std::size_t k = 0; k < nt; ++k) s.times.push_back(0.03 * static_cast<double>(k + 1));
    s.values.resize(nt * s.grid.nodes());
    for (std::size_t k = 0; k < nt; ++k)
        for (std::size_t i = 0; i < nx; ++i)
            for (std::size_t j = 0; j < ny; ++j)
                for (std::size_t l = 0; l < nz; ++l)
                    s.values[s.index(k, i, j, l)] = -100.0 + static_cast<double>(i + 3 * j + 7 * l) + 0.5 * k;
    return s;
}

}  // namespace

TEST(PlaceSensors, DefaultLayoutHas2250Records)
{
    const auto s = synthetic_series(20, 20, 10, 30);
    const auto ds = place_sensors(s, 15, 5, 42);
    EXPECT_EQ(ds.records.size(), 2250u);
    std::set<std::pair<std::size_t, std::size_t>> columns;
    std::set<std::size_t> depths;
    for (const auto& r : ds.records) {
        columns.insert({r.x_idx, r.y_idx});
        depths.insert(r.z_idx);
        EXPECT_EQ(r.psi, s.at(r.t_idx, r.x_idx, r.y_idx, r.z_idx));
        const auto p = s.point(r.t_idx, r.x_idx, r.y_idx, r.z_idx);
        EXPECT_EQ(r.point.x, p.x);
        EXPECT_EQ(r.point.t, p.t);
    }
    EXPECT_EQ(columns.size(), 15u);
    EXPECT_EQ(depths, (std::set<std::size_t>{1, 3, 5, 7, 9}));
}

TEST(PlaceSensors, DepthAnchors)
{
    EXPECT_EQ(sensor_depth_indices(10, 5, DepthAnchor::surface), (std::vector<std::size_t>{9, 7, 5, 3, 1}));
    EXPECT_EQ(sensor_depth_indices(10, 5, DepthAnchor::bottom), (std::vector<std::size_t>{8, 6, 4, 2, 0}));
    EXPECT_EQ(sensor_depth_indices(9, 3, DepthAnchor::bottom), (std::vector<std::size_t>{6, 3, 0}));
    EXPECT_EQ(sensor_depth_indices(5, 5, DepthAnchor::bottom), (std::vector<std::size_t>{4, 3, 2, 1, 0}));
    EXPECT_THROW(sensor_depth_indices(10, 3), ConfigError);
}

TEST(PlaceSensors, SeedDeterminesPlacement)
{
    const auto s = synthetic_series(20, 20, 10, 2);
    const auto a = place_sensors(s, 15, 5, 7);
    const auto b = place_sensors(s, 15, 5, 7);
    const auto c = place_sensors(s, 15, 5, 8);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].x_idx, b.records[i].x_idx);
        EXPECT_EQ(a.records[i].y_idx, b.records[i].y_idx);
    }
    bool differs = false;
    for (std::size_t i = 0; i < a.records.size(); ++i)
        differs |= a.records[i].x_idx != c.records[i].x_idx || a.records[i].y_idx != c.records[i].y_idx;
    EXPECT_TRUE(differs);
}

TEST(PlaceSensors, AllColumnsWhenRequested)
{
    const auto s = synthetic_series(4, 3, 4, 2);
    const auto ds = place_sensors(s, 12, 2, 1);
    std::set<std::pair<std::size_t, std::size_t>> columns;
    for (const auto& r : ds.records) columns.insert({r.x_idx, r.y_idx});
    EXPECT_EQ(columns.size(), 12u);
    EXPECT_EQ(ds.records.size(), 12u * 2u * 2u);
}

TEST(PlaceSensors, Errors)
{
    const auto s = synthetic_series(4, 3, 4, 2);
    EXPECT_THROW(place_sensors(s, 13, 2, 1), ConfigError);
    EXPECT_THROW(place_sensors(s, 2, 3, 1), ConfigError);
}

// Columns are drawn uniformly: over many seeds every column is hit about
// equally often.
TEST(PlaceSensors, ColumnsUniform)
{
    const auto s = synthetic_series(5, 4, 2, 1);
    std::vector<int> hits(20, 0);
    const int trials = 4000;
    for (int seed = 0; seed < trials; ++seed) {
        const auto ds = place_sensors(s, 5, 1, static_cast<std::uint64_t>(seed));
        for (const auto& r : ds.records) ++hits[r.x_idx * 4 + r.y_idx];
    }
    const double expected = trials * 5.0 / 20.0;
    for (int h : hits) EXPECT_NEAR(h, expected, 5.0 * std::sqrt(expected));
}

TEST(AddNoise, ZeroSigmaIsIdentity)
{
    const auto s = synthetic_series(6, 6, 2, 3);
    const auto ds = place_sensors(s, 5, 2, 3);
    NoiseConfig cfg;
    cfg.sigma = 0.0;
    const auto out = add_noise(ds, cfg);
    for (std::size_t i = 0; i < ds.records.size(); ++i) EXPECT_EQ(out.records[i].psi, ds.records[i].psi);
}

TEST(AddNoise, SampleStdWithinThreePercent)
{
    SensorDataset ds;
    for (int i = 0; i < 10000; ++i) ds.records.push_back({0, 0, 0, 0, {}, 0.0});
    NoiseConfig cfg;
    cfg.sigma = 0.25;
    cfg.scale = NoiseScale::raw;
    cfg.seed = 9;
    const auto out = add_noise(ds, cfg);
    double mean = 0.0, sq = 0.0;
    for (const auto& r : out.records) mean += r.psi;
    mean /= 10000.0;
    for (const auto& r : out.records) sq += (r.psi - mean) * (r.psi - mean);
    const double sd = std::sqrt(sq / 9999.0);
    EXPECT_NEAR(sd, 0.25, 0.03 * 0.25);
}

TEST(AddNoise, NormalizedScaleUsesHalfRange)
{
    SensorDataset ds;
    ds.records.push_back({0, 0, 0, 0, {}, -100.0});
    ds.records.push_back({0, 0, 0, 0, {}, -10.0});
    NoiseConfig cfg;
    cfg.sigma = 0.005;
    EXPECT_DOUBLE_EQ(noise_sigma_raw(ds, cfg), 0.005 * 45.0);
    cfg.scale = NoiseScale::raw;
    EXPECT_DOUBLE_EQ(noise_sigma_raw(ds, cfg), 0.005);
}

TEST(AddNoise, SeedReproducible)
{
    const auto s = synthetic_series(6, 6, 2, 3);
    const auto ds = place_sensors(s, 5, 2, 3);
    NoiseConfig cfg;
    cfg.seed = 4;
    const auto a = add_noise(ds, cfg);
    const auto b = add_noise(ds, cfg);
    for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].psi, b.records[i].psi);
    cfg.seed = 5;
    const auto c = add_noise(ds, cfg);
    EXPECT_NE(a.records[0].psi, c.records[0].psi);
    NoiseConfig bad;
    bad.sigma = -1.0;
    EXPECT_THROW(add_noise(ds, bad), ConfigError);
}

TEST(Collocation, DistinctGridInstancesInsideBox)
{
    const auto s = synthetic_series(20, 20, 10, 30);
    const auto set = sample_collocation(s, 10000, 3);
    ASSERT_EQ(set.size(), 10000u);
    const auto box = s.box();
    std::set<std::array<double, 4>> seen;
    for (const auto& p : set) {
        EXPECT_TRUE(box.contains(p));
        seen.insert(p.as_array());
    }
    EXPECT_EQ(seen.size(), 10000u);
    const auto again = sample_collocation(s, 10000, 3);
    for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(set[i].as_array(), again[i].as_array());
}

TEST(Collocation, Errors)
{
    const auto s = synthetic_series(2, 2, 2, 2);
    EXPECT_THROW(sample_collocation(s, 17, 1), ConfigError);
    EXPECT_THROW(sample_collocation(s, 0, 1), ConfigError);
    EXPECT_EQ(sample_collocation(s, 16, 1).size(), 16u);
}

TEST(RelativeError, Identity)
{
    const auto s = synthetic_series(3, 3, 3, 2);
    const auto re = relative_error(s, s, VanGenuchtenParams{});
    EXPECT_EQ(re.psi, 0.0);
    EXPECT_EQ(re.theta, 0.0);
}

TEST(RelativeError, DoubledFieldGivesOne)
{
    const auto s = synthetic_series(3, 3, 3, 2);
    auto d = s;
    for (auto& v : d.values) v *= 2.0;
    EXPECT_NEAR(relative_error(d, s, VanGenuchtenParams{}).psi, 1.0, 1e-15);
}

// 2x2x2x2 fixture, values filled by hand; reference from a 30-digit
// evaluation (mpmath) of the same norms, theta through the default curve.
TEST(RelativeError, HandFilledFixture)
{
    FieldSeries truth;
    truth.grid = Grid3D::spanning(2, 2, 2, 1.0, 1.0, 1.0);
    truth.times = {0.5, 1.0};
    truth.values = {-10, -20, -30, -40, -50, -60, -70, -80, -15, -25, -35, -45, -55, -65, -75, -85};
    FieldSeries pred = truth;
    pred.values = {-11, -19, -30, -42, -50, -61, -69, -80, -15, -26, -33, -45, -57, -65, -75, -84};
    const auto re = relative_error(pred, truth, VanGenuchtenParams{});
    EXPECT_NEAR(re.psi, 0.020089485905472751564, 1e-15);
    EXPECT_NEAR(re.theta, 0.0098565786773335653879, 1e-14);
}

TEST(RelativeError, PermutationInvariant)
{
    std::mt19937_64 rng(3);
    std::vector<double> a(500), b(500);
    std::normal_distribution<double> n(-50.0, 10.0);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    const double before = relative_l2(a, b);
    std::vector<std::size_t> perm(500);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pa(500), pb(500);
    for (std::size_t i = 0; i < 500; ++i) {
        pa[i] = a[perm[i]];
        pb[i] = b[perm[i]];
    }
    EXPECT_EQ(relative_l2(pa, pb), before);
}

TEST(RelativeError, ShapeMismatch)
{
    const auto s = synthetic_series(3, 3, 3, 2);
    const auto t = synthetic_series(3, 3, 3, 3);
    EXPECT_THROW(relative_error(s, t, VanGenuchtenParams{}), Error);
}
