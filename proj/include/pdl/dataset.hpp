#pragma once

/// Sensor placement, measurement noise, collocation sampling and the
/// relative-error metrics used to score predictions.

#include <pdl/constitutive.hpp>
#include <pdl/core.hpp>
#include <pdl/grid.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace pdl {

struct SensorRecord {
    std::size_t x_idx = 0;
    std::size_t y_idx = 0;
    std::size_t z_idx = 0;
    std::size_t t_idx = 0;
    SpaceTimePoint point;
    double psi = 0.0;
};

struct SensorDataset {
    std::vector<SensorRecord> records;

    [[nodiscard]] std::size_t size() const { return records.size(); }
    [[nodiscard]] bool empty() const { return records.empty(); }
    [[nodiscard]] std::vector<double> heads() const
    {
        std::vector<double> h;
        h.reserve(records.size());
        for (const auto& r : records) h.push_back(r.psi);
        return h;
    }
};

/// How NoiseConfig::sigma is interpreted.
enum class NoiseScale {
    normalized,  // sigma is relative to the half-range of the clean sensor heads
    raw,         // sigma is in head units
};

struct NoiseConfig {
    double sigma = 0.005;
    NoiseScale scale = NoiseScale::normalized;
    std::uint64_t seed = 0;
};

using CollocationSet = std::vector<SpaceTimePoint>;

/// Which end of the column the evenly spaced sensor depths start from.
enum class DepthAnchor { surface, bottom };

/// Depth indices of `n_depths` sensors evenly spaced along the column,
/// listed from the surface down.
inline std::vector<std::size_t> sensor_depth_indices(std::size_t nz, std::size_t n_depths,
                                                     DepthAnchor anchor = DepthAnchor::surface)
{
    if (n_depths == 0 || n_depths > nz || nz % n_depths != 0)
        throw ConfigError(std::to_string(n_depths) + " sensor depths cannot be evenly placed in " +
                          std::to_string(nz) + " z-nodes");
    const std::size_t stride = nz / n_depths;
    std::vector<std::size_t> idx;
    const std::size_t top = anchor == DepthAnchor::surface ? nz - 1 : nz - 1 - (stride - 1);
    for (std::size_t d = 0; d < n_depths; ++d) idx.push_back(top - d * stride);
    return idx;
}

/// Picks `n_xy` distinct (x, y) node columns uniformly without replacement
/// and records every save time at `n_depths` evenly spaced depths.
/// Records are ordered column, depth, time.
inline SensorDataset place_sensors(const FieldSeries& series, std::size_t n_xy, std::size_t n_depths,
                                   std::uint64_t seed, DepthAnchor anchor = DepthAnchor::surface)
{
    const Grid3D& g = series.grid;
    const std::size_t columns = g.nx * g.ny;
    if (n_xy > columns)
        throw ConfigError("cannot place " + std::to_string(n_xy) + " sensor columns on a " + std::to_string(g.nx) +
                          "x" + std::to_string(g.ny) + " plane");
    const auto depths = sensor_depth_indices(g.nz, n_depths, anchor);

    std::vector<std::size_t> cols(columns);
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first n_xy entries are a uniform sample.
    for (std::size_t i = 0; i < n_xy; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, columns - 1);
        std::swap(cols[i], cols[pick(rng)]);
    }
    cols.resize(n_xy);
    std::sort(cols.begin(), cols.end());

    SensorDataset ds;
    ds.records.reserve(n_xy * depths.size() * series.time_steps());
    for (std::size_t c : cols) {
        const std::size_t i = c / g.ny;
        const std::size_t j = c % g.ny;
        for (std::size_t l : depths) {
            for (std::size_t k = 0; k < series.time_steps(); ++k) {
                ds.records.push_back({i, j, l, k, series.point(k, i, j, l), series.at(k, i, j, l)});
            }
        }
    }
    return ds;
}

/// Standard deviation in head units that `cfg` implies for `ds`.
inline double noise_sigma_raw(const SensorDataset& ds, const NoiseConfig& cfg)
{
    if (cfg.scale == NoiseScale::raw || ds.empty()) return cfg.sigma;
    const auto [lo, hi] = std::minmax_element(ds.records.begin(), ds.records.end(),
                                              [](const auto& a, const auto& b) { return a.psi < b.psi; });
    const double half_range = 0.5 * (hi->psi - lo->psi);
    return cfg.sigma * (half_range > 0.0 ? half_range : 1.0);
}

/// i.i.d. Gaussian perturbation of every record, seeded.
inline SensorDataset add_noise(const SensorDataset& ds, const NoiseConfig& cfg)
{
    if (!(cfg.sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
    SensorDataset out = ds;
    if (cfg.sigma == 0.0) return out;
    const double sigma = noise_sigma_raw(ds, cfg);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& r : out.records) r.psi += noise(rng);
    return out;
}

/// N_f distinct (node, save time) instances, uniformly without replacement.
inline CollocationSet sample_collocation(const FieldSeries& series, std::size_t n_f, std::uint64_t seed)
{
    const Grid3D& g = series.grid;
    const std::size_t total = g.nodes() * series.time_steps();
    if (n_f == 0) throw ConfigError("collocation set must not be empty");
    if (n_f > total)
        throw ConfigError("requested " + std::to_string(n_f) + " collocation points from only " +
                          std::to_string(total) + " space-time instances");
    std::vector<std::size_t> ids(total);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n_f; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, total - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(n_f);
    std::sort(ids.begin(), ids.end());

    CollocationSet set;
    set.reserve(n_f);
    for (std::size_t id : ids) {
        const std::size_t k = id / g.nodes();
        std::size_t rest = id % g.nodes();
        const std::size_t l = rest % g.nz;
        rest /= g.nz;
        const std::size_t j = rest % g.ny;
        const std::size_t i = rest / g.ny;
        set.push_back(series.point(k, i, j, l));
    }
    return set;
}

struct RelativeErrors {
    double psi = 0.0;
    double theta = 0.0;
};

/// ||a - b||_2 / ||b||_2 over paired entries.
inline double relative_l2(std::span<const double> pred, std::span<const double> truth)
{
    if (pred.size() != truth.size()) throw Error("relative error: size mismatch");
    std::vector<double> diff(pred.size());
    std::vector<double> ref(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        diff[i] = d * d;
        ref[i] = truth[i] * truth[i];
    }
    const double den = canonical_sum(std::move(ref));
    if (!(den > 0.0)) throw Error("relative error: reference field has zero norm");
    return std::sqrt(canonical_sum(std::move(diff)) / den);
}

/// re_psi and re_theta over the whole space-time grid. theta comes from
/// mapping both fields through the water-retention curve.
inline RelativeErrors relative_error(const FieldSeries& pred, const FieldSeries& truth,
                                     const VanGenuchtenParams& vg)
{
    if (!(pred.grid == truth.grid) || pred.times.size() != truth.times.size() ||
        pred.values.size() != truth.values.size())
        throw Error("relative error: field shapes differ");
    RelativeErrors re;
    re.psi = relative_l2(pred.values, truth.values);
    std::vector<double> tp(pred.values.size());
    std::vector<double> tt(truth.values.size());
    for (std::size_t i = 0; i < tp.size(); ++i) {
        tp[i] = vg::theta(vg, pred.values[i]);
        tt[i] = vg::theta(vg, truth.values[i]);
    }
    re.theta = relative_l2(tp, tt);
    return re;
}

}  // namespace pdl
