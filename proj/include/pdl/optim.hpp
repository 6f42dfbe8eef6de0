#pragma once

/// First-order optimizers over a flat parameter vector, and the batching
/// schedule that feeds them.

#include <pdl/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdl {

enum class OptimizerKind { gd, rmsprop, adam };

inline std::string_view to_string(OptimizerKind k)
{
    switch (k) {
    case OptimizerKind::gd: return "gd";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
    }
    return "?";
}

inline OptimizerKind parse_optimizer(std::string_view s)
{
    if (s == "gd") return OptimizerKind::gd;
    if (s == "rmsprop") return OptimizerKind::rmsprop;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected gd, rmsprop or adam)");
}

/// Default learning rate per optimizer kind.
inline double default_learning_rate(OptimizerKind k) { return k == OptimizerKind::gd ? 1e-2 : 1e-3; }

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double eta = 1e-3;
    double beta = 0.9;    // RMSProp decay
    double beta1 = 0.9;   // Adam first moment
    double beta2 = 0.999; // Adam second moment
    double epsilon = 1e-8;
    std::optional<std::size_t> batch_size;  // nullopt: full batch

    static OptimizerConfig defaults(OptimizerKind k)
    {
        OptimizerConfig c;
        c.kind = k;
        c.eta = default_learning_rate(k);
        return c;
    }

    void validate() const
    {
        if (!(eta > 0.0)) throw ConfigError("learning rate must be > 0");
        auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
        if (!in_unit(beta) || !in_unit(beta1) || !in_unit(beta2)) throw ConfigError("decay rates must lie in (0, 1)");
        if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
        if (batch_size && *batch_size == 0) throw ConfigError("batch size must be >= 1");
    }
};

struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<double> sq_avg;  // RMSProp E[g^2]
    std::vector<double> m;       // Adam first moment
    std::vector<double> v;       // Adam second moment

    static OptimizerState zeros(std::size_t n)
    {
        return {0, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    }
};

namespace detail {
inline void require_finite_gradient(std::span<const double> params, std::span<const double> grad)
{
    if (params.size() != grad.size()) throw Error("gradient size does not match parameters");
    for (double g : grad)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient entry; step rejected");
}
inline void require_state(const OptimizerState& s, std::size_t n)
{
    if (s.sq_avg.size() != n || s.m.size() != n || s.v.size() != n)
        throw Error("optimizer state does not match parameter count");
}
}  // namespace detail

/// params <- params - eta * grad
inline void gd_step(std::span<double> params, std::span<const double> grad, const OptimizerConfig& cfg)
{
    detail::require_finite_gradient(params, grad);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.eta * grad[i];
}

/// E[g^2] <- beta E[g^2] + (1 - beta) g^2;
/// params <- params - eta g / max(sqrt(E[g^2]), epsilon)
inline void rmsprop_step(OptimizerState& state, std::span<double> params, std::span<const double> grad,
                         const OptimizerConfig& cfg)
{
    detail::require_finite_gradient(params, grad);
    detail::require_state(state, params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.sq_avg[i] = cfg.beta * state.sq_avg[i] + (1.0 - cfg.beta) * g * g;
        params[i] -= cfg.eta * g / std::max(std::sqrt(state.sq_avg[i]), cfg.epsilon);
    }
    ++state.step;
}

/// Adam with bias-corrected moments.
inline void adam_step(OptimizerState& state, std::span<double> params, std::span<const double> grad,
                      const OptimizerConfig& cfg)
{
    detail::require_finite_gradient(params, grad);
    detail::require_state(state, params.size());
    const double t = static_cast<double>(state.step + 1);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= cfg.eta * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    ++state.step;
}

/// Dispatches on the configured kind and owns the state.
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, std::size_t n) : cfg_(cfg), state_(OptimizerState::zeros(n)) { cfg_.validate(); }

    void step(std::span<double> params, std::span<const double> grad)
    {
        switch (cfg_.kind) {
        case OptimizerKind::gd:
            gd_step(params, grad, cfg_);
            ++state_.step;
            break;
        case OptimizerKind::rmsprop: rmsprop_step(state_, params, grad, cfg_); break;
        case OptimizerKind::adam: adam_step(state_, params, grad, cfg_); break;
        }
    }

    [[nodiscard]] const OptimizerState& state() const { return state_; }
    [[nodiscard]] const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    OptimizerState state_;
};

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

/// How collocation points are assigned to mini-batches.
enum class CollocationBatching {
    proportional,  // each batch draws ceil(N_f * |batch| / N_m) points
    all,           // every step uses every collocation point
};

struct Batch {
    std::vector<std::size_t> sensors;
    std::vector<std::size_t> collocation;
};

inline std::mt19937_64 epoch_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

/// Seeded partition of sensor indices into chunks of `batch_size` (the last
/// one may be short), each paired with collocation indices. A full-batch
/// config yields one batch holding everything in natural order.
inline std::vector<Batch> make_batches(std::size_t n_sensors, std::size_t n_coll, const OptimizerConfig& cfg,
                                       std::uint64_t seed, std::uint64_t epoch,
                                       CollocationBatching mode = CollocationBatching::proportional)
{
    if (cfg.batch_size && *cfg.batch_size == 0) throw ConfigError("batch size must be >= 1");
    std::vector<std::size_t> sensor_ids(n_sensors);
    std::iota(sensor_ids.begin(), sensor_ids.end(), std::size_t{0});
    std::vector<std::size_t> coll_ids(n_coll);
    std::iota(coll_ids.begin(), coll_ids.end(), std::size_t{0});

    if (!cfg.batch_size || *cfg.batch_size >= n_sensors) {
        return {Batch{std::move(sensor_ids), std::move(coll_ids)}};
    }
    const std::size_t bs = *cfg.batch_size;
    auto rng_s = epoch_rng(seed, epoch, 1);
    std::shuffle(sensor_ids.begin(), sensor_ids.end(), rng_s);
    auto rng_c = epoch_rng(seed, epoch, 2);
    std::shuffle(coll_ids.begin(), coll_ids.end(), rng_c);

    std::vector<Batch> batches;
    std::size_t cursor = 0;
    for (std::size_t start = 0; start < n_sensors; start += bs) {
        Batch b;
        const std::size_t len = std::min(bs, n_sensors - start);
        b.sensors.assign(sensor_ids.begin() + static_cast<std::ptrdiff_t>(start),
                         sensor_ids.begin() + static_cast<std::ptrdiff_t>(start + len));
        if (mode == CollocationBatching::all) {
            b.collocation.resize(n_coll);
            std::iota(b.collocation.begin(), b.collocation.end(), std::size_t{0});
        } else if (n_coll > 0) {
            const std::size_t want = std::min(n_coll, (n_coll * len + n_sensors - 1) / n_sensors);
            b.collocation.reserve(want);
            for (std::size_t k = 0; k < want; ++k) b.collocation.push_back(coll_ids[(cursor + k) % n_coll]);
            cursor = (cursor + want) % n_coll;
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

}  // namespace pdl
