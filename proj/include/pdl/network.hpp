#pragma once

/// Fully-connected tanh network psi_hat(x, y, z, t).
///
/// Parameters are stored as one flat vector. Layer l (0-based, hidden layers
/// first, output layer last) occupies a contiguous block: the weight matrix
/// in row-major order (out x in) followed by the bias vector (out).
///
/// Inputs are mapped affinely from the domain box to [-1, 1]^4 before the
/// first layer; the scalar network output o is mapped to head units as
/// psi = shift + scale * o.

#include <pdl/autodiff.hpp>
#include <pdl/core.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pdl {

enum class Activation { tanh };

struct Architecture {
    static constexpr std::size_t input_dim = 4;
    std::size_t hidden_layers = 5;
    std::size_t hidden_width = 10;
    Activation activation = Activation::tanh;

    void validate() const
    {
        if (hidden_layers < 1) throw ConfigError("network needs at least one hidden layer");
        if (hidden_width < 1) throw ConfigError("hidden width must be >= 1");
    }

    [[nodiscard]] std::size_t layer_count() const { return hidden_layers + 1; }
    [[nodiscard]] std::size_t fan_in(std::size_t layer) const { return layer == 0 ? input_dim : hidden_width; }
    [[nodiscard]] std::size_t fan_out(std::size_t layer) const
    {
        return layer + 1 == layer_count() ? 1 : hidden_width;
    }
    /// Offset of the weight block of `layer` in the flat vector.
    [[nodiscard]] std::size_t weight_offset(std::size_t layer) const
    {
        std::size_t off = 0;
        for (std::size_t l = 0; l < layer; ++l) off += fan_out(l) * (fan_in(l) + 1);
        return off;
    }
    [[nodiscard]] std::size_t bias_offset(std::size_t layer) const
    {
        return weight_offset(layer) + fan_out(layer) * fan_in(layer);
    }
    [[nodiscard]] std::size_t parameter_count() const { return weight_offset(layer_count()); }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Affine maps around the network: box -> [-1, 1]^4 on the way in,
/// o -> shift + scale * o on the way out.
struct Scaling {
    DomainBox box;
    double out_shift = 0.0;
    double out_scale = 1.0;

    [[nodiscard]] double in_gain(std::size_t i) const { return 2.0 / (box.hi[i] - box.lo[i]); }
    [[nodiscard]] double in_offset(std::size_t i) const
    {
        return -(box.hi[i] + box.lo[i]) / (box.hi[i] - box.lo[i]);
    }

    /// Output map from sensor heads: mean and half-range.
    static Scaling calibrated(const DomainBox& box, std::span<const double> heads);
};

struct NetworkParams {
    Architecture arch;
    Scaling scaling;
    std::uint64_t seed = 0;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] bool finite() const
    {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Glorot-uniform weights, zero biases.
inline NetworkParams init(const Architecture& arch, std::uint64_t seed, const Scaling& scaling = {})
{
    arch.validate();
    NetworkParams p;
    p.arch = arch;
    p.scaling = scaling;
    p.seed = seed;
    p.values.assign(arch.parameter_count(), 0.0);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        const double fi = static_cast<double>(arch.fan_in(l));
        const double fo = static_cast<double>(arch.fan_out(l));
        const double limit = std::sqrt(6.0 / (fi + fo));
        std::uniform_real_distribution<double> dist(-limit, limit);
        const std::size_t off = arch.weight_offset(l);
        for (std::size_t i = 0; i < arch.fan_out(l) * arch.fan_in(l); ++i) p.values[off + i] = dist(rng);
    }
    return p;
}

inline Scaling Scaling::calibrated(const DomainBox& box, std::span<const double> heads)
{
    if (heads.empty()) throw ConfigError("cannot calibrate output scaling from zero heads");
    double lo = heads[0];
    double hi = heads[0];
    for (double h : heads) {
        lo = std::min(lo, h);
        hi = std::max(hi, h);
    }
    Scaling s;
    s.box = box;
    s.out_shift = pairwise_sum(heads) / static_cast<double>(heads.size());
    s.out_scale = hi > lo ? 0.5 * (hi - lo) : 1.0;
    return s;
}

/// Forward pass over a generic input scalar `T` and parameter scalar `W`.
/// `on_layer(l, span)` sees each layer's activations; used for diagnostics.
template <typename T, typename W, typename OnLayer>
T forward_generic(const Architecture& arch, std::span<const W> theta, const Scaling& scaling,
                  const std::array<T, 4>& input, OnLayer&& on_layer)
{
    using std::tanh;
    std::vector<T> act(Architecture::input_dim);
    for (std::size_t i = 0; i < Architecture::input_dim; ++i)
        act[i] = input[i] * W(scaling.in_gain(i)) + W(scaling.in_offset(i));

    std::vector<T> next;
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        const std::size_t fi = arch.fan_in(l);
        const std::size_t fo = arch.fan_out(l);
        const W* w = theta.data() + arch.weight_offset(l);
        const W* b = theta.data() + arch.bias_offset(l);
        next.assign(fo, T{});
        for (std::size_t r = 0; r < fo; ++r) {
            T acc = T(b[r]);
            for (std::size_t c = 0; c < fi; ++c) acc = acc + act[c] * w[r * fi + c];
            next[r] = (l + 1 == arch.layer_count()) ? acc : T(tanh(acc));
        }
        act.swap(next);
        on_layer(l, std::span<const T>(act));
    }
    return act[0] * W(scaling.out_scale) + W(scaling.out_shift);
}

template <typename T, typename W>
T forward_generic(const Architecture& arch, std::span<const W> theta, const Scaling& scaling,
                  const std::array<T, 4>& input)
{
    return forward_generic(arch, theta, scaling, input, [](std::size_t, std::span<const T>) {});
}

inline void require_finite_input(const SpaceTimePoint& p)
{
    if (!p.finite()) throw NumericError("network input point is not finite");
}

inline double forward(const NetworkParams& params, const SpaceTimePoint& p)
{
    require_finite_input(p);
    auto check = [](std::size_t layer, std::span<const double> a) {
        for (double v : a)
            if (!std::isfinite(v)) throw NumericError("non-finite activation in layer " + std::to_string(layer));
    };
    return forward_generic<double, double>(params.arch, params.values, params.scaling, p.as_array(), check);
}

/// psi_hat with first derivatives in (x, y, z, t) and pure second
/// derivatives in (x, y, z); one forward-mode pass per input direction.
inline InputJet eval_jet(const NetworkParams& params, const SpaceTimePoint& p)
{
    using J = Jet2<double>;
    require_finite_input(p);
    const auto c = p.as_array();
    InputJet out;
    for (std::size_t dir = 0; dir < 4; ++dir) {
        std::array<J, 4> in{J(c[0]), J(c[1]), J(c[2]), J(c[3])};
        in[dir] = J::variable(c[dir]);
        auto check = [](std::size_t layer, std::span<const J> a) {
            for (const J& v : a)
                if (!std::isfinite(v.v) || !std::isfinite(v.d) || !std::isfinite(v.dd))
                    throw NumericError("non-finite jet in layer " + std::to_string(layer));
        };
        const J r = forward_generic<J, double>(params.arch, params.values, params.scaling, in, check);
        out.value = r.v;
        out.d1[dir] = r.d;
        if (dir < 3) out.d2_diag[dir] = r.dd;
    }
    return out;
}

/// Adapts a parameter set into a FieldEvaluator.
class NetworkField {
public:
    explicit NetworkField(const NetworkParams& params) : params_(&params) {}
    [[nodiscard]] double value(const SpaceTimePoint& p) const { return forward(*params_, p); }
    [[nodiscard]] InputJet jet(const SpaceTimePoint& p) const { return eval_jet(*params_, p); }

private:
    const NetworkParams* params_;
};

/// Jet over a `Var` parameter vector; records onto the parameters' tape.
template <typename W>
struct GenericJet {
    W value;
    std::array<W, 4> d1;
    std::array<W, 3> d2_diag;
};

template <typename W>
GenericJet<W> eval_jet_generic(const Architecture& arch, const Scaling& scaling, std::span<const W> theta,
                               const SpaceTimePoint& p)
{
    using J = Jet2<W>;
    const auto c = p.as_array();
    GenericJet<W> out;
    for (std::size_t dir = 0; dir < 4; ++dir) {
        std::array<J, 4> in{J(W(c[0])), J(W(c[1])), J(W(c[2])), J(W(c[3]))};
        in[dir] = J::variable(W(c[dir]));
        const J r = forward_generic<J, W>(arch, theta, scaling, in);
        out.value = r.v;
        out.d1[dir] = r.d;
        if (dir < 3) out.d2_diag[dir] = r.dd;
    }
    return out;
}

}  // namespace pdl
