#pragma once

/// Differentiation engine.
///
/// Two independent mechanisms live here:
///   - `Jet2<T>`: forward-mode truncated Taylor number carrying a value,
///     one directional first derivative and the matching pure second
///     derivative. Input derivatives of a field are obtained with one pass
///     per input direction.
///   - `Tape` / `Var`: reverse accumulation over a recorded program, used to
///     differentiate a scalar loss with respect to every network parameter.
///
/// Both are templates-friendly: code written against a generic scalar `S`
/// works for `double`, `Var`, `Jet2<double>` and `Jet2<Var>`.

#include <pdl/core.hpp>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

namespace pdl {

// ---------------------------------------------------------------------------
// Reverse mode
// ---------------------------------------------------------------------------

/// Linear record of elementary operations. Each node stores at most two
/// parents with their local partial derivatives.
class Tape {
public:
    struct Node {
        std::int64_t lhs;
        std::int64_t rhs;
        double d_lhs;
        double d_rhs;
    };

    std::int64_t push(std::int64_t lhs, double d_lhs, std::int64_t rhs, double d_rhs)
    {
        nodes_.push_back({lhs, rhs, d_lhs, d_rhs});
        return static_cast<std::int64_t>(nodes_.size()) - 1;
    }

    std::int64_t new_leaf() { return push(-1, 0.0, -1, 0.0); }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

    /// Adjoints of every node for a seed of 1 at `output`.
    [[nodiscard]] std::vector<double> adjoints(std::int64_t output) const
    {
        std::vector<double> adj(nodes_.size(), 0.0);
        if (output < 0) return adj;
        adj[static_cast<std::size_t>(output)] = 1.0;
        for (std::int64_t i = output; i >= 0; --i) {
            const double a = adj[static_cast<std::size_t>(i)];
            if (a == 0.0) continue;
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.lhs >= 0) adj[static_cast<std::size_t>(n.lhs)] += a * n.d_lhs;
            if (n.rhs >= 0) adj[static_cast<std::size_t>(n.rhs)] += a * n.d_rhs;
        }
        return adj;
    }

private:
    std::vector<Node> nodes_;
};

/// Scalar recorded on a `Tape`. A `Var` without a tape is a constant.
class Var {
public:
    Var() = default;
    Var(double value) : value_(value) {}  // NOLINT(google-explicit-constructor)
    Var(Tape* tape, std::int64_t index, double value) : tape_(tape), index_(index), value_(value) {}

    [[nodiscard]] double value() const { return value_; }
    [[nodiscard]] std::int64_t index() const { return index_; }
    [[nodiscard]] Tape* tape() const { return tape_; }
    [[nodiscard]] bool is_constant() const { return tape_ == nullptr; }

    Var& operator+=(const Var& o) { return *this = *this + o; }
    Var& operator-=(const Var& o) { return *this = *this - o; }
    Var& operator*=(const Var& o) { return *this = *this * o; }
    Var& operator/=(const Var& o) { return *this = *this / o; }

    friend Var unary(const Var& a, double value, double partial)
    {
        if (a.is_constant()) return Var(value);
        return {a.tape_, a.tape_->push(a.index_, partial, -1, 0.0), value};
    }

    friend Var binary(const Var& a, const Var& b, double value, double da, double db)
    {
        if (a.is_constant() && b.is_constant()) return Var(value);
        if (a.is_constant()) return {b.tape_, b.tape_->push(b.index_, db, -1, 0.0), value};
        if (b.is_constant()) return {a.tape_, a.tape_->push(a.index_, da, -1, 0.0), value};
        return {a.tape_, a.tape_->push(a.index_, da, b.index_, db), value};
    }

    friend Var operator+(const Var& a, const Var& b) { return binary(a, b, a.value_ + b.value_, 1.0, 1.0); }
    friend Var operator-(const Var& a, const Var& b) { return binary(a, b, a.value_ - b.value_, 1.0, -1.0); }
    friend Var operator*(const Var& a, const Var& b)
    {
        return binary(a, b, a.value_ * b.value_, b.value_, a.value_);
    }
    friend Var operator/(const Var& a, const Var& b)
    {
        const double q = a.value_ / b.value_;
        return binary(a, b, q, 1.0 / b.value_, -q / b.value_);
    }
    friend Var operator-(const Var& a) { return unary(a, -a.value_, -1.0); }

    friend bool operator<(const Var& a, const Var& b) { return a.value_ < b.value_; }
    friend bool operator>(const Var& a, const Var& b) { return a.value_ > b.value_; }
    friend bool operator<=(const Var& a, const Var& b) { return a.value_ <= b.value_; }
    friend bool operator>=(const Var& a, const Var& b) { return a.value_ >= b.value_; }

    friend Var tanh(const Var& a)
    {
        const double t = std::tanh(a.value_);
        return unary(a, t, 1.0 - t * t);
    }
    friend Var exp(const Var& a)
    {
        const double e = std::exp(a.value_);
        return unary(a, e, e);
    }
    friend Var log(const Var& a) { return unary(a, std::log(a.value_), 1.0 / a.value_); }
    friend Var sqrt(const Var& a)
    {
        const double s = std::sqrt(a.value_);
        return unary(a, s, 0.5 / s);
    }
    friend Var sin(const Var& a) { return unary(a, std::sin(a.value_), std::cos(a.value_)); }
    friend Var cos(const Var& a) { return unary(a, std::cos(a.value_), -std::sin(a.value_)); }
    friend Var abs(const Var& a) { return unary(a, std::abs(a.value_), a.value_ < 0.0 ? -1.0 : 1.0); }
    friend Var pow(const Var& a, double p)
    {
        const double v = std::pow(a.value_, p);
        return unary(a, v, p * std::pow(a.value_, p - 1.0));
    }
    friend bool isfinite(const Var& a) { return std::isfinite(a.value_); }

private:
    Tape* tape_ = nullptr;
    std::int64_t index_ = -1;
    double value_ = 0.0;
};

// ---------------------------------------------------------------------------
// Forward mode
// ---------------------------------------------------------------------------

/// Second-order truncated Taylor number along one direction:
/// f(x + h e) = v + d h + dd h^2 / 2 + O(h^3).
template <typename T>
struct Jet2 {
    T v{};
    T d{};
    T dd{};

    Jet2() = default;
    Jet2(T value) : v(std::move(value)) {}  // NOLINT(google-explicit-constructor)
    Jet2(T value, T first, T second) : v(std::move(value)), d(std::move(first)), dd(std::move(second)) {}

    /// Independent variable seeded along its own direction.
    static Jet2 variable(T value) { return {std::move(value), T(1.0), T(0.0)}; }

    Jet2& operator+=(const Jet2& o) { return *this = *this + o; }
    Jet2& operator-=(const Jet2& o) { return *this = *this - o; }
    Jet2& operator*=(const Jet2& o) { return *this = *this * o; }
    Jet2& operator/=(const Jet2& o) { return *this = *this / o; }
};

template <typename T>
struct is_jet2 : std::false_type {};
template <typename T>
struct is_jet2<Jet2<T>> : std::true_type {};

/// Chain rule for a unary function with derivatives f1, f2 at a.v.
template <typename T>
Jet2<T> chain(const Jet2<T>& a, T f0, const T& f1, const T& f2)
{
    return {std::move(f0), f1 * a.d, f2 * a.d * a.d + f1 * a.dd};
}

template <typename T>
Jet2<T> operator+(const Jet2<T>& a, const Jet2<T>& b)
{
    return {a.v + b.v, a.d + b.d, a.dd + b.dd};
}
template <typename T>
Jet2<T> operator-(const Jet2<T>& a, const Jet2<T>& b)
{
    return {a.v - b.v, a.d - b.d, a.dd - b.dd};
}
template <typename T>
Jet2<T> operator-(const Jet2<T>& a)
{
    return {-a.v, -a.d, -a.dd};
}
template <typename T>
Jet2<T> operator*(const Jet2<T>& a, const Jet2<T>& b)
{
    return {a.v * b.v, a.d * b.v + a.v * b.d, a.dd * b.v + T(2.0) * a.d * b.d + a.v * b.dd};
}
template <typename T>
Jet2<T> operator/(const Jet2<T>& a, const Jet2<T>& b)
{
    const T inv = T(1.0) / b.v;
    const T inv2 = inv * inv;
    const Jet2<T> r = chain(b, inv, -inv2, T(2.0) * inv2 * inv);
    return a * r;
}

// Mixed jet/scalar arithmetic; the scalar side converts to T.
template <typename T>
Jet2<T> operator+(const Jet2<T>& a, const std::type_identity_t<T>& b)
{
    return {a.v + b, a.d, a.dd};
}
template <typename T>
Jet2<T> operator+(const std::type_identity_t<T>& a, const Jet2<T>& b)
{
    return b + a;
}
template <typename T>
Jet2<T> operator-(const Jet2<T>& a, const std::type_identity_t<T>& b)
{
    return {a.v - b, a.d, a.dd};
}
template <typename T>
Jet2<T> operator-(const std::type_identity_t<T>& a, const Jet2<T>& b)
{
    return {a - b.v, -b.d, -b.dd};
}
template <typename T>
Jet2<T> operator*(const Jet2<T>& a, const std::type_identity_t<T>& b)
{
    return {a.v * b, a.d * b, a.dd * b};
}
template <typename T>
Jet2<T> operator*(const std::type_identity_t<T>& a, const Jet2<T>& b)
{
    return b * a;
}
template <typename T>
Jet2<T> operator/(const Jet2<T>& a, const std::type_identity_t<T>& b)
{
    const T inv = T(1.0) / b;
    return a * inv;
}
template <typename T>
Jet2<T> operator/(const std::type_identity_t<T>& a, const Jet2<T>& b)
{
    return Jet2<T>(a) / b;
}

template <typename T>
bool operator<(const Jet2<T>& a, const Jet2<T>& b)
{
    return a.v < b.v;
}
template <typename T>
bool operator>(const Jet2<T>& a, const Jet2<T>& b)
{
    return a.v > b.v;
}

template <typename T>
Jet2<T> tanh(const Jet2<T>& a)
{
    using std::tanh;
    T t = tanh(a.v);
    const T f1 = T(1.0) - t * t;
    const T f2 = T(-2.0) * t * f1;
    return chain(a, std::move(t), f1, f2);
}
template <typename T>
Jet2<T> exp(const Jet2<T>& a)
{
    using std::exp;
    const T e = exp(a.v);
    return chain(a, e, e, e);
}
template <typename T>
Jet2<T> log(const Jet2<T>& a)
{
    using std::log;
    const T inv = T(1.0) / a.v;
    return chain(a, log(a.v), inv, -inv * inv);
}
template <typename T>
Jet2<T> sqrt(const Jet2<T>& a)
{
    using std::sqrt;
    const T s = sqrt(a.v);
    const T f1 = T(0.5) / s;
    return chain(a, s, f1, T(-0.5) * f1 / a.v);
}
template <typename T>
Jet2<T> sin(const Jet2<T>& a)
{
    using std::cos;
    using std::sin;
    const T s = sin(a.v);
    return chain(a, s, cos(a.v), -s);
}
template <typename T>
Jet2<T> cos(const Jet2<T>& a)
{
    using std::cos;
    using std::sin;
    const T c = cos(a.v);
    return chain(a, c, -sin(a.v), -c);
}
template <typename T>
Jet2<T> pow(const Jet2<T>& a, double p)
{
    using std::pow;
    const T f1 = p * pow(a.v, p - 1.0);
    const T f2 = p * (p - 1.0) * pow(a.v, p - 2.0);
    return chain(a, pow(a.v, p), f1, f2);
}
template <typename T>
Jet2<T> abs(const Jet2<T>& a)
{
    return value_of(a) < 0.0 ? -a : a;
}

// ---------------------------------------------------------------------------
// Generic scalar helpers
// ---------------------------------------------------------------------------

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }
template <typename T>
double value_of(const Jet2<T>& x)
{
    return value_of(x.v);
}

template <typename S>
concept Scalar = requires(S a, S b) {
    { a + b } -> std::convertible_to<S>;
    { a * b } -> std::convertible_to<S>;
    { value_of(a) } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Field given as a generic callable f(std::array<S, 4>) -> S over (x, y, z, t).
/// Wraps it into something that produces an InputJet.
template <typename F>
class AnalyticField {
public:
    explicit AnalyticField(F f) : f_(std::move(f)) {}

    [[nodiscard]] double value(const SpaceTimePoint& p) const
    {
        return f_(std::array<double, 4>{p.x, p.y, p.z, p.t});
    }

    [[nodiscard]] InputJet jet(const SpaceTimePoint& p) const
    {
        using J = Jet2<double>;
        const auto c = p.as_array();
        InputJet out;
        for (std::size_t dir = 0; dir < 4; ++dir) {
            std::array<J, 4> in{J(c[0]), J(c[1]), J(c[2]), J(c[3])};
            in[dir] = J::variable(c[dir]);
            const J r = f_(in);
            out.value = r.v;
            out.d1[dir] = r.d;
            if (dir < 3) out.d2_diag[dir] = r.dd;
        }
        if (!out.finite()) throw NumericError("analytic field produced a non-finite jet");
        return out;
    }

private:
    F f_;
};

/// Anything the residual and loss operations can consume.
template <typename F>
concept FieldEvaluator = requires(const F& f, const SpaceTimePoint& p) {
    { f.value(p) } -> std::convertible_to<double>;
    { f.jet(p) } -> std::convertible_to<InputJet>;
};

struct ValueAndGradient {
    double value = 0.0;
    std::vector<double> gradient;
};

/// Reverse-accumulated value and gradient of `loss(params)` where `loss`
/// maps `const std::vector<Var>&` to `Var`.
template <typename F>
    requires std::invocable<F&, const std::vector<Var>&>
ValueAndGradient value_and_grad(F&& loss, std::span<const double> params)
{
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (double p : params) vars.emplace_back(&tape, tape.new_leaf(), p);

    const Var out = loss(vars);
    ValueAndGradient r;
    r.value = out.value();
    if (!std::isfinite(r.value)) throw NumericError("loss evaluated to a non-finite value");
    r.gradient.assign(params.size(), 0.0);
    if (out.is_constant()) return r;
    const auto adj = tape.adjoints(out.index());
    for (std::size_t i = 0; i < vars.size(); ++i) r.gradient[i] = adj[static_cast<std::size_t>(vars[i].index())];
    return r;
}

template <typename F>
    requires std::invocable<F&, const std::vector<Var>&>
std::vector<double> grad_params(F&& loss, std::span<const double> params)
{
    return value_and_grad(std::forward<F>(loss), params).gradient;
}

}  // namespace pdl
