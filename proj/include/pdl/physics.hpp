#pragma once

/// Richards-equation residual on a differentiable field, and the losses
/// built from it:
///
///   r = theta'(psi) psi_t
///       - [ K'(psi) (psi_x^2 + psi_y^2 + psi_z (psi_z + 1)) + K(psi) (psi_xx + psi_yy + psi_zz) ]
///
///   data loss = mean over sensors of ((psi_hat - psi_m) / head_scale)^2
///   rre loss  = mean over collocation points of (r / residual_scale)^2
///   total     = w_data * data loss + w_rre * rre loss
///
/// With unit scales and weights these are the plain mean-squared errors.

#include <pdl/autodiff.hpp>
#include <pdl/constitutive.hpp>
#include <pdl/core.hpp>
#include <pdl/dataset.hpp>
#include <pdl/network.hpp>

#include <array>
#include <span>
#include <vector>

namespace pdl {

struct LossWeights {
    double data = 1.0;
    double rre = 1.0;
};

/// Divisors applied to the data misfit and to the residual before squaring.
struct LossScales {
    double head = 1.0;
    double residual = 1.0;
};

/// Weighted loss terms; total == data_loss + rre_loss.
struct LossBreakdown {
    double data_loss = 0.0;
    double rre_loss = 0.0;
    double total = 0.0;
};

template <typename S>
S residual_from_derivatives(const VanGenuchtenParams& vgp, const S& psi, const std::array<S, 4>& d1,
                            const std::array<S, 3>& d2)
{
    const S dtheta = vg::dtheta_dpsi(vgp, psi);
    const S cond = vg::k(vgp, psi);
    const S dcond = vg::dk_dpsi(vgp, psi);
    const S grad_terms = d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * (d1[2] + 1.0);
    const S laplacian = d2[0] + d2[1] + d2[2];
    return dtheta * d1[3] - (dcond * grad_terms + cond * laplacian);
}

inline double residual_from_jet(const VanGenuchtenParams& vgp, const InputJet& jet)
{
    if (!jet.finite()) throw NumericError("residual: non-finite field jet");
    return residual_from_derivatives<double>(vgp, jet.value, jet.d1, jet.d2_diag);
}

template <FieldEvaluator F>
double residual(const F& field, const VanGenuchtenParams& vgp, const SpaceTimePoint& p)
{
    return residual_from_jet(vgp, field.jet(p));
}

template <FieldEvaluator F>
double data_loss(const F& field, const SensorDataset& sensors, const LossScales& scales = {})
{
    if (sensors.empty()) throw Error("data loss: sensor dataset is empty");
    std::vector<double> sq;
    sq.reserve(sensors.size());
    for (const auto& r : sensors.records) {
        const double e = (field.value(r.point) - r.psi) / scales.head;
        sq.push_back(e * e);
    }
    return canonical_mean(std::move(sq));
}

template <FieldEvaluator F>
double rre_loss(const F& field, const VanGenuchtenParams& vgp, const CollocationSet& coll,
                const LossScales& scales = {})
{
    if (coll.empty()) throw Error("rre loss: collocation set is empty");
    std::vector<double> sq;
    sq.reserve(coll.size());
    for (const auto& p : coll) {
        const double r = residual(field, vgp, p) / scales.residual;
        sq.push_back(r * r);
    }
    return canonical_mean(std::move(sq));
}

template <FieldEvaluator F>
LossBreakdown total_loss(const F& field, const VanGenuchtenParams& vgp, const SensorDataset& sensors,
                         const CollocationSet& coll, const LossWeights& weights = {},
                         const LossScales& scales = {})
{
    LossBreakdown b;
    b.data_loss = weights.data * data_loss(field, sensors, scales);
    b.rre_loss = weights.rre * rre_loss(field, vgp, coll, scales);
    b.total = b.data_loss + b.rre_loss;
    return b;
}

/// The full loss written against a generic parameter scalar, so it can be
/// recorded on a tape (W = Var) or evaluated directly (W = double). Sums run
/// in index order.
template <typename W>
W pdl_loss_generic(const Architecture& arch, const Scaling& scaling, std::span<const W> theta,
                   const VanGenuchtenParams& vgp, std::span<const SensorRecord> sensors,
                   std::span<const SpaceTimePoint> coll, const LossWeights& weights = {},
                   const LossScales& scales = {})
{
    W data(0.0);
    for (const auto& r : sensors) {
        const auto c = r.point.as_array();
        const std::array<W, 4> in{W(c[0]), W(c[1]), W(c[2]), W(c[3])};
        const W e = (forward_generic<W, W>(arch, theta, scaling, in) - r.psi) / scales.head;
        data = data + e * e;
    }
    W rre(0.0);
    for (const auto& p : coll) {
        const auto jet = eval_jet_generic<W>(arch, scaling, theta, p);
        const W r = residual_from_derivatives<W>(vgp, jet.value, jet.d1, jet.d2_diag) / scales.residual;
        rre = rre + r * r;
    }
    W total(0.0);
    if (!sensors.empty()) total = total + data * (weights.data / static_cast<double>(sensors.size()));
    if (!coll.empty()) total = total + rre * (weights.rre / static_cast<double>(coll.size()));
    return total;
}

}  // namespace pdl
