#pragma once

/// Batched loss and parameter gradient for training.
///
/// Points are processed in fixed-size chunks. Each hidden layer propagates
/// eight channels side by side in one matrix (value, d/dx, d/dy, d/dz, d/dt,
/// d2/dx2, d2/dy2, d2/dz2), so every layer is a single matrix product. The
/// per-layer activations are kept and the backward sweep runs over them in
/// reverse, mirroring the generic tape in autodiff.hpp but with the chain
/// rule written out per channel.
///
/// Chunks are reduced in order, so results are bit-reproducible for a given
/// input order.

#include <pdl/constitutive.hpp>
#include <pdl/core.hpp>
#include <pdl/dataset.hpp>
#include <pdl/network.hpp>
#include <pdl/physics.hpp>

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace pdl {

class LossKernel {
public:
    static constexpr Eigen::Index kChannels = 8;

    LossKernel(VanGenuchtenParams vgp, LossWeights weights, LossScales scales, std::size_t chunk = 256)
        : vg_(vgp), weights_(weights), scales_(scales), chunk_(chunk)
    {
    }

    [[nodiscard]] const LossWeights& weights() const { return weights_; }
    [[nodiscard]] const LossScales& scales() const { return scales_; }

    /// Weighted loss over the given sensor records and collocation points.
    /// When `grad` is non-null it receives the gradient (resized and
    /// overwritten). Either point set may be empty, in which case its term
    /// is zero.
    LossBreakdown evaluate(const NetworkParams& params, std::span<const SensorRecord* const> sensors,
                           std::span<const SpaceTimePoint* const> coll, std::vector<double>* grad)
    {
        prepare(params);
        if (grad != nullptr) {
            grad->assign(params.size(), 0.0);
            for (auto& g : grad_w_) g.setZero();
            for (auto& g : grad_b_) g.setZero();
        }
        LossBreakdown out;
        const bool want_grad = grad != nullptr;

        if (!sensors.empty()) {
            const double coef = weights_.data / static_cast<double>(sensors.size());
            double acc = 0.0;
            for (std::size_t start = 0; start < sensors.size(); start += chunk_) {
                const auto part = sensors.subspan(start, std::min(chunk_, sensors.size() - start));
                acc += data_chunk(params, part, coef, want_grad);
            }
            out.data_loss = coef * acc;
        }
        if (!coll.empty()) {
            const double coef = weights_.rre / static_cast<double>(coll.size());
            double acc = 0.0;
            for (std::size_t start = 0; start < coll.size(); start += chunk_) {
                const auto part = coll.subspan(start, std::min(chunk_, coll.size() - start));
                acc += residual_chunk(params, part, coef, want_grad);
            }
            out.rre_loss = coef * acc;
        }
        out.total = out.data_loss + out.rre_loss;
        if (!std::isfinite(out.total)) throw NumericError("training loss is not finite");
        if (want_grad) scatter_gradient(params.arch, *grad);
        return out;
    }

    /// psi_hat at many points (value channel only), in input order.
    std::vector<double> predict(const NetworkParams& params, std::span<const SpaceTimePoint> points)
    {
        prepare(params);
        std::vector<double> out(points.size());
        for (std::size_t start = 0; start < points.size(); start += chunk_) {
            const std::size_t n = std::min(chunk_, points.size() - start);
            load_inputs(params.scaling, n, [&](std::size_t i) -> const SpaceTimePoint& { return points[start + i]; },
                        false);
            forward(params, static_cast<Eigen::Index>(n), 1);
            for (std::size_t i = 0; i < n; ++i)
                out[start + i] = params.scaling.out_shift + params.scaling.out_scale * out_(0, static_cast<Eigen::Index>(i));
        }
        return out;
    }

private:
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Mat = Eigen::MatrixXd;
    using Arr = Eigen::ArrayXXd;

    void prepare(const NetworkParams& params)
    {
        const auto& arch = params.arch;
        if (params.values.size() != arch.parameter_count()) throw Error("parameter vector does not match architecture");
        const std::size_t layers = arch.layer_count();
        if (weights_mats_.size() != layers) {
            weights_mats_.assign(layers, RowMat());
            bias_.assign(layers, Eigen::VectorXd());
            grad_w_.assign(layers, Mat());
            grad_b_.assign(layers, Eigen::VectorXd());
            inputs_.assign(layers, Mat());
            pre_.assign(layers, Mat());
            act_.assign(layers, Arr());
            act1_.assign(layers, Arr());
            act2_.assign(layers, Arr());
        }
        for (std::size_t l = 0; l < layers; ++l) {
            const auto fo = static_cast<Eigen::Index>(arch.fan_out(l));
            const auto fi = static_cast<Eigen::Index>(arch.fan_in(l));
            weights_mats_[l] = Eigen::Map<const RowMat>(params.values.data() + arch.weight_offset(l), fo, fi);
            bias_[l] = Eigen::Map<const Eigen::VectorXd>(params.values.data() + arch.bias_offset(l), fo);
            if (grad_w_[l].rows() != fo || grad_w_[l].cols() != fi) {
                grad_w_[l] = Mat::Zero(fo, fi);
                grad_b_[l] = Eigen::VectorXd::Zero(fo);
            }
        }
    }

    /// Fills the first-layer input matrix. With jets, the derivative
    /// channels of the normalized inputs are the constant gains.
    template <typename Get>
    void load_inputs(const Scaling& s, std::size_t count, Get&& get, bool jets)
    {
        const auto n = static_cast<Eigen::Index>(count);
        const Eigen::Index channels = jets ? kChannels : 1;
        Mat& in = inputs_[0];
        in.setZero(4, channels * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto c = get(static_cast<std::size_t>(i)).as_array();
            for (Eigen::Index r = 0; r < 4; ++r) {
                const auto ru = static_cast<std::size_t>(r);
                in(r, i) = s.in_gain(ru) * c[ru] + s.in_offset(ru);
            }
        }
        if (jets) {
            for (Eigen::Index k = 0; k < 4; ++k)
                in.block(k, (1 + k) * n, 1, n).setConstant(s.in_gain(static_cast<std::size_t>(k)));
        }
    }

    void forward(const NetworkParams& params, Eigen::Index n, Eigen::Index channels)
    {
        const std::size_t layers = params.arch.layer_count();
        for (std::size_t l = 0; l + 1 < layers; ++l) {
            Mat& z = pre_[l];
            z.noalias() = weights_mats_[l] * inputs_[l];
            z.leftCols(n).colwise() += bias_[l];
            Arr& a = act_[l];
            Arr& a1 = act1_[l];
            Arr& a2 = act2_[l];
            a = z.leftCols(n).array().tanh();
            a1 = 1.0 - a.square();
            Mat& next = inputs_[l + 1];
            next.resize(z.rows(), channels * n);
            next.leftCols(n) = a.matrix();
            if (channels > 1) {
                a2 = -2.0 * a * a1;
                for (Eigen::Index k = 1; k <= 4; ++k)
                    next.middleCols(k * n, n) = (a1 * z.middleCols(k * n, n).array()).matrix();
                for (Eigen::Index s = 0; s < 3; ++s) {
                    const auto zd = z.middleCols((1 + s) * n, n).array();
                    next.middleCols((5 + s) * n, n) =
                        (a2 * zd.square() + a1 * z.middleCols((5 + s) * n, n).array()).matrix();
                }
            }
            if (!next.allFinite())
                throw NumericError("non-finite activation in layer " + std::to_string(l));
        }
        const std::size_t lo = layers - 1;
        out_.noalias() = weights_mats_[lo] * inputs_[lo];
        out_.leftCols(n).array() += bias_[lo](0);
        if (!out_.allFinite()) throw NumericError("non-finite activation in layer " + std::to_string(lo));
    }

    /// Backward sweep from output adjoints `adj_out_` (1 x channels*n).
    void backward(const NetworkParams& params, Eigen::Index n, Eigen::Index channels)
    {
        const std::size_t layers = params.arch.layer_count();
        const std::size_t lo = layers - 1;
        grad_w_[lo].noalias() += adj_out_ * inputs_[lo].transpose();
        grad_b_[lo](0) += adj_out_.leftCols(n).sum();
        adj_in_.noalias() = weights_mats_[lo].transpose() * adj_out_;

        for (std::size_t l = lo; l-- > 0;) {
            const Arr& a = act_[l];
            const Arr& a1 = act1_[l];
            const Mat& z = pre_[l];
            adj_pre_.resize(z.rows(), channels * n);
            if (channels == 1) {
                adj_pre_ = (adj_in_.array() * a1).matrix();
            } else {
                const Arr& a2 = act2_[l];
                const Arr a3 = a1 * (4.0 * a.square() - 2.0 * a1);
                Arr zbar = adj_in_.leftCols(n).array() * a1;
                for (Eigen::Index k = 1; k <= 4; ++k)
                    zbar += adj_in_.middleCols(k * n, n).array() * a2 * z.middleCols(k * n, n).array();
                for (Eigen::Index s = 0; s < 3; ++s) {
                    const auto sbar = adj_in_.middleCols((5 + s) * n, n).array();
                    const auto zd = z.middleCols((1 + s) * n, n).array();
                    zbar += sbar * (a3 * zd.square() + a2 * z.middleCols((5 + s) * n, n).array());
                }
                adj_pre_.leftCols(n) = zbar.matrix();
                for (Eigen::Index k = 1; k <= 4; ++k) {
                    auto col = adj_pre_.middleCols(k * n, n).array();
                    col = adj_in_.middleCols(k * n, n).array() * a1;
                    if (k <= 3)
                        col += 2.0 * adj_in_.middleCols((4 + k) * n, n).array() * a2 *
                               z.middleCols(k * n, n).array();
                }
                for (Eigen::Index s = 0; s < 3; ++s)
                    adj_pre_.middleCols((5 + s) * n, n) = (adj_in_.middleCols((5 + s) * n, n).array() * a1).matrix();
            }
            grad_w_[l].noalias() += adj_pre_ * inputs_[l].transpose();
            grad_b_[l] += adj_pre_.leftCols(n).rowwise().sum();
            if (l > 0) adj_in_.noalias() = weights_mats_[l].transpose() * adj_pre_;
        }
    }

    double data_chunk(const NetworkParams& params, std::span<const SensorRecord* const> part, double coef,
                      bool want_grad)
    {
        const auto n = static_cast<Eigen::Index>(part.size());
        load_inputs(params.scaling, part.size(), [&](std::size_t i) -> const SpaceTimePoint& { return part[i]->point; },
                    false);
        forward(params, n, 1);
        const double s = params.scaling.out_scale;
        const double inv_h = 1.0 / scales_.head;
        double acc = 0.0;
        if (want_grad) adj_out_.resize(1, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double psi = params.scaling.out_shift + s * out_(0, i);
            const double e = (psi - part[static_cast<std::size_t>(i)]->psi) * inv_h;
            acc += e * e;
            if (want_grad) adj_out_(0, i) = coef * 2.0 * e * inv_h * s;
        }
        if (want_grad) backward(params, n, 1);
        return acc;
    }

    double residual_chunk(const NetworkParams& params, std::span<const SpaceTimePoint* const> part, double coef,
                          bool want_grad)
    {
        const auto n = static_cast<Eigen::Index>(part.size());
        load_inputs(params.scaling, part.size(), [&](std::size_t i) -> const SpaceTimePoint& { return *part[i]; },
                    true);
        forward(params, n, kChannels);
        const double s = params.scaling.out_scale;
        const double inv_r = 1.0 / scales_.residual;
        double acc = 0.0;
        if (want_grad) adj_out_.resize(1, kChannels * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double psi = params.scaling.out_shift + s * out_(0, i);
            const double px = s * out_(0, n + i);
            const double py = s * out_(0, 2 * n + i);
            const double pz = s * out_(0, 3 * n + i);
            const double pt = s * out_(0, 4 * n + i);
            const double lap = s * (out_(0, 5 * n + i) + out_(0, 6 * n + i) + out_(0, 7 * n + i));
            const vg::Response c = vg::response(vg_, psi);
            const double grad_terms = px * px + py * py + pz * (pz + 1.0);
            const double r = (c.dtheta * pt - (c.dk * grad_terms + c.k * lap)) * inv_r;
            acc += r * r;
            if (!want_grad) continue;
            const double rbar = coef * 2.0 * r * inv_r * s;
            adj_out_(0, i) = rbar * (c.d2theta * pt - (c.d2k * grad_terms + c.dk * lap));
            adj_out_(0, n + i) = rbar * (-2.0 * c.dk * px);
            adj_out_(0, 2 * n + i) = rbar * (-2.0 * c.dk * py);
            adj_out_(0, 3 * n + i) = rbar * (-c.dk * (2.0 * pz + 1.0));
            adj_out_(0, 4 * n + i) = rbar * c.dtheta;
            adj_out_(0, 5 * n + i) = -rbar * c.k;
            adj_out_(0, 6 * n + i) = -rbar * c.k;
            adj_out_(0, 7 * n + i) = -rbar * c.k;
        }
        if (want_grad) backward(params, n, kChannels);
        return acc;
    }

    void scatter_gradient(const Architecture& arch, std::vector<double>& grad) const
    {
        for (std::size_t l = 0; l < arch.layer_count(); ++l) {
            Eigen::Map<RowMat>(grad.data() + arch.weight_offset(l), grad_w_[l].rows(), grad_w_[l].cols()) = grad_w_[l];
            Eigen::Map<Eigen::VectorXd>(grad.data() + arch.bias_offset(l), grad_b_[l].size()) = grad_b_[l];
        }
    }

    VanGenuchtenParams vg_;
    LossWeights weights_;
    LossScales scales_;
    std::size_t chunk_;

    std::vector<RowMat> weights_mats_;
    std::vector<Eigen::VectorXd> bias_;
    std::vector<Mat> grad_w_;
    std::vector<Eigen::VectorXd> grad_b_;
    std::vector<Mat> inputs_;  // layer inputs, all channels
    std::vector<Mat> pre_;     // pre-activations, all channels
    std::vector<Arr> act_;     // tanh(z) on the value channel
    std::vector<Arr> act1_;    // tanh'
    std::vector<Arr> act2_;    // tanh''
    Mat out_;
    Mat adj_out_;
    Mat adj_in_;
    Mat adj_pre_;
};

}  // namespace pdl
