#pragma once

/// Ground-truth generator: mass-conservative implicit finite-difference
/// solver for the mixed-form Richards equation
///
///   d theta(psi) / dt = div( K(psi) grad(psi + z) )
///
/// on a node-centred structured grid. Each node owns a control volume
/// (half cells on the boundary), neighbours exchange flux through the shared
/// face with the harmonic mean of their conductivities. Time stepping is
/// backward Euler; each step is linearised with the modified Picard scheme
/// (Celia et al.), which keeps the discrete water balance exact up to the
/// Picard tolerance.

#include <pdl/constitutive.hpp>
#include <pdl/core.hpp>
#include <pdl/grid.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace pdl {

enum class Face { x_min, x_max, y_min, y_max, z_min, z_max };

struct FaceCondition {
    enum class Kind { no_flux, dirichlet };
    Kind kind = Kind::no_flux;
    double psi = 0.0;

    static FaceCondition no_flux() { return {}; }
    static FaceCondition dirichlet(double value) { return {Kind::dirichlet, value}; }
};

struct BoundaryConditions {
    /// Indexed by Face.
    std::array<FaceCondition, 6> faces{};
    /// Initial head at (x, y, z); Dirichlet nodes start at their face value.
    std::function<double(double, double, double)> initial = [](double, double, double) { return -100.0; };
    std::string initial_description = "uniform -100";
    /// Test hook: drops the z term from grad(psi + z).
    bool gravity = true;

    FaceCondition& operator[](Face f) { return faces[static_cast<std::size_t>(f)]; }
    const FaceCondition& operator[](Face f) const { return faces[static_cast<std::size_t>(f)]; }

    static BoundaryConditions uniform_initial(double psi0)
    {
        BoundaryConditions bc;
        bc.initial = [psi0](double, double, double) { return psi0; };
        std::ostringstream os;
        os.precision(17);
        os << "uniform " << psi0;
        bc.initial_description = os.str();
        return bc;
    }

    /// Wetting from the surface: top Dirichlet, bottom Dirichlet, lateral
    /// faces closed.
    static BoundaryConditions infiltration(double psi0, double top, double bottom)
    {
        BoundaryConditions bc = uniform_initial(psi0);
        bc[Face::z_max] = FaceCondition::dirichlet(top);
        bc[Face::z_min] = FaceCondition::dirichlet(bottom);
        return bc;
    }

    [[nodiscard]] std::string describe() const
    {
        static constexpr std::array<const char*, 6> names{"x_min", "x_max", "y_min", "y_max", "z_min", "z_max"};
        std::ostringstream os;
        os.precision(17);
        for (std::size_t f = 0; f < 6; ++f) {
            os << names[f] << '=';
            if (faces[f].kind == FaceCondition::Kind::dirichlet)
                os << "dirichlet(" << faces[f].psi << ')';
            else
                os << "no_flux";
            os << ';';
        }
        os << "initial=" << initial_description << ";gravity=" << (gravity ? "on" : "off");
        return os.str();
    }
};

struct SolverOptions {
    double t_end = 0.9;                 // hours
    std::size_t n_saves = 30;
    std::size_t substeps_per_save = 10; // backward-Euler steps between saves
    double picard_tol = 1e-6;           // max |delta psi| in head units
    std::size_t max_picard = 100;

    [[nodiscard]] double dt() const { return t_end / static_cast<double>(n_saves * substeps_per_save); }

    void validate() const
    {
        if (!(t_end > 0.0)) throw ConfigError("solver t_end must be > 0");
        if (n_saves == 0 || substeps_per_save == 0) throw ConfigError("solver needs at least one save and one substep");
        if (!(picard_tol > 0.0)) throw ConfigError("picard tolerance must be > 0");
        if (max_picard == 0) throw ConfigError("max picard iterations must be >= 1");
    }
};

namespace detail {

/// Geometry shared by the solver and the balance check.
class ControlVolumes {
public:
    explicit ControlVolumes(const Grid3D& g) : g_(g) {}

    [[nodiscard]] double wx(std::size_t i) const { return half(i, g_.nx) * g_.dx; }
    [[nodiscard]] double wy(std::size_t j) const { return half(j, g_.ny) * g_.dy; }
    [[nodiscard]] double wz(std::size_t l) const { return half(l, g_.nz) * g_.dz; }
    [[nodiscard]] double volume(std::size_t i, std::size_t j, std::size_t l) const { return wx(i) * wy(j) * wz(l); }

    [[nodiscard]] double storage(std::span<const double> psi, const VanGenuchtenParams& vgp) const
    {
        std::vector<double> terms;
        terms.reserve(g_.nodes());
        for (std::size_t i = 0; i < g_.nx; ++i)
            for (std::size_t j = 0; j < g_.ny; ++j)
                for (std::size_t l = 0; l < g_.nz; ++l)
                    terms.push_back(volume(i, j, l) * vg::theta(vgp, psi[g_.index(i, j, l)]));
        return pairwise_sum(terms);
    }

private:
    static double half(std::size_t i, std::size_t n) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; }
    Grid3D g_;
};

struct Link {
    std::size_t p;
    std::size_t q;
    double area_over_dist;
    double dz;  // z_q - z_p
};

}  // namespace detail

/// Runs the solver and returns the saved snapshots. Save k holds the field
/// at t = (k + 1) t_end / n_saves.
inline FieldSeries solve(const Grid3D& grid, const VanGenuchtenParams& vgp, const BoundaryConditions& bc,
                         const SolverOptions& opt = {})
{
    grid.validate();
    vgp.validate();
    opt.validate();

    const std::size_t nn = grid.nodes();
    const detail::ControlVolumes cv(grid);

    // Dirichlet value per node, if any. Dirichlet faces win on shared edges.
    std::vector<char> fixed(nn, 0);
    std::vector<double> psi(nn);
    for (std::size_t i = 0; i < grid.nx; ++i) {
        for (std::size_t j = 0; j < grid.ny; ++j) {
            for (std::size_t l = 0; l < grid.nz; ++l) {
                const std::size_t id = grid.index(i, j, l);
                psi[id] = bc.initial(grid.x(i), grid.y(j), grid.z(l));
                auto apply = [&](bool on_face, Face f) {
                    if (on_face && bc[f].kind == FaceCondition::Kind::dirichlet) {
                        fixed[id] = 1;
                        psi[id] = bc[f].psi;
                    }
                };
                apply(i == 0, Face::x_min);
                apply(i + 1 == grid.nx, Face::x_max);
                apply(j == 0, Face::y_min);
                apply(j + 1 == grid.ny, Face::y_max);
                apply(l == 0, Face::z_min);
                apply(l + 1 == grid.nz, Face::z_max);
                if (!std::isfinite(psi[id])) throw NumericError("initial condition is not finite");
            }
        }
    }

    std::vector<std::ptrdiff_t> unknown(nn, -1);
    std::vector<std::size_t> free_nodes;
    for (std::size_t id = 0; id < nn; ++id) {
        if (!fixed[id]) {
            unknown[id] = static_cast<std::ptrdiff_t>(free_nodes.size());
            free_nodes.push_back(id);
        }
    }

    std::vector<double> volume(nn);
    std::vector<detail::Link> links;
    const double gscale = bc.gravity ? 1.0 : 0.0;
    for (std::size_t i = 0; i < grid.nx; ++i) {
        for (std::size_t j = 0; j < grid.ny; ++j) {
            for (std::size_t l = 0; l < grid.nz; ++l) {
                const std::size_t id = grid.index(i, j, l);
                volume[id] = cv.volume(i, j, l);
                if (i + 1 < grid.nx)
                    links.push_back({id, grid.index(i + 1, j, l), cv.wy(j) * cv.wz(l) / grid.dx, 0.0});
                if (j + 1 < grid.ny)
                    links.push_back({id, grid.index(i, j + 1, l), cv.wx(i) * cv.wz(l) / grid.dy, 0.0});
                if (l + 1 < grid.nz)
                    links.push_back({id, grid.index(i, j, l + 1), cv.wx(i) * cv.wy(j) / grid.dz, gscale * grid.dz});
            }
        }
    }

    FieldSeries out;
    out.grid = grid;
    out.vg = vgp;
    out.bc_description = bc.describe();
    out.ledger.initial_storage = cv.storage(psi, vgp);
    out.values.reserve(nn * opt.n_saves);

    const auto n_free = static_cast<Eigen::Index>(free_nodes.size());
    Eigen::SparseMatrix<double> a(n_free, n_free);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    bool analysed = false;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs(n_free);

    const double dt = opt.dt();
    std::vector<double> theta_old(nn), theta_m(nn), cap(nn), cond(nn), link_t(links.size());
    std::vector<double> psi_m = psi;

    std::size_t step = 0;
    for (std::size_t save = 0; save < opt.n_saves; ++save) {
        double inflow = 0.0;
        for (std::size_t sub = 0; sub < opt.substeps_per_save; ++sub, ++step) {
            for (std::size_t id = 0; id < nn; ++id) theta_old[id] = vg::theta(vgp, psi[id]);
            psi_m = psi;
            bool converged = false;
            for (std::size_t it = 0; it < opt.max_picard; ++it) {
                for (std::size_t id = 0; id < nn; ++id) {
                    theta_m[id] = vg::theta(vgp, psi_m[id]);
                    cap[id] = vg::dtheta_dpsi(vgp, psi_m[id]);
                    cond[id] = vg::k(vgp, psi_m[id]);
                }
                trip.clear();
                rhs.setZero();
                for (std::size_t f = 0; f < free_nodes.size(); ++f) {
                    const std::size_t id = free_nodes[f];
                    const double s = volume[id] / dt;
                    trip.emplace_back(f, f, s * cap[id]);
                    rhs(static_cast<Eigen::Index>(f)) += s * (cap[id] * psi_m[id] - (theta_m[id] - theta_old[id]));
                }
                for (std::size_t e = 0; e < links.size(); ++e) {
                    const auto& lk = links[e];
                    const double kp = cond[lk.p];
                    const double kq = cond[lk.q];
                    const double t = lk.area_over_dist * (2.0 * kp * kq / (kp + kq));
                    link_t[e] = t;
                    const auto up = unknown[lk.p];
                    const auto uq = unknown[lk.q];
                    // Flux p -> q: t (psi_p - psi_q - dz); contributes to both balances.
                    if (up >= 0) {
                        trip.emplace_back(up, up, t);
                        rhs(up) += t * lk.dz;
                        if (uq >= 0)
                            trip.emplace_back(up, uq, -t);
                        else
                            rhs(up) += t * psi[lk.q];
                    }
                    if (uq >= 0) {
                        trip.emplace_back(uq, uq, t);
                        rhs(uq) -= t * lk.dz;
                        if (up >= 0)
                            trip.emplace_back(uq, up, -t);
                        else
                            rhs(uq) += t * psi[lk.p];
                    }
                }
                a.setFromTriplets(trip.begin(), trip.end());
                if (!analysed) {
                    ldlt.analyzePattern(a);
                    analysed = true;
                }
                ldlt.factorize(a);
                if (ldlt.info() != Eigen::Success)
                    throw NumericError("linear solve failed at time step " + std::to_string(step + 1));
                const Eigen::VectorXd x = ldlt.solve(rhs);

                double delta = 0.0;
                for (std::size_t f = 0; f < free_nodes.size(); ++f) {
                    const double v = x(static_cast<Eigen::Index>(f));
                    if (!std::isfinite(v))
                        throw NumericError("non-finite head at time step " + std::to_string(step + 1));
                    const std::size_t id = free_nodes[f];
                    delta = std::max(delta, std::abs(v - psi_m[id]));
                    psi_m[id] = v;
                }
                if (delta < opt.picard_tol) {
                    converged = true;
                    break;
                }
            }
            if (!converged)
                throw ConvergenceError("Picard iteration did not converge within " + std::to_string(opt.max_picard) +
                                       " iterations at time step " + std::to_string(step + 1));

            // Boundary inflow over this step with the conductivities of the
            // final linear solve.
            for (std::size_t e = 0; e < links.size(); ++e) {
                const auto& lk = links[e];
                const bool fp = fixed[lk.p] != 0;
                const bool fq = fixed[lk.q] != 0;
                if (fp == fq) continue;
                const double flux_pq = link_t[e] * (psi_m[lk.p] - psi_m[lk.q] - lk.dz);
                inflow += dt * (fp ? flux_pq : -flux_pq);
            }
            psi.swap(psi_m);
        }
        out.times.push_back(static_cast<double>(save + 1) * opt.t_end / static_cast<double>(opt.n_saves));
        out.values.insert(out.values.end(), psi.begin(), psi.end());
        out.ledger.interval_inflow.push_back(inflow);
    }
    out.validate();
    return out;
}

struct MassBalance {
    std::vector<double> interval_relative;  // per save interval, relative to that interval's inflow
    double cumulative_absolute = 0.0;       // |storage change - inflow| over the whole run
    double cumulative_relative = 0.0;       // ... relative to the total inflow
    double storage_relative = 0.0;          // ... relative to the initial storage
    double total_inflow = 0.0;
};

/// Water balance of a solver run, from the saved snapshots and the inflow
/// ledger the solver recorded.
inline MassBalance mass_balance(const FieldSeries& series, const VanGenuchtenParams& vgp)
{
    constexpr double tiny = 1e-300;
    const detail::ControlVolumes cv(series.grid);
    if (series.ledger.interval_inflow.size() != series.time_steps())
        throw Error("field series carries no inflow ledger for every save");
    MassBalance mb;
    double prev = series.ledger.initial_storage;
    for (std::size_t k = 0; k < series.time_steps(); ++k) {
        const double s = cv.storage(series.snapshot(k), vgp);
        const double in = series.ledger.interval_inflow[k];
        mb.interval_relative.push_back(std::abs((s - prev) - in) / std::max(std::abs(in), tiny));
        mb.total_inflow += in;
        prev = s;
    }
    const double change = prev - series.ledger.initial_storage;
    mb.cumulative_absolute = std::abs(change - mb.total_inflow);
    mb.cumulative_relative = mb.cumulative_absolute / std::max(std::abs(mb.total_inflow), tiny);
    mb.storage_relative = mb.cumulative_absolute / std::max(std::abs(series.ledger.initial_storage), tiny);
    return mb;
}

}  // namespace pdl
