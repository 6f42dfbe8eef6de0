// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--out DIR] [--jobs N] [--skip-long]
//
// Criteria 6 and 7 train the default and smoke profiles end to end and
// take about half an hour on one core; --skip-long reports them as SKIP.

#include "support.hpp"

#include <pdl/config.hpp>
#include <pdl/harness.hpp>
#include <pdl/physics.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <random>

using namespace pdl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [failed]");
    }
};

std::string num(double v, const char* f = "%.3g")
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_err(double a, double b, double floor) { return std::abs(a - b) / std::max(std::abs(b), floor); }

Verdict differentiation()
{
    Verdict v;
    std::mt19937_64 rng(2024);
    double worst1 = 0.0, worst2 = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto net = pdl::testing::random_network(1000 + static_cast<std::uint64_t>(trial));
        const auto p = pdl::testing::random_point(rng);
        const auto jet = eval_jet(net, p);
        auto f = [&](const SpaceTimePoint& q) { return forward(net, q); };
        for (std::size_t dir = 0; dir < 4; ++dir) {
            const double half = 0.5 * (net.scaling.box.hi[dir] - net.scaling.box.lo[dir]);
            worst1 = std::max(worst1, rel_err(jet.d1[dir], pdl::testing::fd_first(f, p, dir, 1e-4 * half), 1e-3));
            if (dir < 3)
                worst2 = std::max(worst2,
                                  rel_err(jet.d2_diag[dir], pdl::testing::fd_second(f, p, dir, 1e-2 * half), 1e-3));
        }
    }
    v.require(worst1 <= 1e-5, "first derivatives max rel " + num(worst1));
    v.require(worst2 <= 1e-4, "second derivatives max rel " + num(worst2));

    const auto net = pdl::testing::random_network(42);
    const VanGenuchtenParams vgp;
    std::vector<SensorRecord> sensors(2);
    for (auto& s : sensors) {
        s.point = pdl::testing::random_point(rng);
        s.psi = -40.0 + 10.0 * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    }
    std::vector<SpaceTimePoint> coll(4);
    for (auto& c : coll) c = pdl::testing::random_point(rng);
    const auto tape = value_and_grad(
        [&](const std::vector<Var>& th) { return pdl_loss_generic<Var>(net.arch, net.scaling, th, vgp, sensors, coll); },
        net.values);
    auto loss = [&](const std::vector<double>& th) {
        return pdl_loss_generic<double>(net.arch, net.scaling, th, vgp, sensors, coll);
    };
    std::vector<double> th = net.values;
    double worst = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(th[i]));
        const double saved = th[i];
        th[i] = saved + h;
        const double up = loss(th);
        th[i] = saved - h;
        const double dn = loss(th);
        th[i] = saved;
        worst = std::max(worst, rel_err(tape.gradient[i], (up - dn) / (2.0 * h), 1e-6 * std::abs(tape.value)));
    }
    v.require(worst <= 1e-4, "parameter gradient max rel " + num(worst) + " over " + std::to_string(th.size()));
    return v;
}

Verdict constitutive()
{
    Verdict v;
    const VanGenuchtenParams p;
    v.require(vg::theta(p, 0.0) == p.theta_s && vg::k(p, 0.0) == p.k_s, "theta(0) = theta_s, K(0) = K_s exactly");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1000.0, 0.0);
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        bad += vg::theta(p, a) > vg::theta(p, b) || vg::k(p, a) > vg::k(p, b);
    }
    v.require(bad == 0, "monotone on 1000 random pairs (" + std::to_string(bad) + " violations)");
    std::uniform_real_distribution<double> w(-500.0, -0.1);
    double worst = 0.0;
    auto fd = [](auto&& f, double x) {
        const double h = 1e-4 * std::max(1.0, std::abs(x));
        const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        const double d2 = (f(x + h / 2) - f(x - h / 2)) / h;
        return (4.0 * d2 - d1) / 3.0;
    };
    for (int i = 0; i < 100; ++i) {
        const double psi = w(rng);
        worst = std::max(worst, rel_err(vg::dtheta_dpsi(p, psi), fd([&](double x) { return vg::theta(p, x); }, psi), 1e-14));
        worst = std::max(worst, rel_err(vg::dk_dpsi(p, psi), fd([&](double x) { return vg::k(p, x); }, psi), 1e-14));
    }
    v.require(worst <= 1e-6, "analytic derivatives max rel " + num(worst));
    return v;
}

Verdict residual_check()
{
    Verdict v;
    const VanGenuchtenParams p;
    std::mt19937_64 rng(1);
    AnalyticField hydro([](const auto& c) { return -c[2]; });
    AnalyticField constant([](const auto& c) { return c[0] * 0.0 - 37.5; });
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto q = pdl::testing::random_point(rng);
        worst = std::max({worst, std::abs(residual(hydro, p, q)), std::abs(residual(constant, p, q))});
    }
    v.require(worst < 1e-10, "hydrostatic and constant |r| max " + num(worst));

    const double a = 3.0, b = 0.2;
    AnalyticField manufactured([a, b](const auto& c) {
        using std::sin;
        return -c[2] + sin(c[0] * b) * a;
    });
    double worst_rel = 0.0;
    for (int i = 0; i < 20; ++i) {
        SpaceTimePoint q = pdl::testing::random_point(rng);
        q.z = 5.0 + std::fmod(q.z, 15.0);
        const double psi = -q.z + a * std::sin(b * q.x);
        const double expected = -vg::dk_dpsi(p, psi) * a * a * b * b * std::cos(b * q.x) * std::cos(b * q.x) +
                                vg::k(p, psi) * a * b * b * std::sin(b * q.x);
        worst_rel = std::max(worst_rel, rel_err(residual(manufactured, p, q), expected, 1e-14));
    }
    v.require(worst_rel <= 1e-8, "manufactured field max rel " + num(worst_rel) + " at 20 points");
    return v;
}

Verdict optimizer_algebra()
{
    Verdict v;
    OptimizerConfig cfg = OptimizerConfig::defaults(OptimizerKind::adam);
    cfg.eta = 0.1;
    const double gs[3] = {1.0, 1.0, -1.0};
    double m = 0, s = 0, theta = 0.5;
    auto st = OptimizerState::zeros(1);
    std::vector<double> p{0.5};
    double worst = 0.0;
    for (int t = 1; t <= 3; ++t) {
        const double g = gs[t - 1];
        m = 0.9 * m + 0.1 * g;
        s = 0.999 * s + 0.001 * g * g;
        theta -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(s / (1 - std::pow(0.999, t))) + 1e-8);
        adam_step(st, p, std::vector<double>{g}, cfg);
        worst = std::max(worst, std::abs(p[0] - theta));
    }
    v.require(worst <= 1e-12, "Adam three-step trajectory max diff " + num(worst));

    double worst_rms = 0.0;
    for (double g : {2.5, -0.004, 17.0}) {
        auto rs = OptimizerState::zeros(1);
        std::vector<double> q{0.0};
        rmsprop_step(rs, q, std::vector<double>{g}, OptimizerConfig::defaults(OptimizerKind::rmsprop));
        worst_rms = std::max(worst_rms, std::abs(q[0] - (-1e-3 * (g > 0 ? 1.0 : -1.0) / std::sqrt(0.1))));
    }
    v.require(worst_rms <= 1e-12, "RMSProp cold start max diff " + num(worst_rms));

    // |m_hat| / sqrt(v_hat) <= 1 at the first step and for any stream of
    // equal-magnitude gradients; in general it is bounded by
    // (1 - b1) / sqrt(1 - b2).
    const auto def = OptimizerConfig::defaults(OptimizerKind::adam);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    double ratio_first = 0.0, ratio_sign = 0.0, ratio_any = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        auto a1 = OptimizerState::zeros(1), a2 = OptimizerState::zeros(1), a3 = OptimizerState::zeros(1);
        const double mag = std::exp(4.0 * n(rng));
        for (int step = 0; step < 300; ++step) {
            std::vector<double> x1{0.0}, x2{0.0}, x3{0.0};
            const double g_any = n(rng) * std::exp(3.0 * n(rng));
            const double g_sign = n(rng) > 0 ? mag : -mag;
            if (step == 0) {
                adam_step(a1, x1, std::vector<double>{g_any}, def);
                ratio_first = std::max(ratio_first, std::abs(x1[0]) / def.eta);
            }
            adam_step(a2, x2, std::vector<double>{g_sign}, def);
            adam_step(a3, x3, std::vector<double>{g_any}, def);
            ratio_sign = std::max(ratio_sign, std::abs(x2[0]) / def.eta);
            ratio_any = std::max(ratio_any, std::abs(x3[0]) / def.eta);
        }
    }
    const double general = (1 - def.beta1) / std::sqrt(1 - def.beta2);
    v.require(ratio_first <= 1 + 1e-9, "first step |dtheta|/eta max " + num(ratio_first, "%.9f"));
    v.require(ratio_sign <= 1 + 1e-9, "equal-magnitude stream |dtheta|/eta max " + num(ratio_sign, "%.9f"));
    v.require(ratio_any <= general * (1 + 1e-9),
              "heavy-tailed stream |dtheta|/eta max " + num(ratio_any, "%.4f") + " <= " + num(general, "%.4f"));
    return v;
}

Verdict oracle_physics()
{
    Verdict v;
    const VanGenuchtenParams p;
    {
        const Grid3D g = Grid3D::spanning(6, 5, 8, 10.0, 10.0, 20.0);
        BoundaryConditions bc;
        bc.initial = [](double, double, double z) { return -z; };
        SolverOptions opt;
        opt.n_saves = 5;
        const auto s = solve(g, p, bc, opt);
        double worst = 0.0;
        for (std::size_t k = 0; k < s.time_steps(); ++k)
            for (std::size_t i = 0; i < g.nx; ++i)
                for (std::size_t j = 0; j < g.ny; ++j)
                    for (std::size_t l = 0; l < g.nz; ++l) worst = std::max(worst, std::abs(s.at(k, i, j, l) + g.z(l)));
        v.require(worst < 1e-8, "hydrostatic drift " + num(worst));
    }
    {
        const Grid3D g = Grid3D::spanning(8, 6, 10, 16.0, 12.0, 20.0);
        BoundaryConditions bc;
        bc.initial = [](double x, double, double z) { return -100.0 + 85.0 * std::exp(-0.1 * (20.0 - z)) * (x < 8.0); };
        const auto mb = mass_balance(solve(g, p, bc, SolverOptions{}), p);
        v.require(mb.storage_relative < 1e-8, "closed-system storage change " + num(mb.storage_relative));
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        const auto s = solve(Grid3D{}, p, BoundaryConditions::infiltration(-100.0, -10.0, -100.0), SolverOptions{});
        const double secs = seconds_since(t0);
        const auto mb = mass_balance(s, p);
        v.require(mb.cumulative_relative < 1e-6, "default run cumulative balance " + num(mb.cumulative_relative));
        v.require(secs < 120.0, "default run " + num(secs, "%.1f") + " s");
    }
    {
        const Grid3D g = Grid3D::spanning(3, 3, 10, 40.0, 40.0, 20.0);
        std::vector<std::vector<double>> finals;
        for (std::size_t sub : {320u, 640u, 1280u}) {
            SolverOptions opt;
            opt.t_end = 0.03;
            opt.n_saves = 1;
            opt.substeps_per_save = sub;
            opt.picard_tol = 1e-10;
            const auto s = solve(g, p, BoundaryConditions::infiltration(-100.0, -10.0, -100.0), opt);
            const auto snap = s.snapshot(0);
            finals.emplace_back(snap.begin(), snap.end());
        }
        auto l2 = [](const std::vector<double>& a, const std::vector<double>& b) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
            return std::sqrt(s);
        };
        const double order = std::log2(l2(finals[0], finals[1]) / l2(finals[1], finals[2]));
        v.require(order >= 0.95, "time-refinement order " + num(order, "%.3f"));
    }
    return v;
}

struct ProfileRun {
    std::map<std::string, RunReport> reports;
    std::vector<std::string> errors;
    double seconds = 0.0;
};

ProfileRun run_profile(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs)
{
    const auto t0 = std::chrono::steady_clock::now();
    fs::remove_all(out);
    const auto data = generate(cfg);
    write_generated(out, data);
    const auto prob = make_problem(cfg, load_generated(out));
    ProfileRun r;
    for (const auto& o : run_experiment(cfg, prob, out, jobs, [](const RunOutcome& o) {
             if (o.report)
                 std::fprintf(stderr, "  %-13s total %.4e  re_psi %.4f  re_theta %.4f\n", o.spec.id().c_str(),
                              o.report->final_loss.total, o.report->re.psi, o.report->re.theta);
         })) {
        if (o.report)
            r.reports[o.spec.id()] = *o.report;
        else
            r.errors.push_back(o.error);
    }
    r.seconds = seconds_since(t0);
    return r;
}

Verdict end_to_end(const fs::path& out, std::size_t jobs, const ProfileRun& smoke)
{
    Verdict v;
    const auto cfg = config::load(fs::path(PDL_SOURCE_DIR) / "configs/default.yaml");
    std::fprintf(stderr, "criterion 6: default profile\n");
    const auto r = run_profile(cfg, out / "default", jobs);
    v.require(r.errors.empty(), std::to_string(r.reports.size()) + " runs completed");
    if (!r.errors.empty()) return v;
    const auto& af = r.reports.at("adam_full");
    const auto& am = r.reports.at("adam_mini");
    const auto& rf = r.reports.at("rmsprop_full");
    const auto& gf = r.reports.at("gd_full");
    v.require(af.re.psi <= 0.05, "(a) adam full re_psi " + num(af.re.psi, "%.4f") + " <= 0.05");
    v.require(af.re.theta <= 0.02, "(a) adam full re_theta " + num(af.re.theta, "%.4f") + " <= 0.02");
    v.require(af.final_loss.total < rf.final_loss.total && rf.final_loss.total < gf.final_loss.total,
              "(b) full-batch loss adam " + num(af.final_loss.total) + " < rmsprop " + num(rf.final_loss.total) +
                  " < gd " + num(gf.final_loss.total));
    v.require(af.re.psi <= am.re.psi,
              "(c) adam re_psi full " + num(af.re.psi, "%.4f") + " <= mini " + num(am.re.psi, "%.4f"));
    v.require(r.seconds <= 1800.0, "default profile " + num(r.seconds / 60.0, "%.1f") + " min");
    const bool smoke_ok = smoke.errors.empty() && smoke.reports.count("adam_full");
    const double smoke_re = smoke_ok ? smoke.reports.at("adam_full").re.psi : NAN;
    v.require(smoke_ok && smoke_re <= 0.15, "smoke adam full re_psi " + num(smoke_re, "%.4f") + " <= 0.15");
    v.require(smoke.seconds <= 180.0, "smoke profile " + num(smoke.seconds, "%.0f") + " s");
    return v;
}

Verdict determinism(const fs::path& out, std::size_t jobs, const ProfileRun& first)
{
    Verdict v;
    const auto cfg = config::load(fs::path(PDL_SOURCE_DIR) / "configs/smoke.yaml");
    std::fprintf(stderr, "criterion 7: smoke profile, second invocation\n");
    const auto second = run_profile(cfg, out / "smoke_b", jobs);
    v.require(first.errors.empty() && second.errors.empty(), "both invocations complete");
    std::size_t compared = 0, differing = 0;
    for (const auto& [id, rep] : first.reports)
        for (const char* f : {files::convergence, files::report}) {
            ++compared;
            const auto b = out / "smoke_b" / files::runs_dir / id / f;
            differing += !fs::exists(b) || io::read_file(rep.dir / f) != io::read_file(b);
        }
    for (const char* f : {files::truth, files::sensors}) {
        ++compared;
        differing += io::read_file(out / "smoke_a" / f) != io::read_file(out / "smoke_b" / f);
    }
    v.require(compared > 2 && differing == 0,
              std::to_string(compared - differing) + "/" + std::to_string(compared) + " files byte-identical");
    return v;
}

void print(int id, const char* name, const Verdict& v)
{
    std::printf("[%s] %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria 1-7"};
    std::string out = "acceptance_out";
    std::size_t jobs = 1;
    bool skip_long = false;
    app.add_option("--out", out, "scratch directory for the end-to-end runs")->capture_default_str();
    app.add_option("--jobs", jobs, "independent runs trained at once")->check(CLI::PositiveNumber);
    app.add_flag("--skip-long", skip_long, "skip criteria 6 and 7");
    CLI11_PARSE(app, argc, argv);

    bool all = true;
    auto guarded = [&](int id, const char* name, auto&& fn) {
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("error: ") + e.what();
        }
        all &= v.pass;
        print(id, name, v);
    };
    guarded(1, "differentiation", differentiation);
    guarded(2, "constitutive", constitutive);
    guarded(3, "residual", residual_check);
    guarded(4, "optimizer algebra", optimizer_algebra);
    guarded(5, "oracle physics", oracle_physics);
    if (skip_long) {
        std::printf("[SKIP] 6 end-to-end\n[SKIP] 7 determinism\n");
        return all ? 0 : 1;
    }
    ProfileRun smoke;
    try {
        std::fprintf(stderr, "smoke profile, first invocation\n");
        smoke = run_profile(config::load(fs::path(PDL_SOURCE_DIR) / "configs/smoke.yaml"), fs::path(out) / "smoke_a",
                            jobs);
    } catch (const std::exception& e) {
        smoke.errors.push_back(e.what());
    }
    guarded(6, "end-to-end", [&] { return end_to_end(out, jobs, smoke); });
    guarded(7, "determinism", [&] { return determinism(out, jobs, smoke); });
    return all ? 0 : 1;
}
