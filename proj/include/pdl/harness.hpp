#pragma once

/// Experiment orchestration: oracle run, sensor sampling, training under
/// each optimizer and batch regime, metrics and per-run artifacts.

#include <pdl/dataset.hpp>
#include <pdl/io.hpp>
#include <pdl/loss_kernel.hpp>
#include <pdl/network.hpp>
#include <pdl/optim.hpp>
#include <pdl/oracle.hpp>
#include <pdl/physics.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace pdl {

enum class Regime { mini, full };

inline std::string to_string(Regime r) { return r == Regime::mini ? "mini" : "full"; }

inline Regime parse_regime(const std::string& s)
{
    if (s == "mini") return Regime::mini;
    if (s == "full") return Regime::full;
    throw ConfigError("unknown batch regime '" + s + "' (expected mini or full)");
}

struct RunSpec {
    OptimizerKind optimizer = OptimizerKind::adam;
    Regime regime = Regime::full;

    [[nodiscard]] std::string id() const { return std::string(to_string(optimizer)) + "_" + to_string(regime); }
    friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

struct GridSettings {
    std::size_t nx = 20;
    std::size_t ny = 20;
    std::size_t nz = 10;
    double lx = 40.0;  // cm
    double ly = 40.0;
    double lz = 20.0;

    [[nodiscard]] Grid3D grid() const { return Grid3D::spanning(nx, ny, nz, lx, ly, lz); }
};

/// Surface wetting of a uniformly dry column; lateral faces closed.
struct Scenario {
    double initial_psi = -100.0;
    double top_psi = -10.0;
    double bottom_psi = -100.0;

    [[nodiscard]] BoundaryConditions boundary_conditions() const
    {
        return BoundaryConditions::infiltration(initial_psi, top_psi, bottom_psi);
    }
};

struct Seeds {
    std::uint64_t sensors = 0;
    std::uint64_t noise = 0;
    std::uint64_t collocation = 0;
    std::uint64_t network = 0;
    std::uint64_t batches = 0;
};

struct SensorLayout {
    std::size_t columns = 15;
    std::size_t depths = 5;
    DepthAnchor anchor = DepthAnchor::bottom;
};

struct PlateauStop {
    bool enabled = false;
    std::size_t window = 500;
    double min_delta = 1e-6;
};

struct TrainingSettings {
    std::vector<OptimizerKind> optimizers{OptimizerKind::gd, OptimizerKind::rmsprop, OptimizerKind::adam};
    std::vector<Regime> regimes{Regime::mini, Regime::full};
    std::size_t iterations = 10000;  // full-batch steps
    std::size_t epochs = 40;         // mini-batch passes over the sensors
    std::size_t batch_size = 128;
    CollocationBatching collocation_batching = CollocationBatching::proportional;
    std::size_t eval_every = 500;
    PlateauStop plateau;
    double lr_gd = default_learning_rate(OptimizerKind::gd);
    double lr_rmsprop = default_learning_rate(OptimizerKind::rmsprop);
    double lr_adam = default_learning_rate(OptimizerKind::adam);
    double rmsprop_beta = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double epsilon = 1e-8;

    [[nodiscard]] std::vector<RunSpec> runs() const
    {
        std::vector<RunSpec> out;
        for (auto r : regimes)
            for (auto o : optimizers) out.push_back({o, r});
        return out;
    }

    [[nodiscard]] OptimizerConfig optimizer_config(const RunSpec& spec) const
    {
        OptimizerConfig c = OptimizerConfig::defaults(spec.optimizer);
        c.eta = spec.optimizer == OptimizerKind::gd        ? lr_gd
                : spec.optimizer == OptimizerKind::rmsprop ? lr_rmsprop
                                                           : lr_adam;
        c.beta = rmsprop_beta;
        c.beta1 = adam_beta1;
        c.beta2 = adam_beta2;
        c.epsilon = epsilon;
        if (spec.regime == Regime::mini) c.batch_size = batch_size;
        return c;
    }
};

struct ExperimentConfig {
    GridSettings grid;
    Scenario scenario;
    SolverOptions solver;
    VanGenuchtenParams soil;
    Seeds seeds;
    SensorLayout sensors;
    double noise_sigma = 0.005;
    NoiseScale noise_scale = NoiseScale::normalized;
    std::size_t collocation_points = 10000;
    Architecture network;
    LossWeights weights;
    double residual_scale = 10.0;  // 1/h
    TrainingSettings training;
    std::size_t discrepancy_time_index = 15;
    std::size_t curve_points = 200;

    [[nodiscard]] NoiseConfig noise() const { return {noise_sigma, noise_scale, seeds.noise}; }

    void validate() const
    {
        (void)grid.grid();
        solver.validate();
        soil.validate();
        network.validate();
        (void)sensor_depth_indices(grid.nz, sensors.depths, sensors.anchor);
        if (sensors.columns == 0 || sensors.columns > grid.nx * grid.ny)
            throw ConfigError("sensors.columns must be in 1.." + std::to_string(grid.nx * grid.ny));
        if (!(noise_sigma >= 0.0)) throw ConfigError("noise.sigma must be >= 0");
        const std::size_t instances = grid.nx * grid.ny * grid.nz * solver.n_saves;
        if (collocation_points == 0 || collocation_points > instances)
            throw ConfigError("collocation.points must be in 1.." + std::to_string(instances));
        if (!(weights.data >= 0.0) || !(weights.rre >= 0.0)) throw ConfigError("loss weights must be >= 0");
        if (!(residual_scale > 0.0)) throw ConfigError("loss.residual_scale must be > 0");
        if (training.optimizers.empty() || training.regimes.empty())
            throw ConfigError("training needs at least one optimizer and one regime");
        if (training.batch_size == 0) throw ConfigError("training.batch_size must be >= 1");
        if (training.eval_every == 0) throw ConfigError("training.eval_every must be >= 1");
        if (training.plateau.window == 0) throw ConfigError("training.plateau.window must be >= 1");
        for (const auto& spec : training.runs()) training.optimizer_config(spec).validate();
        if (discrepancy_time_index >= solver.n_saves)
            throw ConfigError("report.discrepancy_time_index must be < solver.n_saves");
        if (curve_points == 0) throw ConfigError("report.curve_points must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Data generation

struct GeneratedData {
    FieldSeries truth;
    SensorDataset sensors;  // noisy
    MassBalance balance;
};

inline GeneratedData generate(const ExperimentConfig& cfg)
{
    cfg.validate();
    GeneratedData d;
    d.truth = solve(cfg.grid.grid(), cfg.soil, cfg.scenario.boundary_conditions(), cfg.solver);
    d.balance = mass_balance(d.truth, cfg.soil);
    const auto clean = place_sensors(d.truth, cfg.sensors.columns, cfg.sensors.depths, cfg.seeds.sensors,
                                     cfg.sensors.anchor);
    d.sensors = add_noise(clean, cfg.noise());
    return d;
}

namespace files {
inline constexpr const char* truth = "truth_field.bin";
inline constexpr const char* sensors = "sensors.csv";
inline constexpr const char* generate_summary = "generate.json";
inline constexpr const char* runs_dir = "runs";
inline constexpr const char* convergence = "convergence.csv";
inline constexpr const char* timing = "timing.csv";
inline constexpr const char* report = "report.json";
inline constexpr const char* prediction = "pred_field.bin";
inline constexpr const char* params = "params.bin";
inline constexpr const char* curves = "wrc_hcf.csv";
}  // namespace files

inline nlohmann::json balance_json(const MassBalance& mb)
{
    return {{"total_inflow_cm3", mb.total_inflow},
            {"cumulative_abs_error_cm3", mb.cumulative_absolute},
            {"cumulative_rel_error", mb.cumulative_relative},
            {"rel_to_initial_storage", mb.storage_relative}};
}

inline void write_generated(const std::filesystem::path& dir, const GeneratedData& d)
{
    std::filesystem::create_directories(dir);
    io::write_field(dir / files::truth, d.truth);
    io::write_sensors(dir / files::sensors, d.sensors);
    nlohmann::json j;
    j["grid"] = io::to_json(d.truth.grid);
    j["saves"] = d.truth.time_steps();
    j["sensor_records"] = d.sensors.records.size();
    j["mass_balance"] = balance_json(d.balance);
    io::write_atomically(dir / files::generate_summary, j.dump(2) + "\n");
}

struct LoadedData {
    FieldSeries truth;
    SensorDataset sensors;
};

inline LoadedData load_generated(const std::filesystem::path& dir)
{
    for (const char* f : {files::truth, files::sensors})
        if (!std::filesystem::exists(dir / f))
            throw Error("missing " + (dir / f).string() + "; run 'generate' first");
    return {io::read_field(dir / files::truth), io::read_sensors(dir / files::sensors)};
}

// ---------------------------------------------------------------------------
// Post-processing

struct CurveRow {
    double psi = 0.0;
    double theta = 0.0;
    double k = 0.0;
};

/// (psi, theta(psi), K(psi)) at the given heads.
inline std::vector<CurveRow> constitutive_table(const VanGenuchtenParams& vgp, std::span<const double> psi)
{
    std::vector<CurveRow> rows;
    rows.reserve(psi.size());
    for (double p : psi) rows.push_back({p, vg::theta(vgp, p), vg::k(vgp, p)});
    return rows;
}

/// WRC/HCF samples over the head range seen in a predicted field, `n`
/// evenly spaced heads from its minimum to its maximum.
inline std::vector<CurveRow> sample_constitutive_curves(const FieldSeries& pred, const VanGenuchtenParams& vgp,
                                                        std::size_t n)
{
    if (pred.values.empty() || n == 0) return {};
    const auto [lo, hi] = std::minmax_element(pred.values.begin(), pred.values.end());
    std::vector<double> psi;
    if (n == 1 || *lo == *hi) {
        psi.push_back(*lo);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            psi.push_back(*lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return constitutive_table(vgp, psi);
}

/// |theta(pred) - theta(truth)| at every node of save `t_index`.
inline std::vector<double> discrepancy_field(const FieldSeries& pred, const FieldSeries& truth,
                                             const VanGenuchtenParams& vgp, std::size_t t_index)
{
    if (!(pred.grid == truth.grid) || pred.values.size() != truth.values.size())
        throw Error("discrepancy: field shapes differ");
    if (t_index >= truth.time_steps())
        throw Error("discrepancy: time index " + std::to_string(t_index) + " out of range (" +
                    std::to_string(truth.time_steps()) + " saves)");
    const auto p = pred.snapshot(t_index);
    const auto t = truth.snapshot(t_index);
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::abs(vg::theta(vgp, p[i]) - vg::theta(vgp, t[i]));
    return out;
}

inline std::string curves_csv(const std::vector<CurveRow>& rows)
{
    std::string s = "psi,theta,k\n";
    for (const auto& r : rows) s += io::fmt(r.psi) + ',' + io::fmt(r.theta) + ',' + io::fmt(r.k) + '\n';
    return s;
}

inline std::string discrepancy_csv(const Grid3D& g, std::span<const double> d)
{
    std::string s = "x_idx,y_idx,z_idx,x,y,z,abs_theta_diff\n";
    for (std::size_t i = 0; i < g.nx; ++i)
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t l = 0; l < g.nz; ++l)
                s += std::to_string(i) + ',' + std::to_string(j) + ',' + std::to_string(l) + ',' + io::fmt(g.x(i)) +
                     ',' + io::fmt(g.y(j)) + ',' + io::fmt(g.z(l)) + ',' + io::fmt(d[g.index(i, j, l)]) + '\n';
    return s;
}

// ---------------------------------------------------------------------------
// Training

/// Everything a run trains on, shared read-only between runs.
struct TrainingProblem {
    SensorDataset sensors;
    CollocationSet collocation;
    FieldSeries truth;  // evaluation target and space-time grid
    Scaling scaling;
};

inline TrainingProblem make_problem(const ExperimentConfig& cfg, LoadedData data)
{
    TrainingProblem p;
    p.collocation = sample_collocation(data.truth, cfg.collocation_points, cfg.seeds.collocation);
    const auto heads = data.sensors.heads();
    p.scaling = Scaling::calibrated(data.truth.box(), heads);
    p.sensors = std::move(data.sensors);
    p.truth = std::move(data.truth);
    if (p.sensors.records.empty()) throw Error("sensor file holds no records");
    return p;
}

struct ConvergenceRow {
    std::size_t iteration = 0;
    std::size_t epoch = 0;
    LossBreakdown batch;
    std::optional<LossBreakdown> full;
    std::optional<RelativeErrors> re;
};

struct RunResult {
    RunSpec spec;
    OptimizerConfig optimizer;
    std::size_t steps = 0;
    bool stopped_on_plateau = false;
    std::vector<ConvergenceRow> log;
    std::vector<std::pair<std::size_t, double>> elapsed_ms;  // at eval rows
    LossBreakdown final_loss;
    RelativeErrors final_re;
    NetworkParams params;
    FieldSeries prediction;
};

inline std::vector<SpaceTimePoint> grid_points(const FieldSeries& s)
{
    std::vector<SpaceTimePoint> pts;
    pts.reserve(s.values.size());
    for (std::size_t k = 0; k < s.time_steps(); ++k)
        for (std::size_t i = 0; i < s.grid.nx; ++i)
            for (std::size_t j = 0; j < s.grid.ny; ++j)
                for (std::size_t l = 0; l < s.grid.nz; ++l) pts.push_back(s.point(k, i, j, l));
    return pts;
}

/// Trains one (optimizer, regime) pair from the shared seeded
/// initialization. `max_steps` caps the step count (0 trains nothing).
inline RunResult train_run(const ExperimentConfig& cfg, const TrainingProblem& prob, const RunSpec& spec,
                           std::optional<std::size_t> max_steps = std::nullopt)
{
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    RunResult res;
    res.spec = spec;
    res.optimizer = cfg.training.optimizer_config(spec);
    res.params = init(cfg.network, cfg.seeds.network, prob.scaling);

    LossKernel kernel(cfg.soil, cfg.weights, LossScales{prob.scaling.out_scale, cfg.residual_scale});
    Optimizer opt(res.optimizer, res.params.size());
    const auto eval_points = grid_points(prob.truth);

    std::vector<const SensorRecord*> all_s;
    for (const auto& r : prob.sensors.records) all_s.push_back(&r);
    std::vector<const SpaceTimePoint*> all_c;
    for (const auto& c : prob.collocation) all_c.push_back(&c);

    auto evaluate_full = [&](const NetworkParams& p, RelativeErrors& re) {
        FieldSeries pred = prob.truth;
        pred.values = kernel.predict(p, eval_points);
        re = relative_error(pred, prob.truth, cfg.soil);
        return kernel.evaluate(p, all_s, all_c, nullptr);
    };

    const std::size_t n_s = all_s.size();
    const std::size_t n_c = all_c.size();
    const std::size_t batches_per_epoch =
        spec.regime == Regime::full ? 1 : (n_s + cfg.training.batch_size - 1) / cfg.training.batch_size;
    std::size_t budget =
        spec.regime == Regime::full ? cfg.training.iterations : cfg.training.epochs * batches_per_epoch;
    if (max_steps) budget = std::min(budget, *max_steps);

    std::vector<double> grad;
    std::vector<const SensorRecord*> bs;
    std::vector<const SpaceTimePoint*> bc;
    double best = std::numeric_limits<double>::infinity();
    std::size_t last_improvement = 0;
    std::size_t step = 0;

    for (std::size_t epoch = 0; step < budget; ++epoch) {
        const auto batches =
            make_batches(n_s, n_c, res.optimizer, cfg.seeds.batches, epoch, cfg.training.collocation_batching);
        for (const auto& b : batches) {
            if (step >= budget) break;
            bs.clear();
            bc.clear();
            for (auto i : b.sensors) bs.push_back(all_s[i]);
            for (auto i : b.collocation) bc.push_back(all_c[i]);
            ConvergenceRow row;
            row.iteration = step;
            row.epoch = epoch;
            row.batch = kernel.evaluate(res.params, bs, bc, &grad);
            if (step % cfg.training.eval_every == 0) {
                RelativeErrors re;
                row.full = spec.regime == Regime::full ? row.batch : evaluate_full(res.params, re);
                if (spec.regime == Regime::full) evaluate_full(res.params, re);
                row.re = re;
                res.elapsed_ms.emplace_back(step, std::chrono::duration<double, std::milli>(clock::now() - t0).count());
            }
            res.log.push_back(row);
            opt.step(res.params.values, grad);
            ++step;

            if (cfg.training.plateau.enabled) {
                if (best - row.batch.total > cfg.training.plateau.min_delta) {
                    best = row.batch.total;
                    last_improvement = step;
                } else if (step - last_improvement >= cfg.training.plateau.window) {
                    res.stopped_on_plateau = true;
                    budget = step;
                }
            }
        }
    }
    res.steps = step;

    ConvergenceRow last;
    last.iteration = step;
    last.epoch = spec.regime == Regime::full ? step : (step + batches_per_epoch - 1) / batches_per_epoch;
    RelativeErrors re;
    last.full = evaluate_full(res.params, re);
    last.batch = *last.full;
    last.re = re;
    if (step > 0) res.log.push_back(last);
    res.final_loss = *last.full;
    res.final_re = re;
    res.prediction = prob.truth;
    res.prediction.values = kernel.predict(res.params, eval_points);
    res.prediction.bc_description = "network prediction (" + spec.id() + ")";
    res.prediction.ledger = {};
    res.elapsed_ms.emplace_back(step, std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    return res;
}

inline constexpr const char* kConvergenceHeader =
    "iteration,epoch,data_loss,rre_loss,total_loss,full_data_loss,full_rre_loss,full_total_loss,re_psi,re_theta";

inline std::string convergence_csv(const std::vector<ConvergenceRow>& rows)
{
    std::string s = kConvergenceHeader;
    s += '\n';
    for (const auto& r : rows) {
        s += std::to_string(r.iteration) + ',' + std::to_string(r.epoch) + ',' + io::fmt(r.batch.data_loss) + ',' +
             io::fmt(r.batch.rre_loss) + ',' + io::fmt(r.batch.total);
        if (r.full)
            s += ',' + io::fmt(r.full->data_loss) + ',' + io::fmt(r.full->rre_loss) + ',' + io::fmt(r.full->total);
        else
            s += ",,,";
        if (r.re)
            s += ',' + io::fmt(r.re->psi) + ',' + io::fmt(r.re->theta);
        else
            s += ",,";
        s += '\n';
    }
    return s;
}

struct RunReport {
    RunSpec spec;
    double learning_rate = 0.0;
    std::size_t steps = 0;
    bool stopped_on_plateau = false;
    LossBreakdown final_loss;
    RelativeErrors re;
    double max_discrepancy = 0.0;
    std::filesystem::path dir;
};

inline nlohmann::json to_json(const RunReport& r)
{
    return {{"run", r.spec.id()},
            {"optimizer", std::string(to_string(r.spec.optimizer))},
            {"regime", to_string(r.spec.regime)},
            {"learning_rate", r.learning_rate},
            {"steps", r.steps},
            {"stopped_on_plateau", r.stopped_on_plateau},
            {"final_loss", {{"data", r.final_loss.data_loss}, {"rre", r.final_loss.rre_loss}, {"total", r.final_loss.total}}},
            {"re_psi", r.re.psi},
            {"re_theta", r.re.theta},
            {"max_abs_theta_discrepancy", r.max_discrepancy},
            {"files",
             {{"convergence", files::convergence},
              {"prediction", files::prediction},
              {"params", files::params},
              {"curves", files::curves}}}};
}

inline RunReport report_from_json(const nlohmann::json& j)
{
    RunReport r;
    r.spec = {parse_optimizer(j.at("optimizer").get<std::string>()), parse_regime(j.at("regime").get<std::string>())};
    r.learning_rate = j.at("learning_rate").get<double>();
    r.steps = j.at("steps").get<std::size_t>();
    r.stopped_on_plateau = j.at("stopped_on_plateau").get<bool>();
    const auto& f = j.at("final_loss");
    r.final_loss = {f.at("data").get<double>(), f.at("rre").get<double>(), f.at("total").get<double>()};
    r.re = {j.at("re_psi").get<double>(), j.at("re_theta").get<double>()};
    r.max_discrepancy = j.at("max_abs_theta_discrepancy").get<double>();
    return r;
}

inline std::string discrepancy_file_name(std::size_t t_index) { return "discrepancy_t" + std::to_string(t_index) + ".csv"; }

/// Writes every artifact of a finished run into `dir`; report.json last.
inline RunReport write_run(const ExperimentConfig& cfg, const TrainingProblem& prob, const RunResult& res,
                           const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    io::write_atomically(dir / files::convergence, convergence_csv(res.log));
    std::string timing = "iteration,elapsed_ms\n";
    for (const auto& [it, ms] : res.elapsed_ms) timing += std::to_string(it) + ',' + io::fmt(ms) + '\n';
    io::write_atomically(dir / files::timing, timing);
    io::write_field(dir / files::prediction, res.prediction);
    io::write_params(dir / files::params, res.params);
    io::write_atomically(dir / files::curves,
                         curves_csv(sample_constitutive_curves(res.prediction, cfg.soil, cfg.curve_points)));
    const auto disc = discrepancy_field(res.prediction, prob.truth, cfg.soil, cfg.discrepancy_time_index);
    io::write_atomically(dir / discrepancy_file_name(cfg.discrepancy_time_index), discrepancy_csv(prob.truth.grid, disc));

    RunReport r;
    r.spec = res.spec;
    r.learning_rate = res.optimizer.eta;
    r.steps = res.steps;
    r.stopped_on_plateau = res.stopped_on_plateau;
    r.final_loss = res.final_loss;
    r.re = res.final_re;
    r.max_discrepancy = disc.empty() ? 0.0 : *std::max_element(disc.begin(), disc.end());
    r.dir = dir;
    auto j = to_json(r);
    j["files"]["discrepancy"] = discrepancy_file_name(cfg.discrepancy_time_index);
    io::write_atomically(dir / files::report, j.dump(2) + "\n");
    return r;
}

struct RunOutcome {
    RunSpec spec;
    std::optional<RunReport> report;
    std::string error;
};

using ProgressFn = std::function<void(const RunOutcome&)>;

/// Trains every configured run and writes its directory under
/// out/runs/<optimizer>_<regime>. Runs are independent; up to `jobs` run
/// at once. A failing run is reported with its identity and does not stop
/// the others.
inline std::vector<RunOutcome> run_experiment(const ExperimentConfig& cfg, const TrainingProblem& prob,
                                              const std::filesystem::path& out, std::size_t jobs = 1,
                                              const ProgressFn& progress = {},
                                              std::optional<std::size_t> max_steps = std::nullopt)
{
    const auto specs = cfg.training.runs();
    std::vector<RunOutcome> outcomes(specs.size());
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    auto worker = [&] {
        for (std::size_t i = next++; i < specs.size(); i = next++) {
            RunOutcome o;
            o.spec = specs[i];
            try {
                const auto res = train_run(cfg, prob, specs[i], max_steps);
                o.report = write_run(cfg, prob, res, out / files::runs_dir / specs[i].id());
            } catch (const std::exception& e) {
                o.error = specs[i].id() + ": " + e.what();
            }
            outcomes[i] = o;
            if (progress) {
                std::lock_guard lock(mu);
                progress(o);
            }
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, specs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return outcomes;
}

// ---------------------------------------------------------------------------
// Consolidated table

struct ReportTable {
    std::map<std::string, RunReport> runs;  // by run id
    std::vector<std::string> incomplete;    // run directories without a report
};

inline ReportTable collect_reports(const std::filesystem::path& out)
{
    ReportTable t;
    const auto dir = out / files::runs_dir;
    if (!std::filesystem::is_directory(dir)) return t;
    std::vector<std::filesystem::path> entries;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_directory()) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    for (const auto& p : entries) {
        if (!std::filesystem::exists(p / files::report)) {
            t.incomplete.push_back(p.filename().string());
            continue;
        }
        auto r = report_from_json(nlohmann::json::parse(io::read_file(p / files::report)));
        r.dir = p;
        t.runs[r.spec.id()] = r;
    }
    return t;
}

/// Rows {psi, theta} x {mini, full}, columns GD, RMSProp, Adam; "-" where a
/// run is missing.
inline std::string format_table(const ReportTable& t)
{
    const std::array<OptimizerKind, 3> cols{OptimizerKind::gd, OptimizerKind::rmsprop, OptimizerKind::adam};
    auto cell = [&](OptimizerKind o, Regime r, bool theta) -> std::string {
        const auto it = t.runs.find(RunSpec{o, r}.id());
        if (it == t.runs.end()) return "-";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", theta ? it->second.re.theta : it->second.re.psi);
        return buf;
    };
    std::string s;
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %-6s %10s %10s %10s\n", "variable", "batch", "GD", "RMSProp", "Adam");
    s += line;
    for (bool theta : {false, true}) {
        for (Regime r : {Regime::mini, Regime::full}) {
            bool any = false;
            for (auto o : cols) any |= t.runs.count(RunSpec{o, r}.id()) != 0;
            if (!any) continue;
            std::snprintf(line, sizeof line, "%-12s %-6s %10s %10s %10s\n", theta ? "re_theta" : "re_psi",
                          to_string(r).c_str(), cell(cols[0], r, theta).c_str(), cell(cols[1], r, theta).c_str(),
                          cell(cols[2], r, theta).c_str());
            s += line;
        }
    }
    return s;
}

}  // namespace pdl
