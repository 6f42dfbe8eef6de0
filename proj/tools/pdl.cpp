#include <pdl/config.hpp>
#include <pdl/harness.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Common {
    std::string config;
    std::string out = "out";
    std::vector<std::string> overrides;
    bool dry_run = false;
};

pdl::ExperimentConfig resolve(const Common& c)
{
    if (c.config.empty()) throw pdl::ConfigError("--config is required");
    auto cfg = pdl::config::load(c.config);
    for (const auto& s : c.overrides) pdl::config::apply_override(cfg, s);
    cfg.validate();
    return cfg;
}

int cmd_generate(const Common& c)
{
    const auto cfg = resolve(c);
    const std::filesystem::path out = c.out;
    if (c.dry_run) {
        std::printf("config ok: grid %zux%zux%zu, %zu saves, %zu sensor records\n", cfg.grid.nx, cfg.grid.ny,
                    cfg.grid.nz, cfg.solver.n_saves, cfg.sensors.columns * cfg.sensors.depths * cfg.solver.n_saves);
        return kOk;
    }
    const auto d = pdl::generate(cfg);
    pdl::write_generated(out, d);
    pdl::io::write_atomically(out / "config.resolved.yaml", pdl::config::to_yaml(cfg));
    std::printf("wrote %s (%zu saves) and %s (%zu records)\n", (out / pdl::files::truth).c_str(),
                d.truth.time_steps(), (out / pdl::files::sensors).c_str(), d.sensors.records.size());
    std::printf("mass balance: inflow %.6g cm3, cumulative error %.3g cm3 (relative %.3g)\n", d.balance.total_inflow,
                d.balance.cumulative_absolute, d.balance.cumulative_relative);
    return kOk;
}

int cmd_train(const Common& c, const std::string& data_dir, std::size_t jobs)
{
    const auto cfg = resolve(c);
    const std::filesystem::path out = c.out;
    const std::filesystem::path data = data_dir.empty() ? out : std::filesystem::path(data_dir);
    auto problem = pdl::make_problem(cfg, pdl::load_generated(data));
    if (!(problem.truth.grid == cfg.grid.grid()) || problem.truth.time_steps() != cfg.solver.n_saves)
        throw pdl::ConfigError("data in " + data.string() + " was generated with a different grid or save count");
    std::filesystem::create_directories(out);
    pdl::io::write_atomically(out / "config.resolved.yaml", pdl::config::to_yaml(cfg));

    const std::optional<std::size_t> cap = c.dry_run ? std::optional<std::size_t>(0) : std::nullopt;
    const auto outcomes = pdl::run_experiment(cfg, problem, out, jobs, [](const pdl::RunOutcome& o) {
        if (o.report)
            std::printf("%-14s steps %6zu  total %.4e  re_psi %.4f  re_theta %.4f\n", o.spec.id().c_str(),
                        o.report->steps, o.report->final_loss.total, o.report->re.psi, o.report->re.theta);
        else
            std::fprintf(stderr, "run failed: %s\n", o.error.c_str());
        std::fflush(stdout);
    }, cap);
    for (const auto& o : outcomes)
        if (!o.report) return kRuntimeError;
    return kOk;
}

int cmd_report(const Common& c)
{
    const std::filesystem::path out = c.out;
    const auto table = pdl::collect_reports(out);
    for (const auto& name : table.incomplete) std::fprintf(stderr, "incomplete run: %s (no report.json)\n", name.c_str());
    if (table.runs.empty()) {
        std::fprintf(stderr, "no runs found under %s\n", (out / pdl::files::runs_dir).c_str());
        return kRuntimeError;
    }
    const auto text = pdl::format_table(table);
    std::fputs(text.c_str(), stdout);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [id, r] : table.runs) j.push_back(pdl::to_json(r));
    pdl::io::write_atomically(out / "table.txt", text);
    pdl::io::write_atomically(out / "summary.json", j.dump(2) + "\n");
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Physics-informed soil moisture inversion: generate data, train, report"};
    app.require_subcommand(1);
    Common common;
    std::size_t jobs = 1;
    std::string data_dir;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", common.config, "YAML experiment config");
        if (needs_config) opt->check(CLI::ExistingFile);
        sub->add_option("--out", common.out, "output directory")->capture_default_str();
        sub->add_option("--set", common.overrides, "override a config value: section.key=value")->take_all();
        sub->add_flag("--dry-run", common.dry_run, "validate the config and write headers only");
        sub->add_option("--jobs", jobs, "independent runs trained at once")->check(CLI::PositiveNumber);
    };
    auto* gen = app.add_subcommand("generate", "run the oracle and sample noisy sensors");
    add_common(gen, true);
    auto* train = app.add_subcommand("train", "train every configured optimizer and batch regime");
    add_common(train, true);
    train->add_option("--data", data_dir, "directory holding generated data (default: --out)");
    auto* rep = app.add_subcommand("report", "print the relative-error table of finished runs");
    add_common(rep, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (gen->parsed()) return cmd_generate(common);
        if (train->parsed()) return cmd_train(common, data_dir, jobs);
        return cmd_report(common);
    } catch (const pdl::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntimeError;
    }
}
