#include <pdl/harness.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(grid: {nx: 4, ny: 4, nz: 3, lx: 6.0, ly: 6.0, lz: 4.0}
solver: {t_end: 0.12, n_saves: 4, substeps_per_save: 5}
seeds: {sensors: 1, noise: 2, collocation: 3, network: 4, batches: 5}
sensors: {columns: 3, depths: 3}
collocation: {points: 60}
network: {hidden_layers: 2, hidden_width: 6}
training: {iterations: 20, epochs: 2, batch_size: 16, eval_every: 5}
report: {discrepancy_time_index: 2, curve_points: 5}
)";

fs::path workdir()
{
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    const auto dir = fs::temp_directory_path() / "pdl_cli_test" / info->name();
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text = kTinyConfig)
{
    const auto p = dir / "cfg.yaml";
    std::ofstream(p) << text;
    return p;
}

struct Result {
    int code = -1;
    std::string output;
};

Result run(const std::string& args, const fs::path& dir)
{
    const auto log = dir / "cli.log";
    const std::string cmd = std::string(PDL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Cli, HelpAndUsageErrors)
{
    const auto dir = workdir();
    EXPECT_EQ(run("--help", dir).code, 0);
    EXPECT_EQ(run("", dir).code, 1);
    EXPECT_EQ(run("frobnicate", dir).code, 1);
    EXPECT_EQ(run("generate --config " + (dir / "missing.yaml").string(), dir).code, 1);
    EXPECT_EQ(run("train --config " + write_config(dir).string() + " --jobs 0", dir).code, 1);
}

TEST(Cli, ConfigErrorsExitOneWithLine)
{
    const auto dir = workdir();
    const auto cfg = write_config(dir, std::string(kTinyConfig) + "grid_extra: {a: 1}\n");
    const auto r = run("generate --config " + cfg.string() + " --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("line 9"), std::string::npos) << r.output;

    const auto good = write_config(dir);
    const auto s = run("generate --config " + good.string() + " --out " + dir.string() + " --set grid.nw=3", dir);
    EXPECT_EQ(s.code, 1);
    EXPECT_NE(s.output.find("grid.nw"), std::string::npos) << s.output;
}

TEST(Cli, GenerateIsReproducible)
{
    const auto dir = workdir();
    const auto cfg = write_config(dir);
    const auto a = run("generate --config " + cfg.string() + " --out " + (dir / "a").string(), dir);
    ASSERT_EQ(a.code, 0) << a.output;
    EXPECT_NE(a.output.find("mass balance"), std::string::npos) << a.output;
    ASSERT_EQ(run("generate --config " + cfg.string() + " --out " + (dir / "b").string(), dir).code, 0);
    for (const char* f : {"truth_field.bin", "sensors.csv", "generate.json"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    const auto ds = pdl::io::read_sensors(dir / "a/sensors.csv");
    EXPECT_EQ(ds.records.size(), 3u * 3u * 4u);
}

TEST(Cli, ZeroNoiseSensorsMatchOracle)
{
    const auto dir = workdir();
    const auto cfg = write_config(dir);
    ASSERT_EQ(run("generate --config " + cfg.string() + " --out " + dir.string() + " --set noise.sigma=0", dir).code, 0);
    const auto truth = pdl::io::read_field(dir / "truth_field.bin");
    for (const auto& r : pdl::io::read_sensors(dir / "sensors.csv").records)
        EXPECT_EQ(r.psi, truth.at(r.t_idx, r.x_idx, r.y_idx, r.z_idx));
}

TEST(Cli, TrainWithoutDataIsRuntimeError)
{
    const auto dir = workdir();
    const auto r = run("train --config " + write_config(dir).string() + " --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("run 'generate' first"), std::string::npos) << r.output;
}

TEST(Cli, SingleRunAndReport)
{
    const auto dir = workdir();
    const auto cfg = write_config(dir).string();
    ASSERT_EQ(run("generate --config " + cfg + " --out " + (dir / "data").string(), dir).code, 0);
    const auto t = run("train --config " + cfg + " --data " + (dir / "data").string() + " --out " +
                           (dir / "out").string() + " --set training.optimizers=[adam] --set training.regimes=[full]",
                       dir);
    ASSERT_EQ(t.code, 0) << t.output;
    std::vector<std::string> runs;
    for (const auto& e : fs::directory_iterator(dir / "out/runs")) runs.push_back(e.path().filename().string());
    EXPECT_EQ(runs, std::vector<std::string>{"adam_full"});

    std::istringstream csv(slurp(dir / "out/runs/adam_full/convergence.csv"));
    std::string line;
    std::getline(csv, line);
    long prev = -1;
    int rows = 0;
    while (std::getline(csv, line)) {
        const long it = std::stol(line.substr(0, line.find(',')));
        EXPECT_EQ(it, prev + 1);
        prev = it;
        ++rows;
    }
    EXPECT_EQ(rows, 21);

    const auto rep = run("report --out " + (dir / "out").string(), dir);
    EXPECT_EQ(rep.code, 0);
    EXPECT_NE(rep.output.find("re_psi       full"), std::string::npos) << rep.output;
    EXPECT_NE(rep.output.find("re_theta     full"), std::string::npos) << rep.output;
    EXPECT_TRUE(fs::exists(dir / "out/table.txt"));
}

TEST(Cli, FullMatrixGivesSixRunDirectories)
{
    const auto dir = workdir();
    const auto cfg = write_config(dir).string();
    ASSERT_EQ(run("generate --config " + cfg + " --out " + dir.string(), dir).code, 0);
    ASSERT_EQ(run("train --config " + cfg + " --out " + dir.string() + " --jobs 2", dir).code, 0);
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir / "runs")) n += fs::exists(e.path() / "report.json");
    EXPECT_EQ(n, 6u);
    const auto rep = run("report --out " + dir.string(), dir);
    EXPECT_EQ(rep.code, 0);
    EXPECT_NE(rep.output.find("re_theta     mini"), std::string::npos) << rep.output;
}

TEST(Cli, DryRunWritesHeadersOnly)
{
    const auto dir = workdir();
    const auto cfg = write_config(dir).string();
    EXPECT_EQ(run("generate --config " + cfg + " --out " + dir.string() + " --dry-run", dir).code, 0);
    EXPECT_FALSE(fs::exists(dir / "truth_field.bin"));
    ASSERT_EQ(run("generate --config " + cfg + " --out " + dir.string(), dir).code, 0);
    ASSERT_EQ(run("train --config " + cfg + " --out " + dir.string() + " --dry-run --set training.regimes=[full]", dir)
                  .code,
              0);
    const auto text = slurp(dir / "runs/adam_full/convergence.csv");
    EXPECT_EQ(text, std::string(pdl::kConvergenceHeader) + "\n");
}

TEST(Cli, ReportOnEmptyDirectoryFails)
{
    const auto dir = workdir();
    const auto r = run("report --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("no runs found"), std::string::npos) << r.output;
}

TEST(Cli, ReportFlagsIncompleteRuns)
{
    const auto dir = workdir();
    const auto cfg = write_config(dir).string();
    ASSERT_EQ(run("generate --config " + cfg + " --out " + dir.string(), dir).code, 0);
    ASSERT_EQ(run("train --config " + cfg + " --out " + dir.string() +
                      " --set training.optimizers=[gd] --set training.regimes=[mini]",
                  dir)
                  .code,
              0);
    fs::create_directories(dir / "runs/adam_full");
    const auto r = run("report --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.output.find("incomplete run: adam_full"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("re_psi       mini"), std::string::npos) << r.output;
}
