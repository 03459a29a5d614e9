#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <sstream>
#include <sys/wait.h>

using namespace lislam;
using namespace lislam::testing;

namespace {

std::string to_csv(const RunConfig& cfg, const RunResult& r)
{
    std::ostringstream os;
    write_csv(os, cfg.params.n(), r.rows);
    return os.str();
}

RunConfig short_reference(double horizon)
{
    RunConfig cfg = RunConfig::reference();
    cfg.horizon = horizon;
    cfg.log_interval = 50;
    return cfg;
}

struct CommandResult {
    int exit_code;
    std::string output;
};

CommandResult run_cli(const std::string& args)
{
    const std::string cmd = std::string(LISLAM_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed");
    std::string out;
    char buf[512];
    while (std::fgets(buf, sizeof(buf), pipe)) out += buf;
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::filesystem::path temp_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("lislam_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text)
{
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p;
}

const std::filesystem::path kConfigs = LISLAM_CONFIG_DIR;

}  // namespace

TEST(Run, IsDeterministicForFixedSeed)
{
    RunConfig cfg = short_reference(1.0);
    cfg.noise = {0.01, 0.01, 0.05};
    cfg.seed = 9;
    const std::string a = to_csv(cfg, run(cfg));
    const std::string b = to_csv(cfg, run(cfg));
    EXPECT_EQ(a, b);
    cfg.seed = 10;
    EXPECT_NE(a, to_csv(cfg, run(cfg)));
}

TEST(Run, ZeroHorizonWritesHeaderOnlyAndInitialSummary)
{
    const RunConfig cfg = short_reference(0.0);
    const RunResult r = run(cfg);
    EXPECT_TRUE(r.rows.empty());
    const std::string csv = to_csv(cfg, r);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
    EXPECT_EQ(r.summary["steps"].get<std::int64_t>(), 0);
    EXPECT_EQ(r.summary["final_pos_err"].get<double>(), r.summary["initial_pos_err"].get<double>());
    EXPECT_EQ(r.summary["final_t"].get<double>(), 0.0);
    EXPECT_NEAR(r.summary["initial_pos_err"].get<double>(), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(r.summary["initial_att_err"].get<double>(), 0.25 * std::numbers::pi * std::sqrt(3.0), 1e-12);
}

TEST(Run, LogsEveryIntervalAndFinalTime)
{
    RunConfig cfg = short_reference(0.1);
    cfg.log_interval = 30;
    const RunResult r = run(cfg);
    ASSERT_EQ(r.rows.size(), 8u);  // steps 0, 30, ..., 180 and the final step 200
    EXPECT_NEAR(r.rows.back().t, 0.1, 1e-15);
    EXPECT_NEAR(r.rows[1].t, 30 * 5e-4, 1e-15);
}

TEST(Run, ShortReferenceRunIsHealthy)
{
    RunConfig cfg = short_reference(5.0);
    cfg.record_lyapunov = true;
    const RunResult r = run(cfg);
    const auto& s = r.summary;
    EXPECT_LE(s["max_lyap_increase"].get<double>(), 1e-6);
    EXPECT_EQ(s["p_bound_violations"].get<std::int64_t>(), 0);
    EXPECT_EQ(s["vz_bound_violations"].get<std::int64_t>(), 0);
    EXPECT_LT(s["final_lyap"].get<double>(), s["initial_lyap"].get<double>());
    EXPECT_LE(s["max_ve_contraction_ratio"].get<double>(), 1.001);
    EXPECT_GE(s["min_sv_az"].get<double>(), 1e-6);
    EXPECT_GE(s["min_eig_m_minus_q"].get<double>(), -1e-12);
    EXPECT_EQ(r.lyapunov_trace.size(), 10001u);
    EXPECT_GE(s["sup_corr_gnss"].get<double>(), 0.1 * std::sqrt(7.0) - 1e-12);
    EXPECT_EQ(s["tpe_dwell_ok"].get<int>(), 1);
}

TEST(Run, GnssOffUntilFiveSeconds)
{
    const RunResult r = run(short_reference(6.0));
    for (const auto& row : r.rows) EXPECT_EQ(row.sigma, (row.t >= 5.0 && row.t < 10.0) ? 1 : 0) << row.t;
}

TEST(Run, RefusesInfeasibleGainsUnlessOverridden)
{
    RunConfig cfg = short_reference(0.05);
    cfg.gains.T = 15.0;
    try {
        run(cfg);
        FAIL() << "expected refusal";
    } catch (const RunError& e) {
        EXPECT_NE(std::string(e.what()).find("infeasible gains"), std::string::npos) << e.what();
    }
    cfg.allow_infeasible = true;
    EXPECT_EQ(run(cfg).summary["feasible"].get<int>(), 0);
}

TEST(Run, RefusesScheduleWithoutPersistentExcitation)
{
    RunConfig cfg = short_reference(30.0);
    cfg.schedule = GnssSchedule::windows({{0.0, 1.0}}, 10.0, 5.0);
    try {
        run(cfg);
        FAIL() << "expected refusal";
    } catch (const RunError& e) {
        EXPECT_NE(std::string(e.what()).find("not persistently exciting"), std::string::npos) << e.what();
    }
}

TEST(Run, AbortsWithStepIndexOnNonFiniteCorrection)
{
    RunConfig cfg = short_reference(1.0);
    cfg.gains.kp = 1e308;
    cfg.monitors = false;
    try {
        run(cfg);
        FAIL() << "expected abort";
    } catch (const RunError& e) {
        EXPECT_NE(std::string(e.what()).find("aborted at step "), std::string::npos) << e.what();
    }
}

TEST(Run, FactorizedMidpointInitialisationStaysInsideBounds)
{
    RunConfig cfg = short_reference(3.0);
    cfg.estimate.az_source = AzSource::factorized;
    cfg.estimate.seeds = SeedPreset::midpoint;
    const RunResult r = run(cfg);
    EXPECT_EQ(r.summary["p_bound_violations"].get<std::int64_t>(), 0);
    EXPECT_LT(r.summary["max_sp_deviation"].get<double>(), 1e-3);
}

TEST(Run, SampledTrajectoryHoldsEachSample)
{
    RunConfig cfg;
    cfg.trajectory.kind = TrajectorySpec::Kind::samples;
    cfg.trajectory.samples = {{0.0, 0, 0, 1, -1, 0, -9.81}, {1.0, 0, 0, 2, 0, 0, -9.81}};
    const InputProfile f = make_input_profile(cfg);
    EXPECT_EQ(f(0.5).omega.z(), 1.0);
    EXPECT_EQ(f(1.0).omega.z(), 2.0);
    EXPECT_EQ(f(7.0).accel.x(), 0.0);
    EXPECT_EQ(f(-1.0).omega.z(), 1.0);
    cfg.trajectory.samples.clear();
    EXPECT_THROW(make_input_profile(cfg), std::invalid_argument);
}

TEST(Config, ReferenceFileMatchesBuiltInScenario)
{
    const RunConfig a = load_config(kConfigs / "reference.yaml");
    const RunConfig b = RunConfig::reference();
    ASSERT_EQ(a.params.n(), b.params.n());
    for (std::size_t i = 0; i < a.params.landmarks.size(); ++i)
        EXPECT_EQ(a.params.landmarks[i], b.params.landmarks[i]);
    EXPECT_EQ(a.dt, b.dt);
    EXPECT_EQ(a.horizon, b.horizon);
    EXPECT_EQ(a.gains.kx, b.gains.kx);
    EXPECT_EQ(a.gains.T, b.gains.T);
    EXPECT_EQ(a.gains.tau, b.gains.tau);
    EXPECT_EQ(a.schedule.start(), b.schedule.start());
    RunConfig sa = a, sb = b;
    sa.horizon = sb.horizon = 0.5;
    EXPECT_EQ(to_csv(sa, run(sa)), to_csv(sb, run(sb)));
}

TEST(Config, ShippedConfigsParse)
{
    for (const auto& entry : std::filesystem::directory_iterator(kConfigs))
        EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    const RunConfig noisy = load_config(kConfigs / "noisy.yaml");
    EXPECT_EQ(noisy.noise.gnss_std, 0.05);
    EXPECT_EQ(noisy.seed, 42u);
    const RunConfig mid = load_config(kConfigs / "factorized_midpoint.yaml");
    EXPECT_EQ(mid.estimate.az_source, AzSource::factorized);
    EXPECT_EQ(mid.estimate.seeds, SeedPreset::midpoint);
    EXPECT_FALSE(check_gain_condition(load_config(kConfigs / "long_window.yaml").gains, 5).feasible);
}

TEST(Config, ParsesSectionsAndOverrides)
{
    const RunConfig cfg = parse_config(YAML::Load(R"(
system:
  gravity: 9.8
  mag_reference: [0, 2, 0]
  landmarks: [[1, 0, 0], [0, 1, 0]]
gains: {kx: 2.0, q: 0.2}
gnss:
  mode: windows
  windows: [[0, 4], [8, 12]]
  T: 8
  tau: 4
integration: {dt: 0.001, horizon: 3, log_interval: 10}
estimate:
  attitude: rotvec
  attitude_rotvec: [0, 0, 0.5]
  az_source: factorized
  p0_seeds: {s_x: 1.0, s_vx: -2.0, s_v: 3.0}
seed: 5
)"));
    EXPECT_EQ(cfg.params.gravity, 9.8);
    EXPECT_EQ(cfg.params.mag_reference, Vec3::UnitY());
    EXPECT_EQ(cfg.params.n(), 2);
    EXPECT_EQ(cfg.gains.kx, 2.0);
    EXPECT_EQ(cfg.gains.kp, 2.0);
    EXPECT_EQ(cfg.gains.q, 0.2);
    EXPECT_EQ(cfg.gains.T, 8.0);
    EXPECT_EQ(cfg.gains.tau, 4.0);
    EXPECT_EQ(cfg.schedule.sigma(10.0), 1);
    EXPECT_EQ(cfg.schedule.sigma(6.0), 0);
    EXPECT_EQ(cfg.dt, 0.001);
    EXPECT_EQ(cfg.log_interval, 10);
    EXPECT_EQ(cfg.estimate.attitude, AttitudeInit::rotvec);
    EXPECT_EQ(cfg.estimate.seeds, SeedPreset::custom);
    EXPECT_EQ(cfg.estimate.custom_seeds.s_vx, -2.0);
    EXPECT_EQ(cfg.seed, 5u);
}

TEST(Config, EmptyDocumentIsReference)
{
    const RunConfig cfg = parse_config(YAML::Load(""));
    EXPECT_EQ(cfg.horizon, 40.0);
    EXPECT_EQ(cfg.params.n(), 5);
}

TEST(Config, Errors)
{
    try {
        load_config("/nonexistent/scenario.yaml");
        FAIL() << "expected throw";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("config file not found"), std::string::npos);
    }
    auto rejects = [](const char* text, const char* fragment) {
        try {
            parse_config(YAML::Load(text));
            ADD_FAILURE() << "accepted: " << text;
        } catch (const std::invalid_argument& e) {
            EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
        }
    };
    rejects("gains: {kq: 1}", "unknown key 'kq' in gains");
    rejects("gians: {kx: 1}", "unknown key 'gians'");
    rejects("trajectory: {preset: spiral}", "unknown trajectory preset");
    rejects("gnss: {mode: sometimes}", "unknown gnss mode");
    rejects("gnss: {mode: windows, windows: [[0, 1]]}", "gnss.T and gnss.tau");
    rejects("system: {mag_reference: [0, 0, 0]}", "non-zero");
    rejects("system: {landmarks: [[0, 0]]}", "3-vector");
    rejects("integration: {dt: -1}", "dt must be positive");
    rejects("estimate: {p0_seeds: median}", "p0_seeds");
    rejects("trajectory: {preset: samples, samples: [[0, 1, 2]]}", "[t, wx, wy, wz, ax, ay, az]");
    const auto dir = temp_dir("bad_yaml");
    EXPECT_THROW(load_config(write_file(dir, "bad.yaml", "gains: [1, 2\n")), std::runtime_error);
}

TEST(Cli, CheckGainsReportsMarginAndIntervals)
{
    const CommandResult r = run_cli("check-gains");
    EXPECT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("margin 0.38998"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("feasible"), std::string::npos);
    EXPECT_EQ(r.output.find("VIOLATED"), std::string::npos);
    const CommandResult bad = run_cli("check-gains --config " + (kConfigs / "long_window.yaml").string());
    EXPECT_EQ(bad.exit_code, 1);
    EXPECT_NE(bad.output.find("infeasible"), std::string::npos);
}

TEST(Cli, ValidateSchedule)
{
    const CommandResult r = run_cli("validate-schedule --config " + (kConfigs / "reference.yaml").string());
    EXPECT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("TPE: yes"), std::string::npos) << r.output;
    const auto dir = temp_dir("cli_schedule");
    const auto cfg = write_file(dir, "gap.yaml", "gnss: {mode: windows, windows: [[0, 6]], T: 10, tau: 5}\n");
    const CommandResult bad = run_cli("validate-schedule --horizon 40 --config " + cfg.string());
    EXPECT_EQ(bad.exit_code, 1) << bad.output;
    EXPECT_NE(bad.output.find("TPE: no"), std::string::npos) << bad.output;
}

TEST(Cli, SimulateWritesOutputsAndRefusesInfeasible)
{
    const auto dir = temp_dir("cli_simulate");
    const CommandResult r = run_cli("simulate --horizon 0.5 --log-interval 100 --out " + dir.string());
    EXPECT_EQ(r.exit_code, 0) << r.output;
    ASSERT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
    ASSERT_TRUE(std::filesystem::exists(dir / "summary.json"));
    std::ifstream csv(dir / "metrics.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header.rfind("t,sigma,att_err", 0), 0u);
    const auto summary = nlohmann::json::parse(std::ifstream(dir / "summary.json"));
    EXPECT_EQ(summary["steps"].get<std::int64_t>(), 1000);

    const std::string long_window = (kConfigs / "long_window.yaml").string();
    const CommandResult refused = run_cli("simulate --horizon 0.1 --out " + dir.string() + " --config " + long_window);
    EXPECT_EQ(refused.exit_code, 2);
    EXPECT_NE(refused.output.find("infeasible gains"), std::string::npos) << refused.output;
    const CommandResult forced =
        run_cli("simulate --horizon 0.1 --allow-infeasible --out " + dir.string() + " --config " + long_window);
    EXPECT_EQ(forced.exit_code, 0) << forced.output;
}

TEST(Cli, MissingConfigAndBadUsage)
{
    const CommandResult r = run_cli("simulate --config /nonexistent/x.yaml");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.output.find("config file not found"), std::string::npos) << r.output;
    EXPECT_NE(run_cli("").exit_code, 0);
    EXPECT_NE(run_cli("simulate --dt").exit_code, 0);
}

TEST(Cli, Selftest)
{
    const CommandResult r = run_cli("selftest");
    EXPECT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("all checks passed"), std::string::npos) << r.output;
    EXPECT_EQ(r.output.find("FAIL"), std::string::npos);
}
