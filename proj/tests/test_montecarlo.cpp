#include "fipwc/montecarlo.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fipwc/pd.hpp"
#include "fipwc/rng.hpp"

using namespace fipwc;

namespace {

DisturbanceConfig quiet_disturbances() {
  DisturbanceConfig d;
  d.cart.sigma = 0.0;
  d.beam.sigma = 0.0;
  d.tip.sigma = 0.0;
  return d;
}

UncertaintySpec exact_params() {
  UncertaintySpec u;
  u.relative_spread = 0.0;
  return u;
}

EnvConfig short_env(int steps = 200) {
  EnvConfig cfg;
  cfg.episode_steps = steps;
  return cfg;
}

Controller zero_controller() {
  return [](const StateVector&) { return 0.0; };
}

Controller pd_controller(const PdGains& g, double limit) {
  return [g, limit](const StateVector& s) { return pd_force(g, s, limit); };
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("quiescent episode returns exactly zero") {
  Environment env(short_env(), ModelParams{}, exact_params(),
                  quiet_disturbances());
  const EpisodeResult r = run_episode(zero_controller(), env, 42);
  CHECK(r.episode_return == 0.0);
  CHECK(r.max_abs_theta == 0.0);
  CHECK(r.max_abs_phi == 0.0);
  CHECK(!r.violated);
}

TEST_CASE("same seed gives the identical episode") {
  Environment env(short_env(), ModelParams{}, UncertaintySpec{},
                  DisturbanceConfig{});
  PdGains g;
  g.kp_z = -0.3;
  const auto c = pd_controller(g, short_env().force_limit);
  const EpisodeResult a = run_episode(c, env, 9001);
  const EpisodeResult b = run_episode(c, env, 9001);
  CHECK(a.episode_return == b.episode_return);
  CHECK(a.max_abs_theta == b.max_abs_theta);
  CHECK(a.max_abs_phi == b.max_abs_phi);
  CHECK(a.violated == b.violated);
  // and a different seed actually changes the disturbance paths
  const EpisodeResult other = run_episode(c, env, 9002);
  CHECK(a.episode_return != other.episode_return);
}

TEST_CASE("episode return matches a hand-driven environment loop") {
  const EnvConfig cfg = short_env();
  Environment env(cfg, ModelParams{}, UncertaintySpec{}, DisturbanceConfig{});
  PdGains g;
  g.kp_theta = 1.0;
  g.kp_z = -0.3;
  const auto c = pd_controller(g, cfg.force_limit);
  const EpisodeResult r = run_episode(c, env, 77);

  Environment probe(cfg, ModelParams{}, UncertaintySpec{}, DisturbanceConfig{});
  probe.reset(77);
  double total = 0.0;
  double max_theta = 0.0, max_phi = 0.0;
  while (!probe.done()) {
    const double f = pd_force(g, probe.state(), cfg.force_limit);
    const StepResult sr = probe.step(f);
    total += sr.reward;
    max_theta = std::max(max_theta, std::fabs(sr.next_state.theta));
    max_phi = std::max(max_phi, std::fabs(sr.next_state.phi));
  }
  CHECK(r.episode_return == total);
  CHECK(r.max_abs_theta == max_theta);
  CHECK(r.max_abs_phi == max_phi);
}

TEST_CASE("observer sees every step in order with the applied force") {
  const EnvConfig cfg = short_env(50);
  Environment env(cfg, ModelParams{}, UncertaintySpec{}, DisturbanceConfig{});
  std::vector<int> steps;
  std::vector<double> forces;
  double observed_max_theta = 0.0;
  StepObserver obs = [&](int step, const StepResult& sr) {
    steps.push_back(step);
    forces.push_back(sr.info.applied_force);
    observed_max_theta = std::max(observed_max_theta,
                                  std::fabs(sr.next_state.theta));
  };
  // constant request beyond the limit, so the clamp must show in the log
  Controller c = [](const StateVector&) { return 25.0; };
  const EpisodeResult r = run_episode(c, env, 5, &obs);
  REQUIRE(static_cast<int>(steps.size()) == cfg.episode_steps);
  for (int i = 0; i < cfg.episode_steps; ++i) CHECK(steps[i] == i);
  for (const double f : forces) CHECK(f == cfg.force_limit);
  CHECK(observed_max_theta == r.max_abs_theta);
}

TEST_CASE("limit violations are recorded instead of raised") {
  EnvConfig cfg = short_env();
  cfg.obs_limit = 0.05;  // tiny envelope so a constant push violates fast
  Environment env(cfg, ModelParams{}, exact_params(), quiet_disturbances());
  Controller push = [](const StateVector&) { return 10.0; };
  EpisodeResult r;
  CHECK_NOTHROW(r = run_episode(push, env, 3));
  CHECK(r.violated);
  CHECK(r.episode_return < cfg.violation_reward / 2.0);  // penalty dominates
  CHECK(env.steps_taken() < cfg.episode_steps);          // ended early
}

TEST_CASE("campaign seeds are bound to the run index") {
  const CampaignSpec spec{.n_runs = 8, .master_seed = 321, .workers = 1};
  const CampaignResult r =
      run_campaign(spec, short_env(), ModelParams{}, UncertaintySpec{},
                   DisturbanceConfig{}, zero_controller());
  REQUIRE(r.runs.size() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(r.runs[static_cast<std::size_t>(i)].run_index == i);
    CHECK(r.runs[static_cast<std::size_t>(i)].seed ==
          campaign_run_seed(321, i));
  }
  // independent seeds under process noise: returns are not all equal
  bool all_equal = true;
  for (const RunRecord& rec : r.runs) {
    all_equal = all_equal && rec.episode_return == r.runs[0].episode_return;
  }
  CHECK(!all_equal);
}

TEST_CASE("campaign is deterministic and worker-count invariant") {
  const EnvConfig cfg = short_env();
  PdGains g;
  g.kp_z = -0.3;
  const auto c = pd_controller(g, cfg.force_limit);
  CampaignSpec one{.n_runs = 12, .master_seed = 555, .workers = 1};
  CampaignSpec four{.n_runs = 12, .master_seed = 555, .workers = 4};
  const CampaignResult a = run_campaign(one, cfg, ModelParams{},
                                        UncertaintySpec{}, DisturbanceConfig{}, c);
  const CampaignResult b = run_campaign(four, cfg, ModelParams{},
                                        UncertaintySpec{}, DisturbanceConfig{}, c);
  REQUIRE(a.runs.size() == b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].seed == b.runs[i].seed);
    CHECK(a.runs[i].episode_return == b.runs[i].episode_return);
    CHECK(a.runs[i].max_theta_deg == b.runs[i].max_theta_deg);
    CHECK(a.runs[i].max_phi_deg == b.runs[i].max_phi_deg);
    CHECK(a.runs[i].violated == b.runs[i].violated);
  }
  CHECK(a.stats.mean == b.stats.mean);
  REQUIRE(a.stats.stddev.has_value());
  REQUIRE(b.stats.stddev.has_value());
  CHECK(*a.stats.stddev == *b.stats.stddev);
  CHECK(a.stats.violation_count == b.stats.violation_count);
}

TEST_CASE("single-run campaign reports no standard deviation") {
  const CampaignSpec spec{.n_runs = 1, .master_seed = 7, .workers = 1};
  const CampaignResult r =
      run_campaign(spec, short_env(), ModelParams{}, UncertaintySpec{},
                   DisturbanceConfig{}, zero_controller());
  CHECK(r.runs.size() == 1);
  CHECK(!r.stats.stddev.has_value());
  CHECK(r.stats.mean == r.runs[0].episode_return);

  write_campaign_summary("mc_summary_single.txt", spec, r.stats);
  const std::string text = slurp("mc_summary_single.txt");
  CHECK(text.find("std_return") == std::string::npos);
  CHECK(text.find("mean_return=") != std::string::npos);
  std::remove("mc_summary_single.txt");
}

TEST_CASE("reported statistics match a naive recomputation") {
  const CampaignSpec spec{.n_runs = 25, .master_seed = 99, .workers = 2};
  const CampaignResult r =
      run_campaign(spec, short_env(), ModelParams{}, UncertaintySpec{},
                   DisturbanceConfig{}, zero_controller());
  double sum = 0.0;
  for (const RunRecord& rec : r.runs) sum += rec.episode_return;
  const double mean = sum / 25.0;
  double ss = 0.0;
  for (const RunRecord& rec : r.runs) {
    ss += (rec.episode_return - mean) * (rec.episode_return - mean);
  }
  const double stddev = std::sqrt(ss / 24.0);
  CHECK(r.stats.mean == doctest::Approx(mean).epsilon(1e-12));
  REQUIRE(r.stats.stddev.has_value());
  CHECK(*r.stats.stddev == doctest::Approx(stddev).epsilon(1e-12));
  CHECK(*r.stats.stddev > 0.0);
}

TEST_CASE("campaign csv round-trips and statistics recompute from it") {
  const CampaignSpec spec{.n_runs = 10, .master_seed = 2024, .workers = 3};
  const CampaignResult r =
      run_campaign(spec, short_env(), ModelParams{}, UncertaintySpec{},
                   DisturbanceConfig{}, zero_controller());
  const std::string path = "mc_roundtrip.csv";
  write_campaign_csv(path, r.runs);
  const std::vector<RunRecord> back = read_campaign_csv(path);
  REQUIRE(back.size() == r.runs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].run_index == r.runs[i].run_index);
    CHECK(back[i].seed == r.runs[i].seed);
    CHECK(back[i].episode_return == r.runs[i].episode_return);
    CHECK(back[i].violated == r.runs[i].violated);
    CHECK(back[i].max_theta_deg == r.runs[i].max_theta_deg);
    CHECK(back[i].max_phi_deg == r.runs[i].max_phi_deg);
  }
  const CampaignStats re = compute_stats(back);
  CHECK(re.mean == doctest::Approx(r.stats.mean).epsilon(1e-12));
  REQUIRE(re.stddev.has_value());
  CHECK(*re.stddev == doctest::Approx(*r.stats.stddev).epsilon(1e-12));
  std::remove(path.c_str());
}

TEST_CASE("campaign artifacts are byte-identical across reruns") {
  const EnvConfig cfg = short_env();
  const CampaignSpec spec{.n_runs = 6, .master_seed = 31415, .workers = 2};
  std::string csv[2], summary[2];
  for (int pass = 0; pass < 2; ++pass) {
    const CampaignResult r =
        run_campaign(spec, cfg, ModelParams{}, UncertaintySpec{},
                     DisturbanceConfig{}, zero_controller());
    write_campaign_csv("mc_bytes.csv", r.runs);
    write_campaign_summary("mc_bytes.txt", spec, r.stats);
    csv[pass] = slurp("mc_bytes.csv");
    summary[pass] = slurp("mc_bytes.txt");
  }
  CHECK(csv[0] == csv[1]);
  CHECK(summary[0] == summary[1]);
  std::remove("mc_bytes.csv");
  std::remove("mc_bytes.txt");
}

TEST_CASE("violating runs are counted and flagged in the csv") {
  EnvConfig cfg = short_env();
  cfg.obs_limit = 0.02;  // some disturbance draws will leave this envelope
  const CampaignSpec spec{.n_runs = 20, .master_seed = 11, .workers = 2};
  const CampaignResult r =
      run_campaign(spec, cfg, ModelParams{}, UncertaintySpec{},
                   DisturbanceConfig{}, zero_controller());
  int flagged = 0;
  for (const RunRecord& rec : r.runs) flagged += rec.violated ? 1 : 0;
  CHECK(flagged == r.stats.violation_count);
  CHECK(flagged > 0);  // the tiny envelope must catch at least one run

  write_campaign_csv("mc_violation.csv", r.runs);
  const auto back = read_campaign_csv("mc_violation.csv");
  int flagged_back = 0;
  for (const RunRecord& rec : back) flagged_back += rec.violated ? 1 : 0;
  CHECK(flagged_back == flagged);
  std::remove("mc_violation.csv");
}

TEST_CASE("malformed campaign csv inputs are rejected") {
  CHECK_THROWS_AS(read_campaign_csv("does_not_exist.csv"), std::runtime_error);

  {
    std::ofstream out("mc_bad_header.csv");
    out << "run,seed\n0,1\n";
  }
  CHECK_THROWS_AS(read_campaign_csv("mc_bad_header.csv"), std::runtime_error);
  std::remove("mc_bad_header.csv");

  {
    std::ofstream out("mc_bad_row.csv");
    out << "run_index,seed,return,violated,max_theta_deg,max_phi_deg\n";
    out << "0,12,-1.5,0\n";  // two fields short
  }
  CHECK_THROWS_AS(read_campaign_csv("mc_bad_row.csv"), std::runtime_error);
  std::remove("mc_bad_row.csv");
}

TEST_CASE("campaign spec validation") {
  CampaignSpec bad;
  bad.n_runs = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.n_runs = 5;
  bad.workers = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(compute_stats({}), std::invalid_argument);
}
