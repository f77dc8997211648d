#include "fipwc/config.hpp"

#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"

using namespace fipwc;

namespace {

RunConfig from_text(const std::string& text, const std::string& profile = "desk") {
  RunConfig cfg = default_run_config();
  apply_profile(cfg, profile);
  merge_config_text(cfg, text, "inline.json");
  cfg.validate();
  return cfg;
}

// the message should carry the source name, the offending key, and a line hint
void check_mentions(const ConfigError& e, const std::string& needle) {
  CHECK(std::string(e.what()).find(needle) != std::string::npos);
}

}  // namespace

TEST_CASE("defaults carry the nominal parameter set") {
  const RunConfig cfg = default_run_config();
  CHECK(cfg.physics.m_t == 0.019);
  CHECK(cfg.physics.m_b == 0.0215);
  CHECK(cfg.physics.m_c == 0.18);
  CHECK(cfg.physics.L == 0.32);
  CHECK(cfg.physics.l == 0.16);
  CHECK(cfg.physics.k1 == 2.0);
  CHECK(cfg.physics.k2 == 8.0);
  CHECK(cfg.physics.b3 == 12.0);
  CHECK(cfg.env.dt == 0.01);
  CHECK(cfg.env.episode_steps == 1000);
  CHECK(cfg.env.force_limit == 10.0);
  CHECK(cfg.agent.gamma == 0.99);
  CHECK(cfg.agent.actor_lr == 0.001);
  CHECK(cfg.agent.batch_size == 512);
  CHECK(cfg.disturbances.cart.kappa == 0.01);
  CHECK(cfg.disturbances.cart.sigma == 0.1);
  CHECK(cfg.disturbances.beam.kappa == 10.0);
  CHECK(cfg.disturbances.beam.sigma_deg == 1.0);
  CHECK(cfg.uncertainty.relative_spread == 0.5);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("angular disturbance settings convert to radians exactly once") {
  DisturbanceSettings d;
  const DisturbanceConfig internal = d.to_internal();
  CHECK(internal.beam.sigma == 0.017453292519943295);
  CHECK(internal.tip.sigma == 0.017453292519943295);
  CHECK(internal.cart.sigma == 0.1);
  CHECK(internal.enable_cart);

  d.enable_cart = false;
  d.tip.sigma_deg = 2.0;
  const DisturbanceConfig off = d.to_internal();
  CHECK(!off.enable_cart);
  CHECK(off.tip.sigma == 2.0 * 0.017453292519943295);
}

TEST_CASE("profiles set the agent scale") {
  RunConfig cfg = default_run_config();
  apply_profile(cfg, "desk");
  CHECK(cfg.agent.total_train_steps == 30000);
  CHECK(cfg.agent.actor_spec.hidden == std::vector<int>{64, 64});
  CHECK(cfg.agent.critic_spec.hidden == std::vector<int>{128, 128});

  apply_profile(cfg, "paper");
  CHECK(cfg.agent.total_train_steps == 100000);
  CHECK(cfg.agent.batch_size == 512);
  CHECK(cfg.agent.actor_spec.hidden.size() == 20);
  CHECK(cfg.agent.actor_spec.hidden[0] == 256);
  CHECK(cfg.agent.critic_spec.hidden.size() == 20);
  CHECK(cfg.agent.critic_spec.hidden[0] == 512);

  CHECK_THROWS_AS(apply_profile(cfg, "laptop"), ConfigError);
}

TEST_CASE("file keys override the profile") {
  const RunConfig cfg = from_text(
      R"({"agent": {"total_train_steps": 5000, "batch_size": 64}})", "paper");
  CHECK(cfg.agent.total_train_steps == 5000);
  CHECK(cfg.agent.batch_size == 64);
  // untouched keys keep the paper scale
  CHECK(cfg.agent.actor_spec.hidden.size() == 20);
}

TEST_CASE("sections merge field by field") {
  const RunConfig cfg = from_text(R"({
    "master_seed": 99,
    "output_dir": "results",
    "physics": {"L": 0.4, "k1": 3.5},
    "uncertainty": {"relative_spread": 0.25},
    "disturbances": {"enable_cart": false,
                     "cart": {"sigma": 0.2},
                     "tip": {"sigma_deg": 0.5}},
    "environment": {"episode_steps": 500,
                    "reward_weights": [1, 1, 1, 1, 1, 1]},
    "agent": {"actor_hidden": [32, 32, 32],
              "exploration": {"ou_sigma": 0.3}},
    "pd": {"kp_theta_grid": [0, 1], "episodes_per_point": 2},
    "campaign": {"n_runs": 7}
  })");
  CHECK(cfg.master_seed == 99);
  CHECK(cfg.output_dir == "results");
  CHECK(cfg.physics.L == 0.4);
  CHECK(cfg.physics.l == 0.2);  // derived from L
  CHECK(cfg.physics.k1 == 3.5);
  CHECK(cfg.physics.k2 == 8.0);  // untouched
  CHECK(cfg.uncertainty.relative_spread == 0.25);
  CHECK(!cfg.disturbances.enable_cart);
  CHECK(cfg.disturbances.cart.sigma == 0.2);
  CHECK(cfg.disturbances.cart.kappa == 0.01);  // untouched
  CHECK(cfg.disturbances.tip.sigma_deg == 0.5);
  CHECK(cfg.env.episode_steps == 500);
  CHECK(cfg.env.reward_weights[0] == 1.0);
  CHECK(cfg.agent.actor_spec.hidden == std::vector<int>{32, 32, 32});
  CHECK(cfg.agent.exploration.ou.sigma == 0.3);
  CHECK(cfg.agent.exploration.ou.kappa == 0.15);  // untouched
  CHECK(cfg.pd.kp_theta == std::vector<double>{0.0, 1.0});
  CHECK(cfg.pd.episodes_per_point == 2);
  CHECK(cfg.campaign.n_runs == 7);
}

TEST_CASE("unknown keys are rejected with a path and line hint") {
  try {
    from_text("{\n  \"physics\": {\n    \"mass\": 1.0\n  }\n}");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    check_mentions(e, "mass");
    check_mentions(e, "physics");
    check_mentions(e, "inline.json:3");
  }

  try {
    from_text(R"({"motor": {}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    check_mentions(e, "motor");
    check_mentions(e, "unknown key");
  }

  CHECK_THROWS_AS(
      from_text(R"({"agent": {"exploration": {"theta": 0.15}}})"),
      ConfigError);
}

TEST_CASE("type mismatches are rejected") {
  CHECK_THROWS_AS(from_text(R"({"environment": {"episode_steps": 1.5}})"),
                  ConfigError);
  CHECK_THROWS_AS(from_text(R"({"disturbances": {"enable_cart": 1}})"),
                  ConfigError);
  CHECK_THROWS_AS(from_text(R"({"master_seed": -4})"), ConfigError);
  CHECK_THROWS_AS(from_text(R"({"output_dir": 12})"), ConfigError);
  CHECK_THROWS_AS(from_text(R"({"physics": {"k1": "strong"}})"), ConfigError);
  CHECK_THROWS_AS(from_text(R"({"agent": {"actor_hidden": [64.5]}})"),
                  ConfigError);
  CHECK_THROWS_AS(
      from_text(R"({"environment": {"reward_weights": [1, 2, 3]}})"),
      ConfigError);
  CHECK_THROWS_AS(from_text(R"({"pd": {"kp_theta_grid": 5}})"), ConfigError);
}

TEST_CASE("malformed json reports the parse position") {
  try {
    from_text("{\n  \"master_seed\": ,\n}");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    check_mentions(e, "inline.json");
    check_mentions(e, "line 2");
  }
}

TEST_CASE("semantic validation failures become config errors") {
  CHECK_THROWS_AS(from_text(R"({"environment": {"dt": -0.5}})"), ConfigError);
  CHECK_THROWS_AS(from_text(R"({"campaign": {"n_runs": 0}})"), ConfigError);
  CHECK_THROWS_AS(from_text(R"({"output_dir": ""})"), ConfigError);
  CHECK_THROWS_AS(from_text(R"({"physics": {"m_c": -1}})"), ConfigError);
}

TEST_CASE("resolved echo reloads to the identical config") {
  RunConfig cfg = default_run_config();
  apply_profile(cfg, "desk");
  merge_config_text(cfg, R"({
    "master_seed": 1234,
    "physics": {"L": 0.36, "b3": 10.5},
    "disturbances": {"beam": {"sigma_deg": 1.75}},
    "agent": {"total_train_steps": 12000},
    "campaign": {"n_runs": 3}
  })", "inline.json");
  cfg.validate();

  const std::string echo = resolved_config_json(cfg);

  // reload the echo under the OTHER profile: every key must be pinned by the
  // echo, so the profile choice cannot matter
  RunConfig back = default_run_config();
  apply_profile(back, "paper");
  merge_config_text(back, echo, "echo.json");
  back.validate();

  CHECK(back.master_seed == cfg.master_seed);
  CHECK(back.output_dir == cfg.output_dir);
  CHECK(back.physics.L == cfg.physics.L);
  CHECK(back.physics.l == cfg.physics.l);
  CHECK(back.physics.b3 == cfg.physics.b3);
  CHECK(back.uncertainty.relative_spread == cfg.uncertainty.relative_spread);
  CHECK(back.disturbances.beam.sigma_deg == cfg.disturbances.beam.sigma_deg);
  CHECK(back.disturbances.enable_cart == cfg.disturbances.enable_cart);
  CHECK(back.env.episode_steps == cfg.env.episode_steps);
  CHECK(back.env.reward_weights == cfg.env.reward_weights);
  CHECK(back.agent.total_train_steps == cfg.agent.total_train_steps);
  CHECK(back.agent.actor_spec.hidden == cfg.agent.actor_spec.hidden);
  CHECK(back.agent.critic_spec.hidden == cfg.agent.critic_spec.hidden);
  CHECK(back.agent.exploration.ou.sigma == cfg.agent.exploration.ou.sigma);
  CHECK(back.pd.kp_theta == cfg.pd.kp_theta);
  CHECK(back.pd.feasible_mean_reward == cfg.pd.feasible_mean_reward);
  CHECK(back.campaign.n_runs == cfg.campaign.n_runs);

  // and the echo of the reload is byte-identical, so echoes are stable
  CHECK(resolved_config_json(back) == echo);
}

TEST_CASE("load_run_config reads a file and rejects a missing one") {
  const std::string path = "cfg_roundtrip_test.json";
  {
    std::ofstream out(path);
    out << R"({"master_seed": 77, "campaign": {"n_runs": 2}})";
  }
  const RunConfig cfg = load_run_config(path, "desk");
  CHECK(cfg.master_seed == 77);
  CHECK(cfg.campaign.n_runs == 2);
  CHECK(cfg.agent.total_train_steps == 30000);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_run_config("no_such_config.json", "desk"), ConfigError);
  // empty path means pure defaults plus profile
  const RunConfig bare = load_run_config("", "desk");
  CHECK(bare.master_seed == 1);
}

TEST_CASE("write_resolved_config writes the same bytes as the string form") {
  const RunConfig cfg = default_run_config();
  const std::string path = "cfg_echo_test.json";
  write_resolved_config(path, cfg);
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text == resolved_config_json(cfg));
  std::remove(path.c_str());
}
