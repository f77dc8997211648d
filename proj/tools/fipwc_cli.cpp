#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fipwc/config.hpp"
#include "fipwc/ddpg.hpp"
#include "fipwc/montecarlo.hpp"
#include "fipwc/pd.hpp"
#include "fipwc/rng.hpp"

namespace fs = std::filesystem;
using namespace fipwc;

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

struct GlobalOpts {
  std::string config_path;
  std::string profile = "desk";
  std::string out_override;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int workers = 1;
  bool no_cart = false;
};

// precedence, lowest to highest: built-in defaults, profile, FIPWC_OUT_DIR,
// config file, command-line flags
RunConfig resolve_config(const GlobalOpts& g) {
  RunConfig cfg = default_run_config();
  apply_profile(cfg, g.profile);
  if (const char* env_out = std::getenv("FIPWC_OUT_DIR")) {
    if (*env_out) cfg.output_dir = env_out;
  }
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw ConfigError("cannot open config file " + g.config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    merge_config_text(cfg, ss.str(), g.config_path);
  }
  if (g.seed_given) cfg.master_seed = g.seed;
  if (!g.out_override.empty()) cfg.output_dir = g.out_override;
  if (g.no_cart) cfg.disturbances.enable_cart = false;
  cfg.validate();
  return cfg;
}

void prepare_output(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  write_resolved_config(cfg.output_dir + "/resolved_config.json", cfg);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Controller make_pd_controller(const PdGains& gains, double limit) {
  return [gains, limit](const StateVector& s) {
    return pd_force(gains, s, limit);
  };
}

Mlp load_actor(const std::string& checkpoint_dir) {
  const std::string path = checkpoint_dir + "/actor.bin";
  Mlp actor = load_checkpoint(path);
  const MlpSpec& spec = actor.spec();
  if (spec.input_dim != kStateFeatureDim || spec.output_dim != 1 ||
      spec.output_activation != OutputActivation::kTanh) {
    throw std::runtime_error(path + " is not a policy network");
  }
  return actor;
}

// forward pass with a local workspace, so campaign workers can share one
// frozen network
Controller make_drl_controller(const Mlp& actor, double limit) {
  return [&actor, limit](const StateVector& s) {
    MlpBatch ws;
    const auto obs = state_features(s.as_array());
    return actor.forward_batch(obs.data(), 1, ws)[0] * limit;
  };
}

// Deterministic snapshot score: fixed seeded episodes, half without the
// cart disturbance and half with it, averaged together. Higher is better.
double snapshot_score(const Agent& agent, const RunConfig& cfg,
                      std::uint64_t eval_seed) {
  constexpr int kEpisodesPerSide = 10;
  const Controller policy = [&agent](const StateVector& s) {
    return agent.act(s);
  };
  double sum = 0.0;
  for (int side = 0; side < 2; ++side) {
    DisturbanceSettings ds = cfg.disturbances;
    ds.enable_cart = side == 1;
    Environment env(cfg.env, cfg.physics, cfg.uncertainty, ds.to_internal());
    for (int i = 0; i < kEpisodesPerSide; ++i) {
      const std::uint64_t seed =
          campaign_run_seed(derive_stream(eval_seed, side), i);
      sum += run_episode(policy, env, seed).episode_return;
    }
  }
  return sum / (2.0 * kEpisodesPerSide);
}

int cmd_train(const RunConfig& cfg) {
  prepare_output(cfg);
  Environment env(cfg.env, cfg.physics, cfg.uncertainty,
                  cfg.disturbances.to_internal());
  Agent agent(cfg.agent, cfg.env.force_limit, cfg.master_seed);
  ReplayBuffer buffer(cfg.agent.replay_capacity,
                      derive_stream(cfg.master_seed, stream::replay));
  TrainOptions opts;
  opts.checkpoint_dir = cfg.output_dir + "/checkpoint";

  // rank periodic snapshots on fixed evaluation episodes and keep the best
  // one; late-stage collapse then cannot cost an earlier good policy
  const std::string best_dir = cfg.output_dir + "/checkpoint_best";
  const std::uint64_t eval_seed = derive_stream(cfg.master_seed, stream::eval);
  double best_score = 0.0;
  bool have_best = false;
  opts.on_checkpoint = [&](const Agent& a, const TrainerSnapshot& snap) {
    const double score = snapshot_score(a, cfg, eval_seed);
    const bool better = !have_best || score > best_score;
    std::printf("snapshot at episode %d (step %lld): eval mean %.6g%s\n",
                snap.episode, static_cast<long long>(snap.global_step), score,
                better ? "  <- best so far" : "");
    std::fflush(stdout);
    if (!better) return;
    best_score = score;
    have_best = true;
    fs::create_directories(best_dir);
    save_checkpoint(a.actor(), best_dir + "/actor.bin");
    save_checkpoint(a.critic(), best_dir + "/critic.bin");
    save_checkpoint(a.target_actor(), best_dir + "/target_actor.bin");
    save_checkpoint(a.target_critic(), best_dir + "/target_critic.bin");
    std::ofstream info(best_dir + "/best_info.txt");
    info << "episode=" << snap.episode << "\nstep=" << snap.global_step
         << "\neval_mean=" << fmt17(score) << "\n";
  };

  const std::vector<TrainLogRow> rows =
      train(agent, env, buffer, cfg.master_seed, opts);
  write_training_log(cfg.output_dir + "/training_log.csv", rows);

  double tail_mean = 0.0;
  const std::size_t tail = std::min<std::size_t>(rows.size(), 20);
  for (std::size_t i = rows.size() - tail; i < rows.size(); ++i) {
    tail_mean += rows[i].episode_return;
  }
  if (tail) tail_mean /= static_cast<double>(tail);
  std::printf("trained %lld steps over %zu episodes\n",
              static_cast<long long>(cfg.agent.total_train_steps), rows.size());
  std::printf("mean return over the last %zu episodes: %.6g\n", tail, tail_mean);
  std::printf("checkpoint: %s\n", opts.checkpoint_dir.c_str());
  if (have_best) {
    std::printf("best snapshot (eval mean %.6g): %s\n", best_score,
                best_dir.c_str());
  }
  std::printf("training log: %s/training_log.csv\n", cfg.output_dir.c_str());
  return 0;
}

struct SimulateOpts {
  std::string controller = "none";
  std::string gains_path;
  std::string checkpoint_dir;
  std::string csv_name = "trajectory.csv";
};

int cmd_simulate(const RunConfig& cfg, const SimulateOpts& so) {
  prepare_output(cfg);
  Environment env(cfg.env, cfg.physics, cfg.uncertainty,
                  cfg.disturbances.to_internal());

  std::optional<Mlp> actor;
  Controller controller;
  if (so.controller == "none") {
    controller = [](const StateVector&) { return 0.0; };
  } else if (so.controller == "pd") {
    const std::string path =
        so.gains_path.empty() ? cfg.output_dir + "/pd_gains.txt" : so.gains_path;
    controller = make_pd_controller(load_gains(path), cfg.env.force_limit);
  } else if (so.controller == "drl") {
    const std::string dir = so.checkpoint_dir.empty()
                                ? cfg.output_dir + "/checkpoint"
                                : so.checkpoint_dir;
    actor.emplace(load_actor(dir));
    controller = make_drl_controller(*actor, cfg.env.force_limit);
  } else {
    throw ConfigError("unknown controller \"" + so.controller +
                      "\" (expected none, pd, or drl)");
  }

  const std::string csv_path = cfg.output_dir + "/" + so.csv_name;
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot open " + csv_path);
  csv << "time,z,z_dot,phi,phi_dot,theta,theta_dot,phi_deg,theta_deg,force,"
         "d_z_dot,d_phi_dot,d_theta_dot\n";
  char buf[512];
  auto write_row = [&](double t, const StateVector& s, double force,
                       double dz, double dphi, double dtheta) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g\n",
                  t, s.z, s.z_dot, s.phi, s.phi_dot, s.theta, s.theta_dot,
                  s.phi * kRadToDeg, s.theta * kRadToDeg, force, dz, dphi,
                  dtheta);
    csv << buf;
  };

  const double dt = cfg.env.dt;
  StepObserver observer = [&](int step, const StepResult& sr) {
    write_row((step + 1) * dt, sr.next_state, sr.info.applied_force,
              sr.info.d_cart, sr.info.d_beam, sr.info.d_tip);
  };

  // the reset state leads the file so the series starts at t = 0
  env.reset(cfg.master_seed);
  write_row(0.0, env.state(), 0.0, 0.0, 0.0, 0.0);
  const EpisodeResult r = run_episode(controller, env, cfg.master_seed, &observer);
  if (!csv) throw std::runtime_error("write failed: " + csv_path);
  csv.close();

  std::printf("episode return: %s\n", fmt17(r.episode_return).c_str());
  std::printf("max |theta|: %.4g deg, max |phi|: %.4g deg\n",
              r.max_abs_theta * kRadToDeg, r.max_abs_phi * kRadToDeg);
  if (r.violated) std::printf("episode ended early: state left the envelope\n");
  std::printf("trajectory: %s\n", csv_path.c_str());
  return 0;
}

struct CellDef {
  const char* name;
  bool drl;
  bool cart;
  std::uint64_t tag;
};

constexpr CellDef kCells[] = {
    {"pd_with_cart", false, true, stream::cell_pd_cart},
    {"pd_no_cart", false, false, stream::cell_pd_quiet},
    {"drl_with_cart", true, true, stream::cell_drl_cart},
    {"drl_no_cart", true, false, stream::cell_drl_quiet},
};

struct CampaignOpts {
  std::string cells;  // comma-separated subset, empty = all four
  std::string gains_path;
  std::string checkpoint_dir;
};

std::vector<const CellDef*> select_cells(const std::string& list) {
  std::vector<const CellDef*> out;
  if (list.empty()) {
    for (const CellDef& c : kCells) out.push_back(&c);
    return out;
  }
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = list.find(',', pos);
    const std::string name =
        list.substr(pos, comma == std::string::npos ? comma : comma - pos);
    const CellDef* found = nullptr;
    for (const CellDef& c : kCells) {
      if (name == c.name) found = &c;
    }
    if (!found) {
      throw ConfigError("unknown campaign cell \"" + name +
                        "\" (expected pd_with_cart, pd_no_cart, "
                        "drl_with_cart, or drl_no_cart)");
    }
    out.push_back(found);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

int cmd_campaign(const RunConfig& cfg, const CampaignOpts& co, int workers,
                 bool cart_globally_off) {
  prepare_output(cfg);
  const std::vector<const CellDef*> cells = select_cells(co.cells);

  bool need_pd = false, need_drl = false;
  for (const CellDef* c : cells) (c->drl ? need_drl : need_pd) = true;

  std::optional<PdGains> gains;
  if (need_pd) {
    const std::string path =
        co.gains_path.empty() ? cfg.output_dir + "/pd_gains.txt" : co.gains_path;
    gains = load_gains(path);
  }
  std::optional<Mlp> actor;
  if (need_drl) {
    const std::string dir = co.checkpoint_dir.empty()
                                ? cfg.output_dir + "/checkpoint"
                                : co.checkpoint_dir;
    actor.emplace(load_actor(dir));
  }

  std::string table;
  table += "Reward statistics over " + std::to_string(cfg.campaign.n_runs) +
           " simulations per cell\n\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s%-20s%-28s%s\n", "Controller",
                "Cart disturbance", "Average", "Standard Deviation");
  table += line;

  for (const CellDef* cell : cells) {
    if (cell->cart && cart_globally_off) {
      std::printf("%s: skipped (cart disturbance disabled)\n", cell->name);
      continue;
    }
    DisturbanceSettings ds = cfg.disturbances;
    ds.enable_cart = cell->cart;
    Controller controller =
        cell->drl ? make_drl_controller(*actor, cfg.env.force_limit)
                  : make_pd_controller(*gains, cfg.env.force_limit);
    CampaignSpec spec;
    spec.n_runs = cfg.campaign.n_runs;
    spec.master_seed = derive_stream(cfg.master_seed, cell->tag);
    spec.workers = workers;
    const CampaignResult res =
        run_campaign(spec, cfg.env, cfg.physics, cfg.uncertainty,
                     ds.to_internal(), controller);

    const std::string base = cfg.output_dir + "/" + cell->name;
    write_campaign_csv(base + "_runs.csv", res.runs);
    write_campaign_summary(base + "_summary.txt", spec, res.stats);

    const std::string avg = fmt17(res.stats.mean);
    const std::string sd =
        res.stats.stddev ? fmt17(*res.stats.stddev) : std::string("n/a");
    std::snprintf(line, sizeof(line), "%-12s%-20s%-28s%s\n",
                  cell->drl ? "DRL" : "PD", cell->cart ? "on" : "off",
                  avg.c_str(), sd.c_str());
    table += line;

    std::printf("%s: mean %s  std %s  violations %d  (%.1f s)\n", cell->name,
                avg.c_str(), sd.c_str(), res.stats.violation_count,
                res.wall_clock_seconds);
  }

  const std::string table_path = cfg.output_dir + "/campaign_summary.txt";
  std::ofstream out(table_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + table_path);
  out << table;
  out.close();
  std::printf("\n%s", table.c_str());
  std::printf("summary table: %s\n", table_path.c_str());
  return 0;
}

std::vector<double> parse_grid_values(const std::string& text,
                                      const std::string& axis) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string tok =
        text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size()) {
      throw ConfigError("bad value \"" + tok + "\" for grid axis " + axis);
    }
    values.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (values.empty()) throw ConfigError("empty value list for grid axis " + axis);
  return values;
}

// axis=v,v;axis=v,... with axes kp_theta, kd_theta, kp_z, kd_z; axes not
// mentioned keep their configured lists
void apply_grid_override(PdSearchSpec& spec, const std::string& text) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t semi = text.find(';', pos);
    const std::string part =
        text.substr(pos, semi == std::string::npos ? semi : semi - pos);
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("bad grid fragment \"" + part +
                        "\" (expected axis=v1,v2,...)");
    }
    const std::string axis = part.substr(0, eq);
    const std::vector<double> values = parse_grid_values(part.substr(eq + 1), axis);
    if (axis == "kp_theta") {
      spec.kp_theta = values;
    } else if (axis == "kd_theta") {
      spec.kd_theta = values;
    } else if (axis == "kp_z") {
      spec.kp_z = values;
    } else if (axis == "kd_z") {
      spec.kd_z = values;
    } else {
      throw ConfigError("unknown grid axis \"" + axis +
                        "\" (expected kp_theta, kd_theta, kp_z, or kd_z)");
    }
    if (semi == std::string::npos) break;
    pos = semi + 1;
  }
}

int cmd_tune_pd(const RunConfig& cfg, const std::string& grid, int workers) {
  prepare_output(cfg);
  PdSearchSpec spec = cfg.pd;
  if (!grid.empty()) apply_grid_override(spec, grid);
  spec.validate();

  const PdTuneResult result =
      tune_gains(cfg.env, cfg.physics, cfg.uncertainty,
                 cfg.disturbances.to_internal(), spec, cfg.master_seed, workers);
  const std::string path = cfg.output_dir + "/pd_gains.txt";
  save_gains(path, result.gains, result.mean_reward);

  std::printf("searched %zu grid points\n", spec.grid_size());
  std::printf("best gains: kp_theta=%.17g kd_theta=%.17g kp_z=%.17g kd_z=%.17g\n",
              result.gains.kp_theta, result.gains.kd_theta, result.gains.kp_z,
              result.gains.kd_z);
  std::printf("mean tuning reward: %s\n", fmt17(result.mean_reward).c_str());
  std::printf("gains file: %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flexible pendulum on a cart: training, tuning, simulation, "
               "and reward-statistics campaigns"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--profile", g.profile, "parameter profile: desk or paper")
      ->default_str("desk");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out_override,
                 "output directory (overrides config and FIPWC_OUT_DIR)");
  app.add_option("--workers", g.workers, "worker threads for campaigns and tuning")
      ->check(CLI::PositiveNumber);
  app.add_flag("--no-cart-disturbance", g.no_cart,
               "disable the cart-velocity disturbance");

  CLI::App* train_cmd = app.add_subcommand("train", "train the policy and write a checkpoint");

  SimulateOpts so;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run one episode and write the trajectory");
  sim_cmd->add_option("--controller", so.controller, "none, pd, or drl")
      ->default_str("none");
  sim_cmd->add_option("--gains", so.gains_path, "PD gains file (default <out>/pd_gains.txt)");
  sim_cmd->add_option("--checkpoint", so.checkpoint_dir,
                      "policy checkpoint directory (default <out>/checkpoint)");
  sim_cmd->add_option("--csv", so.csv_name, "trajectory file name")
      ->default_str("trajectory.csv");

  CampaignOpts co;
  CLI::App* camp_cmd = app.add_subcommand("campaign", "reward statistics over many episodes");
  camp_cmd->add_option("--cells", co.cells,
                       "comma-separated subset of pd_with_cart, pd_no_cart, "
                       "drl_with_cart, drl_no_cart (default all)");
  camp_cmd->add_option("--gains", co.gains_path, "PD gains file (default <out>/pd_gains.txt)");
  camp_cmd->add_option("--checkpoint", co.checkpoint_dir,
                       "policy checkpoint directory (default <out>/checkpoint)");

  std::string grid;
  CLI::App* tune_cmd = app.add_subcommand("tune-pd", "grid-search PD gains and write a gains file");
  tune_cmd->add_option("--grid", grid,
                       "override search axes, e.g. kp_theta=0,1;kd_z=0,-2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad invocation is a configuration problem
  }

  try {
    g.seed_given = seed_opt->count() > 0;
    const RunConfig cfg = resolve_config(g);
    if (train_cmd->parsed()) return cmd_train(cfg);
    if (sim_cmd->parsed()) return cmd_simulate(cfg, so);
    if (camp_cmd->parsed()) return cmd_campaign(cfg, co, g.workers, g.no_cart);
    if (tune_cmd->parsed()) return cmd_tune_pd(cfg, grid, g.workers);
    std::fprintf(stderr, "no subcommand selected\n");
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
