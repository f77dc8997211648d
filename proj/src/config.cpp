#include "fipwc/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fipwc {

namespace {

using nlohmann::json;

constexpr double kDegToRad = 0.017453292519943295;

// best-effort line lookup for post-parse errors: the DOM has no positions,
// so find the first occurrence of the quoted key in the raw text
int line_of_key(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  const std::size_t pos = text.find(needle);
  if (pos == std::string::npos) return 0;
  int line = 1;
  for (std::size_t i = 0; i < pos; ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

struct Source {
  const std::string& text;
  const std::string& name;
};

[[noreturn]] void fail(const Source& src, const std::string& path,
                       const std::string& key, const std::string& why) {
  std::ostringstream msg;
  msg << src.name;
  if (const int line = line_of_key(src.text, key)) msg << ":" << line;
  msg << ": " << why << " \"" << key << "\"";
  if (!path.empty()) msg << " in " << path;
  throw ConfigError(msg.str());
}

void check_keys(const Source& src, const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail(src, path, item.key(), "unknown key");
  }
}

void read_double(const Source& src, const json& obj, const std::string& path,
                 const char* key, double& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number()) fail(src, path, key, "expected a number for");
  out = it->get<double>();
}

void read_int(const Source& src, const json& obj, const std::string& path,
              const char* key, int& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_integer() && !it->is_number_unsigned()) {
    fail(src, path, key, "expected an integer for");
  }
  out = it->get<int>();
}

void read_i64(const Source& src, const json& obj, const std::string& path,
              const char* key, std::int64_t& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_integer() && !it->is_number_unsigned()) {
    fail(src, path, key, "expected an integer for");
  }
  out = it->get<std::int64_t>();
}

void read_u64(const Source& src, const json& obj, const std::string& path,
              const char* key, std::uint64_t& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    fail(src, path, key, "expected a nonnegative integer for");
  }
  out = it->get<std::uint64_t>();
}

void read_bool(const Source& src, const json& obj, const std::string& path,
               const char* key, bool& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_boolean()) fail(src, path, key, "expected true or false for");
  out = it->get<bool>();
}

void read_string(const Source& src, const json& obj, const std::string& path,
                 const char* key, std::string& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_string()) fail(src, path, key, "expected a string for");
  out = it->get<std::string>();
}

std::vector<double> number_array(const Source& src, const json& node,
                                 const std::string& path, const char* key) {
  if (!node.is_array()) fail(src, path, key, "expected an array for");
  std::vector<double> out;
  out.reserve(node.size());
  for (const auto& v : node) {
    if (!v.is_number()) fail(src, path, key, "expected numeric entries in");
    out.push_back(v.get<double>());
  }
  return out;
}

void read_double_list(const Source& src, const json& obj,
                      const std::string& path, const char* key,
                      std::vector<double>& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  out = number_array(src, *it, path, key);
}

void read_fixed6(const Source& src, const json& obj, const std::string& path,
                 const char* key, std::array<double, 6>& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::vector<double> v = number_array(src, *it, path, key);
  if (v.size() != 6) fail(src, path, key, "expected exactly 6 entries for");
  for (int i = 0; i < 6; ++i) out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
}

void read_hidden(const Source& src, const json& obj, const std::string& path,
                 const char* key, std::vector<int>& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_array()) fail(src, path, key, "expected an array for");
  std::vector<int> widths;
  widths.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      fail(src, path, key, "expected integer widths in");
    }
    widths.push_back(v.get<int>());
  }
  out = widths;
}

void merge_physics(const Source& src, const json& obj, ModelParams& p) {
  const std::string path = "physics";
  check_keys(src, obj, path,
             {"m_t", "m_b", "m_c", "L", "k1", "k2", "b1", "b2", "b3", "g"});
  read_double(src, obj, path, "m_t", p.m_t);
  read_double(src, obj, path, "m_b", p.m_b);
  read_double(src, obj, path, "m_c", p.m_c);
  read_double(src, obj, path, "L", p.L);
  read_double(src, obj, path, "k1", p.k1);
  read_double(src, obj, path, "k2", p.k2);
  read_double(src, obj, path, "b1", p.b1);
  read_double(src, obj, path, "b2", p.b2);
  read_double(src, obj, path, "b3", p.b3);
  read_double(src, obj, path, "g", p.g);
  p.l = p.L / 2.0;  // derived, never a key
}

void merge_angular(const Source& src, const json& obj, const std::string& path,
                   AngularOuSettings& a) {
  check_keys(src, obj, path, {"kappa", "mean_deg", "sigma_deg"});
  read_double(src, obj, path, "kappa", a.kappa);
  read_double(src, obj, path, "mean_deg", a.mean_deg);
  read_double(src, obj, path, "sigma_deg", a.sigma_deg);
}

void merge_disturbances(const Source& src, const json& obj,
                        DisturbanceSettings& d) {
  const std::string path = "disturbances";
  check_keys(src, obj, path, {"enable_cart", "cart", "beam", "tip"});
  read_bool(src, obj, path, "enable_cart", d.enable_cart);
  if (const auto it = obj.find("cart"); it != obj.end()) {
    if (!it->is_object()) fail(src, path, "cart", "expected an object for");
    check_keys(src, *it, path + ".cart", {"kappa", "mean", "sigma"});
    read_double(src, *it, path + ".cart", "kappa", d.cart.kappa);
    read_double(src, *it, path + ".cart", "mean", d.cart.mu);
    read_double(src, *it, path + ".cart", "sigma", d.cart.sigma);
  }
  if (const auto it = obj.find("beam"); it != obj.end()) {
    if (!it->is_object()) fail(src, path, "beam", "expected an object for");
    merge_angular(src, *it, path + ".beam", d.beam);
  }
  if (const auto it = obj.find("tip"); it != obj.end()) {
    if (!it->is_object()) fail(src, path, "tip", "expected an object for");
    merge_angular(src, *it, path + ".tip", d.tip);
  }
}

void merge_environment(const Source& src, const json& obj, EnvConfig& e) {
  const std::string path = "environment";
  check_keys(src, obj, path,
             {"dt", "episode_steps", "force_limit", "obs_limit",
              "violation_reward", "reward_weights", "control_effort_weight",
              "desired_state"});
  read_double(src, obj, path, "dt", e.dt);
  read_int(src, obj, path, "episode_steps", e.episode_steps);
  read_double(src, obj, path, "force_limit", e.force_limit);
  read_double(src, obj, path, "obs_limit", e.obs_limit);
  read_double(src, obj, path, "violation_reward", e.violation_reward);
  read_fixed6(src, obj, path, "reward_weights", e.reward_weights);
  read_double(src, obj, path, "control_effort_weight", e.control_effort_weight);
  read_fixed6(src, obj, path, "desired_state", e.desired_state);
}

void merge_agent(const Source& src, const json& obj, AgentConfig& a) {
  const std::string path = "agent";
  check_keys(src, obj, path,
             {"actor_hidden", "critic_hidden", "gamma", "actor_lr",
              "critic_lr", "tau", "batch_size", "warmup_steps",
              "total_train_steps", "replay_capacity",
              "checkpoint_every_episodes", "exploration"});
  read_hidden(src, obj, path, "actor_hidden", a.actor_spec.hidden);
  read_hidden(src, obj, path, "critic_hidden", a.critic_spec.hidden);
  read_double(src, obj, path, "gamma", a.gamma);
  read_double(src, obj, path, "actor_lr", a.actor_lr);
  read_double(src, obj, path, "critic_lr", a.critic_lr);
  read_double(src, obj, path, "tau", a.tau);
  read_int(src, obj, path, "batch_size", a.batch_size);
  read_int(src, obj, path, "warmup_steps", a.warmup_steps);
  read_i64(src, obj, path, "total_train_steps", a.total_train_steps);
  read_int(src, obj, path, "replay_capacity", a.replay_capacity);
  read_int(src, obj, path, "checkpoint_every_episodes",
           a.checkpoint_every_episodes);
  if (const auto it = obj.find("exploration"); it != obj.end()) {
    if (!it->is_object()) fail(src, path, "exploration", "expected an object for");
    const std::string epath = path + ".exploration";
    check_keys(src, *it, epath,
               {"ou_kappa", "ou_mean", "ou_sigma", "epsilon_start",
                "epsilon_end", "decay_fraction"});
    read_double(src, *it, epath, "ou_kappa", a.exploration.ou.kappa);
    read_double(src, *it, epath, "ou_mean", a.exploration.ou.mu);
    read_double(src, *it, epath, "ou_sigma", a.exploration.ou.sigma);
    read_double(src, *it, epath, "epsilon_start", a.exploration.epsilon_start);
    read_double(src, *it, epath, "epsilon_end", a.exploration.epsilon_end);
    read_double(src, *it, epath, "decay_fraction", a.exploration.decay_fraction);
  }
}

void merge_pd(const Source& src, const json& obj, PdSearchSpec& p) {
  const std::string path = "pd";
  check_keys(src, obj, path,
             {"kp_theta_grid", "kd_theta_grid", "kp_z_grid", "kd_z_grid",
              "episodes_per_point", "feasible_mean_reward"});
  read_double_list(src, obj, path, "kp_theta_grid", p.kp_theta);
  read_double_list(src, obj, path, "kd_theta_grid", p.kd_theta);
  read_double_list(src, obj, path, "kp_z_grid", p.kp_z);
  read_double_list(src, obj, path, "kd_z_grid", p.kd_z);
  read_int(src, obj, path, "episodes_per_point", p.episodes_per_point);
  read_double(src, obj, path, "feasible_mean_reward", p.feasible_mean_reward);
}

json angular_json(const AngularOuSettings& a) {
  return {{"kappa", a.kappa}, {"mean_deg", a.mean_deg}, {"sigma_deg", a.sigma_deg}};
}

std::vector<int> hidden_of(const MlpSpec& spec) { return spec.hidden; }

}  // namespace

DisturbanceConfig DisturbanceSettings::to_internal() const {
  DisturbanceConfig d;
  d.enable_cart = enable_cart;
  d.cart = cart;
  d.beam = OuParams{beam.kappa, beam.mean_deg * kDegToRad,
                    beam.sigma_deg * kDegToRad};
  d.tip = OuParams{tip.kappa, tip.mean_deg * kDegToRad,
                   tip.sigma_deg * kDegToRad};
  return d;
}

void RunConfig::validate() const {
  try {
    physics.validate();
    uncertainty.validate();
    disturbances.to_internal().validate();
    env.validate();
    agent.validate();
    pd.validate();
    if (campaign.n_runs < 1) {
      throw std::invalid_argument("campaign.n_runs must be >= 1");
    }
    if (output_dir.empty()) {
      throw std::invalid_argument("output_dir must not be empty");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

RunConfig default_run_config() { return RunConfig{}; }

void apply_profile(RunConfig& cfg, const std::string& profile) {
  if (profile == "desk") {
    cfg.agent = AgentConfig::desk();
  } else if (profile == "paper") {
    cfg.agent = AgentConfig::paper();
  } else {
    throw ConfigError("unknown profile \"" + profile +
                      "\" (expected desk or paper)");
  }
}

void merge_config_text(RunConfig& cfg, const std::string& json_text,
                       const std::string& source_name) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    // the library message already carries "at line L, column C"
    throw ConfigError(source_name + ": " + e.what());
  }
  const Source src{json_text, source_name};
  if (!root.is_object()) {
    throw ConfigError(source_name + ": top level must be a JSON object");
  }
  check_keys(src, root, "",
             {"master_seed", "output_dir", "physics", "uncertainty",
              "disturbances", "environment", "agent", "pd", "campaign"});
  read_u64(src, root, "", "master_seed", cfg.master_seed);
  read_string(src, root, "", "output_dir", cfg.output_dir);
  if (const auto it = root.find("physics"); it != root.end()) {
    if (!it->is_object()) fail(src, "", "physics", "expected an object for");
    merge_physics(src, *it, cfg.physics);
  }
  if (const auto it = root.find("uncertainty"); it != root.end()) {
    if (!it->is_object()) fail(src, "", "uncertainty", "expected an object for");
    check_keys(src, *it, "uncertainty", {"relative_spread"});
    read_double(src, *it, "uncertainty", "relative_spread",
                cfg.uncertainty.relative_spread);
  }
  if (const auto it = root.find("disturbances"); it != root.end()) {
    if (!it->is_object()) fail(src, "", "disturbances", "expected an object for");
    merge_disturbances(src, *it, cfg.disturbances);
  }
  if (const auto it = root.find("environment"); it != root.end()) {
    if (!it->is_object()) fail(src, "", "environment", "expected an object for");
    merge_environment(src, *it, cfg.env);
  }
  if (const auto it = root.find("agent"); it != root.end()) {
    if (!it->is_object()) fail(src, "", "agent", "expected an object for");
    merge_agent(src, *it, cfg.agent);
  }
  if (const auto it = root.find("pd"); it != root.end()) {
    if (!it->is_object()) fail(src, "", "pd", "expected an object for");
    merge_pd(src, *it, cfg.pd);
  }
  if (const auto it = root.find("campaign"); it != root.end()) {
    if (!it->is_object()) fail(src, "", "campaign", "expected an object for");
    check_keys(src, *it, "campaign", {"n_runs"});
    read_int(src, *it, "campaign", "n_runs", cfg.campaign.n_runs);
  }
}

RunConfig load_run_config(const std::string& path, const std::string& profile) {
  RunConfig cfg = default_run_config();
  apply_profile(cfg, profile);
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    merge_config_text(cfg, ss.str(), path);
  }
  cfg.validate();
  return cfg;
}

std::string resolved_config_json(const RunConfig& cfg) {
  json j;
  j["master_seed"] = cfg.master_seed;
  j["output_dir"] = cfg.output_dir;
  j["physics"] = {{"m_t", cfg.physics.m_t}, {"m_b", cfg.physics.m_b},
                  {"m_c", cfg.physics.m_c}, {"L", cfg.physics.L},
                  {"k1", cfg.physics.k1},   {"k2", cfg.physics.k2},
                  {"b1", cfg.physics.b1},   {"b2", cfg.physics.b2},
                  {"b3", cfg.physics.b3},   {"g", cfg.physics.g}};
  j["uncertainty"] = {{"relative_spread", cfg.uncertainty.relative_spread}};
  j["disturbances"] = {{"enable_cart", cfg.disturbances.enable_cart},
                       {"cart",
                        {{"kappa", cfg.disturbances.cart.kappa},
                         {"mean", cfg.disturbances.cart.mu},
                         {"sigma", cfg.disturbances.cart.sigma}}},
                       {"beam", angular_json(cfg.disturbances.beam)},
                       {"tip", angular_json(cfg.disturbances.tip)}};
  j["environment"] = {{"dt", cfg.env.dt},
                      {"episode_steps", cfg.env.episode_steps},
                      {"force_limit", cfg.env.force_limit},
                      {"obs_limit", cfg.env.obs_limit},
                      {"violation_reward", cfg.env.violation_reward},
                      {"reward_weights", cfg.env.reward_weights},
                      {"control_effort_weight", cfg.env.control_effort_weight},
                      {"desired_state", cfg.env.desired_state}};
  j["agent"] = {{"actor_hidden", hidden_of(cfg.agent.actor_spec)},
                {"critic_hidden", hidden_of(cfg.agent.critic_spec)},
                {"gamma", cfg.agent.gamma},
                {"actor_lr", cfg.agent.actor_lr},
                {"critic_lr", cfg.agent.critic_lr},
                {"tau", cfg.agent.tau},
                {"batch_size", cfg.agent.batch_size},
                {"warmup_steps", cfg.agent.warmup_steps},
                {"total_train_steps", cfg.agent.total_train_steps},
                {"replay_capacity", cfg.agent.replay_capacity},
                {"checkpoint_every_episodes", cfg.agent.checkpoint_every_episodes},
                {"exploration",
                 {{"ou_kappa", cfg.agent.exploration.ou.kappa},
                  {"ou_mean", cfg.agent.exploration.ou.mu},
                  {"ou_sigma", cfg.agent.exploration.ou.sigma},
                  {"epsilon_start", cfg.agent.exploration.epsilon_start},
                  {"epsilon_end", cfg.agent.exploration.epsilon_end},
                  {"decay_fraction", cfg.agent.exploration.decay_fraction}}}};
  j["pd"] = {{"kp_theta_grid", cfg.pd.kp_theta},
             {"kd_theta_grid", cfg.pd.kd_theta},
             {"kp_z_grid", cfg.pd.kp_z},
             {"kd_z_grid", cfg.pd.kd_z},
             {"episodes_per_point", cfg.pd.episodes_per_point},
             {"feasible_mean_reward", cfg.pd.feasible_mean_reward}};
  j["campaign"] = {{"n_runs", cfg.campaign.n_runs}};
  return j.dump(2) + "\n";
}

void write_resolved_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_resolved_config: cannot open " + path);
  out << resolved_config_json(cfg);
  if (!out) throw std::runtime_error("write_resolved_config: write failed");
}

}  // namespace fipwc
