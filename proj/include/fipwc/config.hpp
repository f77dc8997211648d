#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "fipwc/ddpg.hpp"
#include "fipwc/environment.hpp"
#include "fipwc/pd.hpp"
#include "fipwc/stochastic.hpp"

namespace fipwc {

// Configuration problems get their own type so the CLI can map them to a
// dedicated exit code, distinct from runtime failures.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Angular disturbance processes are configured in deg/s because that is how
// people reason about them; the conversion to rad/s happens exactly once, in
// to_internal(), so echoing and reloading a config never drifts the value.
struct AngularOuSettings {
  double kappa = 10.0;
  double mean_deg = 0.0;
  double sigma_deg = 1.0;
};

struct DisturbanceSettings {
  bool enable_cart = true;
  OuParams cart{0.01, 0.0, 0.1};  // m/s units, used as-is
  AngularOuSettings beam;
  AngularOuSettings tip;

  DisturbanceConfig to_internal() const;
};

struct CampaignSettings {
  int n_runs = 100;
};

// Everything a run needs, in one file. Field defaults are the nominal
// parameter set; profiles adjust only the agent scale.
struct RunConfig {
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  ModelParams physics;
  UncertaintySpec uncertainty;
  DisturbanceSettings disturbances;
  EnvConfig env;
  AgentConfig agent = AgentConfig::desk();
  PdSearchSpec pd;
  CampaignSettings campaign;

  // throws ConfigError with the offending field spelled out
  void validate() const;
};

RunConfig default_run_config();

// profile is "desk" or "paper"; anything else throws ConfigError
void apply_profile(RunConfig& cfg, const std::string& profile);

// Applies the keys present in the JSON text on top of cfg. Unknown keys,
// type mismatches, and malformed JSON throw ConfigError with the source name
// and a line reference. The beam centre offset is derived as L/2 and is not
// a key.
void merge_config_text(RunConfig& cfg, const std::string& json_text,
                       const std::string& source_name);

// default_run_config + profile + optional file merge + validate
RunConfig load_run_config(const std::string& path,
                          const std::string& profile = "desk");

// Complete resolved state as JSON: loading the echo reproduces the config
// regardless of profile, because every key is written explicitly.
std::string resolved_config_json(const RunConfig& cfg);
void write_resolved_config(const std::string& path, const RunConfig& cfg);

}  // namespace fipwc
