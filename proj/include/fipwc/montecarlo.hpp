#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fipwc/environment.hpp"

namespace fipwc {

// Maps the current state to a force request; the environment clamps it.
// Campaign workers call one shared controller concurrently, so it must be
// safe to invoke from several threads at once (pure functions and const
// network evaluation both qualify).
using Controller = std::function<double(const StateVector&)>;

// Called after every step with the step index (0-based) and its result.
using StepObserver = std::function<void(int step, const StepResult& sr)>;

struct EpisodeResult {
  double episode_return = 0.0;  // undiscounted reward sum
  double max_abs_theta = 0.0;   // rad, over post-step states
  double max_abs_phi = 0.0;     // rad
  bool violated = false;        // left the envelope and ended early
};

// One full episode from reset(seed) to done. Limit violations are folded
// into the result, not raised; integrator errors propagate to the caller.
EpisodeResult run_episode(const Controller& controller, Environment& env,
                          std::uint64_t seed,
                          const StepObserver* observer = nullptr);

struct CampaignSpec {
  int n_runs = 100;
  std::uint64_t master_seed = 1;
  int workers = 1;

  void validate() const;
};

// One CSV row. Angles are stored in degrees because the persisted files are
// meant for human inspection and plotting.
struct RunRecord {
  int run_index = 0;
  std::uint64_t seed = 0;
  double episode_return = 0.0;
  bool violated = false;
  double max_theta_deg = 0.0;
  double max_phi_deg = 0.0;
};

struct CampaignStats {
  double mean = 0.0;
  std::optional<double> stddev;  // sample (n-1); absent when n == 1
  int violation_count = 0;
};

struct CampaignResult {
  std::vector<RunRecord> runs;  // indexed by run_index
  CampaignStats stats;
  double wall_clock_seconds = 0.0;  // operator feedback only, never persisted
};

// Seed for one run, bound to the index so results do not depend on which
// worker picks the run up.
std::uint64_t campaign_run_seed(std::uint64_t master_seed, int run_index);

// n_runs independent episodes, stride-partitioned over spec.workers threads,
// each with its own environment built from the given pieces. A run that
// throws is recorded as violated with the violation reward as its return
// instead of aborting the campaign.
CampaignResult run_campaign(const CampaignSpec& spec, const EnvConfig& env_cfg,
                            const ModelParams& nominal,
                            const UncertaintySpec& uncertainty,
                            const DisturbanceConfig& disturbances,
                            const Controller& controller);

// Fixed-order aggregation over the records, so the numbers are identical no
// matter how the runs were scheduled.
CampaignStats compute_stats(const std::vector<RunRecord>& runs);

// run_index,seed,return,violated,max_theta_deg,max_phi_deg with doubles in
// round-trip precision.
void write_campaign_csv(const std::string& path,
                        const std::vector<RunRecord>& runs);
std::vector<RunRecord> read_campaign_csv(const std::string& path);

// key=value summary of the campaign. Deliberately excludes wall clock so
// that reruns of the same seed produce byte-identical files.
void write_campaign_summary(const std::string& path, const CampaignSpec& spec,
                            const CampaignStats& stats);

}  // namespace fipwc
