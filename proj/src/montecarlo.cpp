#include "fipwc/montecarlo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fipwc/rng.hpp"

namespace fipwc {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

}  // namespace

EpisodeResult run_episode(const Controller& controller, Environment& env,
                          std::uint64_t seed, const StepObserver* observer) {
  env.reset(seed);
  EpisodeResult result;
  int step = 0;
  while (!env.done()) {
    const double force = controller(env.state());
    const StepResult sr = env.step(force);
    result.episode_return += sr.reward;
    result.max_abs_theta =
        std::max(result.max_abs_theta, std::fabs(sr.next_state.theta));
    result.max_abs_phi =
        std::max(result.max_abs_phi, std::fabs(sr.next_state.phi));
    if (sr.info.violation) result.violated = true;
    if (observer) (*observer)(step, sr);
    ++step;
  }
  return result;
}

void CampaignSpec::validate() const {
  if (n_runs < 1) throw std::invalid_argument("campaign: n_runs must be >= 1");
  if (workers < 1) throw std::invalid_argument("campaign: workers must be >= 1");
}

std::uint64_t campaign_run_seed(std::uint64_t master_seed, int run_index) {
  return derive_stream(derive_stream(master_seed, stream::run),
                       static_cast<std::uint64_t>(run_index));
}

CampaignResult run_campaign(const CampaignSpec& spec, const EnvConfig& env_cfg,
                            const ModelParams& nominal,
                            const UncertaintySpec& uncertainty,
                            const DisturbanceConfig& disturbances,
                            const Controller& controller) {
  spec.validate();
  env_cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  CampaignResult result;
  result.runs.resize(static_cast<std::size_t>(spec.n_runs));

  // each worker owns a slot range, so records land at their run index and
  // no locking is needed
  auto run_range = [&](int begin, int stride) {
    Environment env(env_cfg, nominal, uncertainty, disturbances);
    for (int i = begin; i < spec.n_runs; i += stride) {
      RunRecord& rec = result.runs[static_cast<std::size_t>(i)];
      rec.run_index = i;
      rec.seed = campaign_run_seed(spec.master_seed, i);
      try {
        const EpisodeResult ep = run_episode(controller, env, rec.seed);
        rec.episode_return = ep.episode_return;
        rec.violated = ep.violated;
        rec.max_theta_deg = ep.max_abs_theta * kRadToDeg;
        rec.max_phi_deg = ep.max_abs_phi * kRadToDeg;
      } catch (const std::exception&) {
        // numerical failure inside the integrator counts as leaving the
        // envelope; the campaign keeps going
        rec.episode_return = env_cfg.violation_reward;
        rec.violated = true;
        rec.max_theta_deg = 0.0;
        rec.max_phi_deg = 0.0;
      }
    }
  };

  const int workers = std::min(spec.workers, spec.n_runs);
  if (workers == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_range, w, workers);
    for (auto& t : pool) t.join();
  }

  result.stats = compute_stats(result.runs);
  result.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

CampaignStats compute_stats(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw std::invalid_argument("compute_stats: no runs");
  CampaignStats stats;
  const std::size_t n = runs.size();
  double sum = 0.0;
  for (const RunRecord& r : runs) {
    sum += r.episode_return;
    if (r.violated) ++stats.violation_count;
  }
  stats.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (const RunRecord& r : runs) {
      const double d = r.episode_return - stats.mean;
      ss += d * d;
    }
    stats.stddev = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return stats;
}

void write_campaign_csv(const std::string& path,
                        const std::vector<RunRecord>& runs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_campaign_csv: cannot open " + path);
  out << "run_index,seed,return,violated,max_theta_deg,max_phi_deg\n";
  char buf[160];
  for (const RunRecord& r : runs) {
    std::snprintf(buf, sizeof(buf), "%d,%llu,%.17g,%d,%.17g,%.17g\n",
                  r.run_index, static_cast<unsigned long long>(r.seed),
                  r.episode_return, r.violated ? 1 : 0, r.max_theta_deg,
                  r.max_phi_deg);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_campaign_csv: write failed");
}

std::vector<RunRecord> read_campaign_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_campaign_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "run_index,seed,return,violated,max_theta_deg,max_phi_deg") {
    throw std::runtime_error("read_campaign_csv: bad header in " + path);
  }
  std::vector<RunRecord> runs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    RunRecord r;
    unsigned long long seed = 0;
    int violated = 0;
    const int got =
        std::sscanf(line.c_str(), "%d,%llu,%lg,%d,%lg,%lg", &r.run_index,
                    &seed, &r.episode_return, &violated, &r.max_theta_deg,
                    &r.max_phi_deg);
    if (got != 6) {
      throw std::runtime_error("read_campaign_csv: malformed row at " + path +
                               ":" + std::to_string(line_no));
    }
    r.seed = seed;
    r.violated = violated != 0;
    runs.push_back(r);
  }
  return runs;
}

void write_campaign_summary(const std::string& path, const CampaignSpec& spec,
                            const CampaignStats& stats) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("write_campaign_summary: cannot open " + path);
  }
  char buf[96];
  out << "n_runs=" << spec.n_runs << "\n";
  out << "master_seed=" << spec.master_seed << "\n";
  std::snprintf(buf, sizeof(buf), "mean_return=%.17g\n", stats.mean);
  out << buf;
  if (stats.stddev.has_value()) {
    std::snprintf(buf, sizeof(buf), "std_return=%.17g\n", *stats.stddev);
    out << buf;
  }
  out << "violations=" << stats.violation_count << "\n";
  if (!out) throw std::runtime_error("write_campaign_summary: write failed");
}

}  // namespace fipwc
