#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fipwc/environment.hpp"
#include "fipwc/neural.hpp"
#include "fipwc/rng.hpp"
#include "fipwc/stochastic.hpp"

namespace fipwc {

// One stored experience. The action is kept in normalized [-1, 1] units so
// the critic's input scaling stays uniform regardless of the force limit.
struct Transition {
  std::array<double, 6> state;
  double action = 0.0;
  double reward = 0.0;
  std::array<double, 6> next_state;
  bool done = false;
};

// What the networks actually see. Raw states are unbounded (a tumbling run
// winds the angles through many turns and the rates past +-50 rad/s), which
// wrecks ReLU nets trained on near-origin data. Angles therefore enter as
// sin/cos and the translational/rate coordinates are squashed against a
// typical scale, so every input lives in [-1, 1] no matter how far the
// plant has wandered. Transitions still store the raw state; the encoding
// is applied wherever a state meets a network.
inline constexpr int kStateFeatureDim = 8;
std::array<double, kStateFeatureDim> state_features(const std::array<double, 6>& x);

// Fixed-capacity ring with uniform seeded sampling. Eviction is strictly
// FIFO once the ring is full.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, std::uint64_t seed);

  void push(const Transition& t);
  int size() const { return size_; }
  int capacity() const { return capacity_; }
  // raw ring slot, 0 <= i < size(); storage order, not insertion order
  const Transition& slot(int i) const { return slots_[i]; }

  // n uniform draws (with replacement) from the stored entries
  std::vector<int> sample_indices(int n);

  void save(const std::string& path) const;
  static ReplayBuffer load(const std::string& path);

 private:
  int capacity_;
  int size_ = 0;
  int head_ = 0;
  SplitMix64 rng_;
  std::vector<Transition> slots_;
};

struct ExplorationConfig {
  // stepped once per environment step with unit dt, in normalized action units
  OuParams ou{0.15, 0.0, 0.2};
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  double decay_fraction = 0.8;  // of total_train_steps

  void validate() const;
};

struct AgentConfig {
  MlpSpec actor_spec;
  MlpSpec critic_spec;
  double gamma = 0.99;
  double actor_lr = 0.001;
  double critic_lr = 0.001;
  double tau = 0.005;
  int batch_size = 512;
  int warmup_steps = 1000;
  std::int64_t total_train_steps = 30000;
  int replay_capacity = 100000;
  int checkpoint_every_episodes = 10;
  ExplorationConfig exploration;

  void validate() const;

  // 2x64 actor and 2x128 critic, 30k steps: trains in minutes on one core
  static AgentConfig desk();
  // 20x256 actor, 20x512 critic, 100k steps
  static AgentConfig paper();
};

// Bellman targets y = r + gamma * (1 - done) * Q'(s', mu'(s')), all in
// normalized action units. Terminal transitions never bootstrap.
std::vector<double> critic_targets(const std::vector<Transition>& batch,
                                   const Mlp& target_actor,
                                   const Mlp& target_critic, double gamma);

struct TrainStepStats {
  double critic_loss = 0.0;      // minibatch MSE against the Bellman targets
  double actor_objective = 0.0;  // mean Q(s, mu(s)), ascended by the actor
};

struct TrainLogRow {
  std::int64_t step = 0;  // global step count at the end of the episode
  int episode = 0;
  double episode_return = 0.0;
  double critic_loss = 0.0;      // mean over the episode's updates, 0 if none
  double actor_objective = 0.0;  // likewise
  double epsilon = 0.0;
};

class Agent {
 public:
  Agent(AgentConfig cfg, double force_limit, std::uint64_t master_seed);

  const AgentConfig& config() const { return cfg_; }
  double force_limit() const { return force_limit_; }

  // deterministic policy, in newtons; thread-safe on a const agent
  double act(const StateVector& s) const;

  // exploration action in normalized units: clamp(mu(s) + eps(t) * ou, -1, 1)
  double act_noisy_normalized(const StateVector& s, std::int64_t global_step);
  double epsilon(std::int64_t global_step) const;

  // reseeds exploration noise; call at every episode start
  void begin_episode(std::uint64_t episode_seed);

  TrainStepStats train_step(ReplayBuffer& buffer);
  TrainStepStats train_step_on(const std::vector<Transition>& batch);

  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  Mlp& target_actor() { return target_actor_; }
  Mlp& target_critic() { return target_critic_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  const Mlp& target_actor() const { return target_actor_; }
  const Mlp& target_critic() const { return target_critic_; }
  AdamState& actor_opt() { return actor_opt_; }
  AdamState& critic_opt() { return critic_opt_; }
  const AdamState& actor_opt() const { return actor_opt_; }
  const AdamState& critic_opt() const { return critic_opt_; }

 private:
  AgentConfig cfg_;
  double force_limit_;
  Mlp actor_;
  Mlp critic_;
  Mlp target_actor_;
  Mlp target_critic_;
  AdamState actor_opt_;
  AdamState critic_opt_;
  OuProcess noise_;

  // training scratch
  MlpBatch ws_actor_, ws_critic_, ws_tactor_, ws_tcritic_;
  std::vector<double> sa_, spa_, y_, up_, cgrad_, agrad_, cinput_grad_, aup_;
};

// Everything needed to resume at an episode boundary: the four networks in
// checkpoint format, both optimizer states, counters, and the replay buffer.
struct TrainerSnapshot {
  std::int64_t global_step = 0;
  int episode = 0;
};

struct TrainOptions {
  std::string checkpoint_dir;  // empty: no checkpoints written
  std::string log_path;        // empty: no CSV log written
  std::int64_t start_step = 0;
  int start_episode = 0;
  // pause the loop at this global step (0 = run to total_train_steps); the
  // epsilon schedule still spans total_train_steps
  std::int64_t stop_after_step = 0;
  // called at every checkpoint boundary (and once at the end of the run),
  // whether or not checkpoint_dir is set. The agent is passed const, so a
  // hook can evaluate snapshots without perturbing the training stream.
  std::function<void(const Agent&, const TrainerSnapshot&)> on_checkpoint;
};

// The training loop: act_noisy -> env.step -> store -> train_step (after
// warmup), resetting on episode end. Episode seeds derive from the master
// seed and episode index, so a run is reproducible from (config, seed) alone.
std::vector<TrainLogRow> train(Agent& agent, Environment& env,
                               ReplayBuffer& buffer, std::uint64_t master_seed,
                               const TrainOptions& opts);

void write_training_log(const std::string& path,
                        const std::vector<TrainLogRow>& rows);

void save_training_state(const std::string& dir, const Agent& agent,
                         const ReplayBuffer& buffer,
                         const TrainerSnapshot& snap);
TrainerSnapshot load_training_state(const std::string& dir, Agent& agent,
                                    ReplayBuffer& buffer);

std::uint64_t episode_seed(std::uint64_t master_seed, int episode);

}  // namespace fipwc
