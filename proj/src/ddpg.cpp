#include "fipwc/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fipwc {

ReplayBuffer::ReplayBuffer(int capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
  slots_.reserve(static_cast<std::size_t>(capacity));
}

void ReplayBuffer::push(const Transition& t) {
  if (size_ < capacity_) {
    slots_.push_back(t);
    ++size_;
  } else {
    slots_[head_] = t;  // overwrite the oldest entry
  }
  head_ = (head_ + 1) % capacity_;
}

std::vector<int> ReplayBuffer::sample_indices(int n) {
  if (size_ == 0) throw std::logic_error("ReplayBuffer: sampling from an empty buffer");
  if (n < 1) throw std::invalid_argument("ReplayBuffer: sample count must be >= 1");
  std::vector<int> out(n);
  // modulo bias is ~size/2^64, far below anything observable
  for (int i = 0; i < n; ++i) out[i] = static_cast<int>(rng_() % static_cast<std::uint64_t>(size_));
  return out;
}

namespace {

constexpr std::uint64_t kReplayMagic = 0x4649505752455031ull;   // "FIPWREP1"
constexpr std::uint64_t kTrainerMagic = 0x4649505754524e31ull;  // "FIPWTRN1"

void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_i64(std::ofstream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t get_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::int64_t get_i64(std::ifstream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double get_f64(std::ifstream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void put_vec(std::ofstream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}
std::vector<double> get_vec(std::ifstream& in) {
  const std::uint64_t n = get_u64(in);
  if (n > (1ull << 32)) throw std::runtime_error("corrupt vector length in state file");
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  return v;
}

}  // namespace

void ReplayBuffer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("ReplayBuffer::save: cannot open " + path);
  put_u64(out, kReplayMagic);
  put_u64(out, static_cast<std::uint64_t>(capacity_));
  put_u64(out, static_cast<std::uint64_t>(size_));
  put_u64(out, static_cast<std::uint64_t>(head_));
  put_u64(out, rng_.state());
  // field-wise, so file bytes never depend on struct padding
  for (int i = 0; i < size_; ++i) {
    const Transition& t = slots_[i];
    for (double v : t.state) put_f64(out, v);
    put_f64(out, t.action);
    put_f64(out, t.reward);
    for (double v : t.next_state) put_f64(out, v);
    out.put(t.done ? 1 : 0);
  }
  if (!out) throw std::runtime_error("ReplayBuffer::save: write failed for " + path);
}

ReplayBuffer ReplayBuffer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ReplayBuffer::load: cannot open " + path);
  if (get_u64(in) != kReplayMagic) throw std::runtime_error("ReplayBuffer::load: bad magic in " + path);
  const auto capacity = static_cast<int>(get_u64(in));
  ReplayBuffer buf(capacity, 0);
  buf.size_ = static_cast<int>(get_u64(in));
  buf.head_ = static_cast<int>(get_u64(in));
  buf.rng_.set_state(get_u64(in));
  if (buf.size_ < 0 || buf.size_ > capacity) {
    throw std::runtime_error("ReplayBuffer::load: corrupt header in " + path);
  }
  buf.slots_.resize(static_cast<std::size_t>(buf.size_));
  for (int i = 0; i < buf.size_; ++i) {
    Transition& t = buf.slots_[i];
    for (double& v : t.state) v = get_f64(in);
    t.action = get_f64(in);
    t.reward = get_f64(in);
    for (double& v : t.next_state) v = get_f64(in);
    t.done = in.get() == 1;
  }
  if (!in) throw std::runtime_error("ReplayBuffer::load: truncated file " + path);
  return buf;
}

void ExplorationConfig::validate() const {
  ou.validate();
  if (!(epsilon_start >= 0.0) || !(epsilon_end >= 0.0)) {
    throw std::invalid_argument("ExplorationConfig: epsilon endpoints must be >= 0");
  }
  if (!(decay_fraction > 0.0 && decay_fraction <= 1.0)) {
    throw std::invalid_argument("ExplorationConfig: decay_fraction must lie in (0, 1]");
  }
}

std::array<double, kStateFeatureDim> state_features(const std::array<double, 6>& x) {
  // scales: ~3 m of track, ~2 m/s cart speed, ~4 rad/s angular rates
  return {std::tanh(x[0] / 3.0), std::tanh(x[1] / 2.0),
          std::sin(x[2]),        std::cos(x[2]),
          std::tanh(x[3] / 4.0),
          std::sin(x[4]),        std::cos(x[4]),
          std::tanh(x[5] / 4.0)};
}

void AgentConfig::validate() const {
  actor_spec.validate();
  critic_spec.validate();
  if (actor_spec.input_dim != kStateFeatureDim || actor_spec.output_dim != 1 ||
      actor_spec.output_activation != OutputActivation::kTanh) {
    throw std::invalid_argument("AgentConfig: actor must map state features to 1 tanh action");
  }
  if (critic_spec.input_dim != kStateFeatureDim + 1 || critic_spec.output_dim != 1 ||
      critic_spec.output_activation != OutputActivation::kLinear) {
    throw std::invalid_argument("AgentConfig: critic must map (state features, action) to 1 linear value");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("AgentConfig: gamma must lie in (0, 1)");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw std::invalid_argument("AgentConfig: learning rates must be > 0");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("AgentConfig: tau must lie in [0, 1]");
  if (batch_size < 1) throw std::invalid_argument("AgentConfig: batch_size must be >= 1");
  if (warmup_steps < 0) throw std::invalid_argument("AgentConfig: warmup_steps must be >= 0");
  if (total_train_steps < 1) throw std::invalid_argument("AgentConfig: total_train_steps must be >= 1");
  if (replay_capacity < batch_size) throw std::invalid_argument("AgentConfig: replay_capacity must hold at least one batch");
  if (checkpoint_every_episodes < 1) throw std::invalid_argument("AgentConfig: checkpoint_every_episodes must be >= 1");
  exploration.validate();
}

AgentConfig AgentConfig::desk() {
  AgentConfig c;
  c.actor_spec = MlpSpec{kStateFeatureDim, {64, 64}, 1, OutputActivation::kTanh};
  c.critic_spec = MlpSpec{kStateFeatureDim + 1, {128, 128}, 1, OutputActivation::kLinear};
  return c;
}

AgentConfig AgentConfig::paper() {
  AgentConfig c;
  c.actor_spec = MlpSpec{kStateFeatureDim, std::vector<int>(20, 256), 1, OutputActivation::kTanh};
  c.critic_spec = MlpSpec{kStateFeatureDim + 1, std::vector<int>(20, 512), 1, OutputActivation::kLinear};
  c.total_train_steps = 100000;
  return c;
}

std::vector<double> critic_targets(const std::vector<Transition>& batch,
                                   const Mlp& target_actor,
                                   const Mlp& target_critic, double gamma) {
  if (batch.empty()) throw std::invalid_argument("critic_targets: batch is empty");
  const int n = static_cast<int>(batch.size());
  constexpr int F = kStateFeatureDim;
  std::vector<double> sp(static_cast<std::size_t>(n) * F);
  for (int b = 0; b < n; ++b) {
    const auto f = state_features(batch[b].next_state);
    for (int i = 0; i < F; ++i) sp[b * F + i] = f[i];
  }
  MlpBatch wa, wc;
  const auto& ap = target_actor.forward_batch(sp.data(), n, wa);
  std::vector<double> spa(static_cast<std::size_t>(n) * (F + 1));
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < F; ++i) spa[b * (F + 1) + i] = sp[b * F + i];
    spa[b * (F + 1) + F] = ap[b];
  }
  const auto& qn = target_critic.forward_batch(spa.data(), n, wc);
  std::vector<double> y(n);
  for (int b = 0; b < n; ++b) {
    y[b] = batch[b].reward + (batch[b].done ? 0.0 : gamma * qn[b]);
  }
  return y;
}

Agent::Agent(AgentConfig cfg, double force_limit, std::uint64_t master_seed)
    : cfg_(std::move(cfg)),
      force_limit_(force_limit),
      actor_(cfg_.actor_spec),
      critic_(cfg_.critic_spec),
      target_actor_(cfg_.actor_spec),
      target_critic_(cfg_.critic_spec),
      actor_opt_(0, cfg_.actor_lr),
      critic_opt_(0, cfg_.critic_lr),
      noise_(cfg_.exploration.ou, derive_stream(master_seed, stream::exploration)) {
  cfg_.validate();
  if (!(force_limit_ > 0.0)) throw std::invalid_argument("Agent: force_limit must be > 0");
  const std::uint64_t aseed = derive_stream(master_seed, stream::actor_init);
  actor_.init_he(aseed);
  actor_.init_final_layer_uniform(3e-3, derive_stream(aseed, 1));
  critic_.init_he(derive_stream(master_seed, stream::critic_init));
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_opt_ = AdamState(actor_.param_count(), cfg_.actor_lr);
  critic_opt_ = AdamState(critic_.param_count(), cfg_.critic_lr);
}

double Agent::act(const StateVector& s) const {
  const auto x = state_features(s.as_array());
  MlpBatch ws;
  const auto& out = actor_.forward_batch(x.data(), 1, ws);
  return force_limit_ * out[0];
}

double Agent::epsilon(std::int64_t global_step) const {
  const auto& e = cfg_.exploration;
  const double decay = e.decay_fraction * static_cast<double>(cfg_.total_train_steps);
  if (static_cast<double>(global_step) >= decay) return e.epsilon_end;
  const double frac = static_cast<double>(global_step) / decay;
  return e.epsilon_start + (e.epsilon_end - e.epsilon_start) * frac;
}

double Agent::act_noisy_normalized(const StateVector& s, std::int64_t global_step) {
  const auto x = state_features(s.as_array());
  MlpBatch ws;
  const double mu = actor_.forward_batch(x.data(), 1, ws)[0];
  noise_.step(1.0);
  const double a = mu + epsilon(global_step) * noise_.value();
  return std::clamp(a, -1.0, 1.0);
}

void Agent::begin_episode(std::uint64_t ep_seed) {
  noise_ = OuProcess(cfg_.exploration.ou, derive_stream(ep_seed, stream::exploration));
}

TrainStepStats Agent::train_step(ReplayBuffer& buffer) {
  if (buffer.size() < cfg_.batch_size) {
    throw std::logic_error("train_step: buffer smaller than one batch");
  }
  const auto idx = buffer.sample_indices(cfg_.batch_size);
  std::vector<Transition> batch(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = buffer.slot(idx[i]);
  return train_step_on(batch);
}

TrainStepStats Agent::train_step_on(const std::vector<Transition>& batch) {
  if (batch.empty()) throw std::invalid_argument("train_step_on: batch is empty");
  const int n = static_cast<int>(batch.size());
  y_ = critic_targets(batch, target_actor_, target_critic_, cfg_.gamma);

  // critic regression toward the Bellman targets
  constexpr int F = kStateFeatureDim;
  sa_.resize(static_cast<std::size_t>(n) * (F + 1));
  for (int b = 0; b < n; ++b) {
    const auto f = state_features(batch[b].state);
    for (int i = 0; i < F; ++i) sa_[b * (F + 1) + i] = f[i];
    sa_[b * (F + 1) + F] = batch[b].action;
  }
  const auto& q = critic_.forward_batch(sa_.data(), n, ws_critic_);
  double loss = 0.0;
  up_.resize(n);
  for (int b = 0; b < n; ++b) {
    const double d = q[b] - y_[b];
    loss += d * d;
    up_[b] = 2.0 * d / n;
  }
  loss /= n;
  cgrad_.resize(critic_.param_count());
  critic_.backward_batch(ws_critic_, up_.data(), cgrad_.data());
  adam_step(critic_.params(), cgrad_, critic_opt_);

  // actor ascends mean Q(s, mu(s)) through the refreshed critic
  std::vector<double>& s_only = spa_;
  s_only.resize(static_cast<std::size_t>(n) * F);
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < F; ++i) s_only[b * F + i] = sa_[b * (F + 1) + i];
  }
  const auto& a = actor_.forward_batch(s_only.data(), n, ws_actor_);
  for (int b = 0; b < n; ++b) sa_[b * (F + 1) + F] = a[b];
  const auto& q2 = critic_.forward_batch(sa_.data(), n, ws_critic_);
  double objective = 0.0;
  for (int b = 0; b < n; ++b) objective += q2[b];
  objective /= n;
  for (int b = 0; b < n; ++b) up_[b] = -1.0 / n;  // minimize -mean(Q)
  cinput_grad_.resize(static_cast<std::size_t>(n) * (F + 1));
  critic_.backward_batch(ws_critic_, up_.data(), cgrad_.data(), cinput_grad_.data());
  aup_.resize(n);
  for (int b = 0; b < n; ++b) aup_[b] = cinput_grad_[b * (F + 1) + F];
  agrad_.resize(actor_.param_count());
  actor_.backward_batch(ws_actor_, aup_.data(), agrad_.data());
  adam_step(actor_.params(), agrad_, actor_opt_);

  soft_update(target_actor_, actor_, cfg_.tau);
  soft_update(target_critic_, critic_, cfg_.tau);

#ifndef NDEBUG
  actor_.check_finite("actor after train_step");
  critic_.check_finite("critic after train_step");
#endif
  if (!std::isfinite(loss) || !std::isfinite(objective)) {
    throw std::runtime_error("train_step: non-finite loss (critic " + std::to_string(loss) +
                             ", actor objective " + std::to_string(objective) + ")");
  }
  return {loss, objective};
}

std::uint64_t episode_seed(std::uint64_t master_seed, int episode) {
  return derive_stream(derive_stream(master_seed, stream::episode),
                       static_cast<std::uint64_t>(episode));
}

std::vector<TrainLogRow> train(Agent& agent, Environment& env,
                               ReplayBuffer& buffer, std::uint64_t master_seed,
                               const TrainOptions& opts) {
  const AgentConfig& cfg = agent.config();
  std::vector<TrainLogRow> rows;
  std::int64_t step = opts.start_step;
  int episode = opts.start_episode;
  const std::int64_t limit =
      opts.stop_after_step > 0
          ? std::min(opts.stop_after_step, cfg.total_train_steps)
          : cfg.total_train_steps;

  while (step < limit) {
    const std::uint64_t eseed = episode_seed(master_seed, episode);
    env.reset(eseed);
    agent.begin_episode(eseed);
    double ep_return = 0.0;
    double loss_sum = 0.0;
    double obj_sum = 0.0;
    std::int64_t updates = 0;

    while (!env.done() && step < limit) {
      const StateVector s = env.state();
      const double a = agent.act_noisy_normalized(s, step);
      const StepResult res = env.step(a * agent.force_limit());
      Transition t;
      t.state = s.as_array();
      t.action = a;
      t.reward = res.reward;
      t.next_state = res.next_state.as_array();
      t.done = res.done;
      buffer.push(t);
      ep_return += res.reward;
      ++step;
      if (buffer.size() >= std::max(cfg.warmup_steps, cfg.batch_size)) {
        const TrainStepStats st = agent.train_step(buffer);
        loss_sum += st.critic_loss;
        obj_sum += st.actor_objective;
        ++updates;
      }
    }

    TrainLogRow row;
    row.step = step;
    row.episode = episode;
    row.episode_return = ep_return;
    if (updates > 0) {
      row.critic_loss = loss_sum / static_cast<double>(updates);
      row.actor_objective = obj_sum / static_cast<double>(updates);
    }
    row.epsilon = agent.epsilon(step);
    rows.push_back(row);
    ++episode;
    if (episode % cfg.checkpoint_every_episodes == 0) {
      if (!opts.checkpoint_dir.empty()) {
        save_training_state(opts.checkpoint_dir, agent, buffer, {step, episode});
      }
      if (opts.on_checkpoint) opts.on_checkpoint(agent, {step, episode});
    }
  }

  if (!opts.checkpoint_dir.empty()) {
    save_training_state(opts.checkpoint_dir, agent, buffer, {step, episode});
  }
  // fire the final hook only when the loop did not just do so above
  if (opts.on_checkpoint && episode % cfg.checkpoint_every_episodes != 0) {
    opts.on_checkpoint(agent, {step, episode});
  }
  if (!opts.log_path.empty()) write_training_log(opts.log_path, rows);
  return rows;
}

void write_training_log(const std::string& path,
                        const std::vector<TrainLogRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_training_log: cannot open " + path);
  out << "step,episode,return,critic_loss,actor_objective,epsilon\n";
  char buf[256];
  for (const TrainLogRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(r.step), r.episode, r.episode_return,
                  r.critic_loss, r.actor_objective, r.epsilon);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_training_log: write failed for " + path);
}

namespace {

void put_adam(std::ofstream& out, const AdamState& a) {
  put_f64(out, a.lr);
  put_f64(out, a.beta1);
  put_f64(out, a.beta2);
  put_f64(out, a.eps);
  put_i64(out, a.step);
  put_vec(out, a.m);
  put_vec(out, a.v);
}

void get_adam(std::ifstream& in, AdamState& a) {
  a.lr = get_f64(in);
  a.beta1 = get_f64(in);
  a.beta2 = get_f64(in);
  a.eps = get_f64(in);
  a.step = get_i64(in);
  a.m = get_vec(in);
  a.v = get_vec(in);
}

std::string join_widths(const std::vector<int>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(widths[i]);
  }
  return s;
}

}  // namespace

void save_training_state(const std::string& dir, const Agent& agent,
                         const ReplayBuffer& buffer,
                         const TrainerSnapshot& snap) {
  std::filesystem::create_directories(dir);
  save_checkpoint(agent.actor(), dir + "/actor.bin");
  save_checkpoint(agent.critic(), dir + "/critic.bin");
  save_checkpoint(agent.target_actor(), dir + "/target_actor.bin");
  save_checkpoint(agent.target_critic(), dir + "/target_critic.bin");
  buffer.save(dir + "/replay.bin");

  std::ofstream out(dir + "/trainer_state.bin", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_training_state: cannot open " + dir + "/trainer_state.bin");
  put_u64(out, kTrainerMagic);
  put_i64(out, snap.global_step);
  put_i64(out, snap.episode);
  put_adam(out, agent.actor_opt());
  put_adam(out, agent.critic_opt());
  if (!out) throw std::runtime_error("save_training_state: write failed in " + dir);

  const AgentConfig& c = agent.config();
  std::ofstream echo(dir + "/agent_config.txt", std::ios::trunc);
  char buf[128];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s=%.17g\n", key, v);
    echo << buf;
  };
  echo << "actor_hidden=" << join_widths(c.actor_spec.hidden) << "\n";
  echo << "critic_hidden=" << join_widths(c.critic_spec.hidden) << "\n";
  put("gamma", c.gamma);
  put("actor_lr", c.actor_lr);
  put("critic_lr", c.critic_lr);
  put("tau", c.tau);
  echo << "batch_size=" << c.batch_size << "\n";
  echo << "warmup_steps=" << c.warmup_steps << "\n";
  echo << "total_train_steps=" << c.total_train_steps << "\n";
  echo << "replay_capacity=" << c.replay_capacity << "\n";
  echo << "checkpoint_every_episodes=" << c.checkpoint_every_episodes << "\n";
  put("exploration_ou_kappa", c.exploration.ou.kappa);
  put("exploration_ou_sigma", c.exploration.ou.sigma);
  put("epsilon_start", c.exploration.epsilon_start);
  put("epsilon_end", c.exploration.epsilon_end);
  put("decay_fraction", c.exploration.decay_fraction);
  put("force_limit", agent.force_limit());
}

TrainerSnapshot load_training_state(const std::string& dir, Agent& agent,
                                    ReplayBuffer& buffer) {
  Mlp actor = load_checkpoint(dir + "/actor.bin");
  Mlp critic = load_checkpoint(dir + "/critic.bin");
  Mlp tactor = load_checkpoint(dir + "/target_actor.bin");
  Mlp tcritic = load_checkpoint(dir + "/target_critic.bin");
  if (!(actor.spec() == agent.actor().spec()) ||
      !(critic.spec() == agent.critic().spec())) {
    throw std::runtime_error("load_training_state: checkpoint specs do not match the agent config");
  }
  agent.actor() = std::move(actor);
  agent.critic() = std::move(critic);
  agent.target_actor() = std::move(tactor);
  agent.target_critic() = std::move(tcritic);
  buffer = ReplayBuffer::load(dir + "/replay.bin");

  std::ifstream in(dir + "/trainer_state.bin", std::ios::binary);
  if (!in) throw std::runtime_error("load_training_state: cannot open " + dir + "/trainer_state.bin");
  if (get_u64(in) != kTrainerMagic) {
    throw std::runtime_error("load_training_state: bad magic in " + dir + "/trainer_state.bin");
  }
  TrainerSnapshot snap;
  snap.global_step = get_i64(in);
  snap.episode = static_cast<int>(get_i64(in));
  get_adam(in, agent.actor_opt());
  get_adam(in, agent.critic_opt());
  if (!in) throw std::runtime_error("load_training_state: truncated " + dir + "/trainer_state.bin");
  if (agent.actor_opt().m.size() != static_cast<std::size_t>(agent.actor().param_count()) ||
      agent.critic_opt().m.size() != static_cast<std::size_t>(agent.critic().param_count())) {
    throw std::runtime_error("load_training_state: optimizer state does not match network sizes");
  }
  return snap;
}

}  // namespace fipwc
