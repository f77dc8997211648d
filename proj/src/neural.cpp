#include "fipwc/neural.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fipwc/rng.hpp"

namespace fipwc {

void MlpSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("MlpSpec: input_dim must be >= 1");
  if (output_dim < 1) throw std::invalid_argument("MlpSpec: output_dim must be >= 1");
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("MlpSpec: hidden widths must be >= 1");
  }
}

std::vector<int> MlpSpec::layer_dims() const {
  std::vector<int> d;
  d.reserve(hidden.size() + 2);
  d.push_back(input_dim);
  for (int w : hidden) d.push_back(w);
  d.push_back(output_dim);
  return d;
}

int MlpSpec::layer_count() const { return static_cast<int>(hidden.size()) + 1; }

bool MlpSpec::operator==(const MlpSpec& other) const {
  return input_dim == other.input_dim && hidden == other.hidden &&
         output_dim == other.output_dim &&
         output_activation == other.output_activation;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  dims_ = spec_.layer_dims();
  int offset = 0;
  for (int l = 0; l < spec_.layer_count(); ++l) {
    weight_offset_.push_back(offset);
    offset += dims_[l] * dims_[l + 1];
    bias_offset_.push_back(offset);
    offset += dims_[l + 1];
  }
  params_.assign(offset, 0.0);
  grads_.assign(offset, 0.0);
}

double* Mlp::weights(int layer) { return params_.data() + weight_offset_[layer]; }
const double* Mlp::weights(int layer) const { return params_.data() + weight_offset_[layer]; }
double* Mlp::biases(int layer) { return params_.data() + bias_offset_[layer]; }
const double* Mlp::biases(int layer) const { return params_.data() + bias_offset_[layer]; }

void Mlp::init_he(std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (int l = 0; l < spec_.layer_count(); ++l) {
    const double std = std::sqrt(2.0 / dims_[l]);
    double* w = weights(l);
    const int n = dims_[l] * dims_[l + 1];
    for (int i = 0; i < n; ++i) w[i] = std * gaussian(rng);
    double* b = biases(l);
    for (int i = 0; i < dims_[l + 1]; ++i) b[i] = 0.0;
  }
}

void Mlp::init_final_layer_uniform(double bound, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const int l = spec_.layer_count() - 1;
  double* w = weights(l);
  const int n = dims_[l] * dims_[l + 1];
  for (int i = 0; i < n; ++i) w[i] = bound * (2.0 * uniform01(rng) - 1.0);
  double* b = biases(l);
  for (int i = 0; i < dims_[l + 1]; ++i) b[i] = bound * (2.0 * uniform01(rng) - 1.0);
}

namespace {

// y[j] = b[j] + dot(w[j,:], x) for one sample. Unrolled accumulators break
// the reduction dependency chain; the summation order is fixed, so results
// are bitwise reproducible.
inline void dense_row(const double* w, const double* x, int din, const double* bias,
                      double* y, int dout) {
  for (int j = 0; j < dout; ++j) {
    const double* wr = w + static_cast<std::ptrdiff_t>(j) * din;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= din; i += 4) {
      s0 += wr[i] * x[i];
      s1 += wr[i + 1] * x[i + 1];
      s2 += wr[i + 2] * x[i + 2];
      s3 += wr[i + 3] * x[i + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; i < din; ++i) s += wr[i] * x[i];
    y[j] = s + bias[j];
  }
}

}  // namespace

const std::vector<double>& Mlp::forward_batch(const double* input, int batch,
                                              MlpBatch& ws) const {
  if (batch < 1) throw std::invalid_argument("forward_batch: batch must be >= 1");
  const int layers = spec_.layer_count();
  ws.batch = batch;
  ws.act.resize(layers + 1);
  ws.act[0].assign(input, input + static_cast<std::ptrdiff_t>(batch) * dims_[0]);

  for (int l = 0; l < layers; ++l) {
    const int din = dims_[l];
    const int dout = dims_[l + 1];
    ws.act[l + 1].resize(static_cast<std::size_t>(batch) * dout);
    const double* w = weights(l);
    const double* bias = biases(l);
    const double* x = ws.act[l].data();
    double* y = ws.act[l + 1].data();
    for (int b = 0; b < batch; ++b) {
      dense_row(w, x + static_cast<std::ptrdiff_t>(b) * din, din, bias,
                y + static_cast<std::ptrdiff_t>(b) * dout, dout);
    }
    const bool last = (l == layers - 1);
    double* a = ws.act[l + 1].data();
    const std::size_t n = ws.act[l + 1].size();
    if (!last) {
      for (std::size_t i = 0; i < n; ++i) a[i] = a[i] > 0.0 ? a[i] : 0.0;
    } else if (spec_.output_activation == OutputActivation::kTanh) {
      for (std::size_t i = 0; i < n; ++i) a[i] = std::tanh(a[i]);
    }
  }
  return ws.act.back();
}

void Mlp::backward_batch(const MlpBatch& ws, const double* upstream,
                         double* param_grads, double* input_grads) const {
  if (ws.batch < 1 || ws.act.size() != static_cast<std::size_t>(spec_.layer_count()) + 1)
    throw std::logic_error("backward_batch: workspace holds no forward pass");
  const int layers = spec_.layer_count();
  const int batch = ws.batch;

  // delta starts as dLoss/d(output activation), converted layer by layer to
  // dLoss/d(pre-activation) and pushed back through the weights.
  auto& delta = const_cast<MlpBatch&>(ws).delta;
  auto& delta_prev = const_cast<MlpBatch&>(ws).delta_prev;
  delta.assign(upstream,
               upstream + static_cast<std::ptrdiff_t>(batch) * dims_[layers]);
  std::memset(param_grads, 0, sizeof(double) * params_.size());

  for (int l = layers - 1; l >= 0; --l) {
    const int din = dims_[l];
    const int dout = dims_[l + 1];
    const double* a_out = ws.act[l + 1].data();
    const double* a_in = ws.act[l].data();

    // activation gate. ReLU: act > 0 iff pre-activation > 0, so the cached
    // activation is enough. tanh: d/dz = 1 - a^2.
    const bool last = (l == layers - 1);
    if (!last) {
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch) * dout; ++i)
        if (a_out[i] <= 0.0) delta[i] = 0.0;
    } else if (spec_.output_activation == OutputActivation::kTanh) {
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch) * dout; ++i)
        delta[i] *= 1.0 - a_out[i] * a_out[i];
    }

    double* wg = param_grads + weight_offset_[l];
    double* bg = param_grads + bias_offset_[l];
    const double* w = params_.data() + weight_offset_[l];
    const bool want_input = (l > 0) || (input_grads != nullptr);
    double* dx = nullptr;
    if (want_input) {
      if (l > 0) {
        delta_prev.assign(static_cast<std::size_t>(batch) * din, 0.0);
        dx = delta_prev.data();
      } else {
        std::memset(input_grads, 0, sizeof(double) * static_cast<std::size_t>(batch) * din);
        dx = input_grads;
      }
    }

    for (int b = 0; b < batch; ++b) {
      const double* d = delta.data() + static_cast<std::ptrdiff_t>(b) * dout;
      const double* x = a_in + static_cast<std::ptrdiff_t>(b) * din;
      double* dxb = want_input ? dx + static_cast<std::ptrdiff_t>(b) * din : nullptr;
      for (int j = 0; j < dout; ++j) {
        const double dj = d[j];
        if (dj == 0.0) continue;  // dead ReLU rows cost nothing
        bg[j] += dj;
        double* wgr = wg + static_cast<std::ptrdiff_t>(j) * din;
        const double* wr = w + static_cast<std::ptrdiff_t>(j) * din;
        for (int i = 0; i < din; ++i) wgr[i] += dj * x[i];
        if (dxb) {
          for (int i = 0; i < din; ++i) dxb[i] += dj * wr[i];
        }
      }
    }
    if (l > 0) delta.swap(delta_prev);
  }
}

const std::vector<double>& Mlp::forward(const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != spec_.input_dim) {
    throw std::invalid_argument("forward: input has " + std::to_string(input.size()) +
                                " elements, expected " + std::to_string(spec_.input_dim));
  }
  cached_ = true;
  return forward_batch(input.data(), 1, cache_);
}

const std::vector<double>& Mlp::backward(const std::vector<double>& upstream) {
  if (!cached_) throw std::logic_error("backward called before forward");
  if (static_cast<int>(upstream.size()) != spec_.output_dim) {
    throw std::invalid_argument("backward: upstream has " + std::to_string(upstream.size()) +
                                " elements, expected " + std::to_string(spec_.output_dim));
  }
  input_grad_.resize(spec_.input_dim);
  backward_batch(cache_, upstream.data(), grads_.data(), input_grad_.data());
  return input_grad_;
}

void Mlp::check_finite(const std::string& label) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!std::isfinite(params_[i])) {
      throw std::runtime_error(label + ": non-finite parameter at index " +
                               std::to_string(i));
    }
  }
}

AdamState::AdamState(int param_count, double lr_in)
    : lr(lr_in), m(param_count, 0.0), v(param_count, 0.0) {}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::runtime_error("adam_step: non-finite gradient at index " +
                               std::to_string(i) + " (value " +
                               std::to_string(grads[i]) + ")");
    }
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (!(target.spec() == online.spec())) {
    throw std::invalid_argument("soft_update: network specs differ");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("soft_update: tau must lie in [0, 1]");
  }
  auto& t = target.params();
  const auto& o = online.params();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * o[i] + (1.0 - tau) * t[i];
}

namespace {
constexpr std::uint64_t kCheckpointMagic = 0x46495057434e4e31ull;  // "FIPWCNN1"

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace

void save_checkpoint(const Mlp& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  write_u64(out, kCheckpointMagic);
  write_u64(out, static_cast<std::uint64_t>(net.spec().input_dim));
  write_u64(out, static_cast<std::uint64_t>(net.spec().hidden.size()));
  for (int w : net.spec().hidden) write_u64(out, static_cast<std::uint64_t>(w));
  write_u64(out, static_cast<std::uint64_t>(net.spec().output_dim));
  write_u64(out, net.spec().output_activation == OutputActivation::kTanh ? 1 : 0);
  write_u64(out, static_cast<std::uint64_t>(net.param_count()));
  out.write(reinterpret_cast<const char*>(net.params().data()),
            static_cast<std::streamsize>(sizeof(double) * net.params().size()));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  if (read_u64(in) != kCheckpointMagic) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  }
  MlpSpec spec;
  spec.input_dim = static_cast<int>(read_u64(in));
  const std::uint64_t n_hidden = read_u64(in);
  if (n_hidden > 1024) throw std::runtime_error("load_checkpoint: corrupt header in " + path);
  for (std::uint64_t i = 0; i < n_hidden; ++i) spec.hidden.push_back(static_cast<int>(read_u64(in)));
  spec.output_dim = static_cast<int>(read_u64(in));
  spec.output_activation = read_u64(in) == 1 ? OutputActivation::kTanh : OutputActivation::kLinear;
  Mlp net(spec);
  const std::uint64_t count = read_u64(in);
  if (count != static_cast<std::uint64_t>(net.param_count())) {
    throw std::runtime_error("load_checkpoint: parameter count mismatch in " + path);
  }
  in.read(reinterpret_cast<char*>(net.params().data()),
          static_cast<std::streamsize>(sizeof(double) * net.params().size()));
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  net.check_finite("load_checkpoint(" + path + ")");
  return net;
}

}  // namespace fipwc
