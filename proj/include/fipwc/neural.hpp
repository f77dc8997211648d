#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fipwc {

// Activation applied to the output layer. Hidden layers are always ReLU.
enum class OutputActivation { kLinear, kTanh };

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden;  // widths of hidden layers, may be empty
  int output_dim = 1;
  OutputActivation output_activation = OutputActivation::kLinear;

  // throws std::invalid_argument when any dimension < 1
  void validate() const;

  // [input_dim, hidden..., output_dim]
  std::vector<int> layer_dims() const;

  // number of weight layers (= hidden.size() + 1)
  int layer_count() const;

  bool operator==(const MlpSpec& other) const;
};

// Scratch space for a batched forward/backward pass. Owning the activations
// here (rather than in the network) keeps the network const during batched
// evaluation, so frozen snapshots can be shared across threads.
struct MlpBatch {
  int batch = 0;
  // act[0] is a copy of the input (batch x input_dim), act[k] the activations
  // after layer k, row-major. act.back() is the network output.
  std::vector<std::vector<double>> act;
  // scratch for backprop deltas
  std::vector<double> delta;
  std::vector<double> delta_prev;
};

// Fully connected network with 64-bit parameters stored in one flat vector:
// layer 0 weights (row-major, out x in), layer 0 biases, layer 1 weights, ...
class Mlp {
 public:
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  double* weights(int layer);
  const double* weights(int layer) const;
  double* biases(int layer);
  const double* biases(int layer) const;
  int in_dim(int layer) const { return dims_[layer]; }
  int out_dim(int layer) const { return dims_[layer + 1]; }

  // He-normal weights (std = sqrt(2/fan_in)), zero biases.
  void init_he(std::uint64_t seed);
  // Re-initialize only the final layer, weights and biases uniform in
  // [-bound, bound]. Used for actors so initial actions sit near zero.
  void init_final_layer_uniform(double bound, std::uint64_t seed);

  // Batched pass over `batch` rows of `input` (row-major batch x input_dim).
  // Fills `ws`; returns the output activations (batch x output_dim).
  const std::vector<double>& forward_batch(const double* input, int batch,
                                           MlpBatch& ws) const;

  // Backpropagates `upstream` (dLoss/dOutput, batch x output_dim) through the
  // pass cached in `ws`. Writes the parameter gradient, SUMMED over the
  // batch, into `param_grads` (size param_count). When `input_grads` is
  // non-null it receives dLoss/dInput (batch x input_dim). Callers fold any
  // 1/batch factor into `upstream`.
  void backward_batch(const MlpBatch& ws, const double* upstream,
                      double* param_grads, double* input_grads = nullptr) const;

  // Single-sample convenience wrappers that cache internally.
  const std::vector<double>& forward(const std::vector<double>& input);
  // Returns the input gradient; the parameter gradient lands in grads().
  // Throws std::logic_error when no forward pass has been cached.
  const std::vector<double>& backward(const std::vector<double>& upstream);
  const std::vector<double>& grads() const { return grads_; }

  // throws std::runtime_error naming the first offending index
  void check_finite(const std::string& label) const;

 private:
  MlpSpec spec_;
  std::vector<int> dims_;
  std::vector<int> weight_offset_;
  std::vector<int> bias_offset_;
  std::vector<double> params_;

  // single-sample cache
  MlpBatch cache_;
  bool cached_ = false;
  std::vector<double> grads_;
  std::vector<double> input_grad_;
};

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(int param_count, double lr = 0.001);
};

// One bias-corrected Adam update, in place. Throws std::runtime_error with
// the offending index when a gradient is non-finite.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state);

// target <- tau * online + (1 - tau) * target. Specs must match.
void soft_update(Mlp& target, const Mlp& online, double tau);

// Flat binary checkpoint: magic, dims, activation tag, raw parameter bytes.
// Round-trips bit-exactly.
void save_checkpoint(const Mlp& net, const std::string& path);
Mlp load_checkpoint(const std::string& path);

}  // namespace fipwc
