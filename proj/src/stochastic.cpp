#include "fipwc/stochastic.hpp"

#include <cmath>
#include <stdexcept>

namespace fipwc {

void OuParams::validate() const {
  if (!(kappa >= 0.0)) throw std::invalid_argument("ou params: kappa must be non-negative");
  if (!(sigma >= 0.0)) throw std::invalid_argument("ou params: sigma must be non-negative");
  if (!std::isfinite(mu)) throw std::invalid_argument("ou params: mu must be finite");
}

void DisturbanceConfig::validate() const {
  cart.validate();
  beam.validate();
  tip.validate();
}

void UncertaintySpec::validate() const {
  if (!(relative_spread >= 0.0)) throw std::invalid_argument("uncertainty: spread must be non-negative");
}

OuProcess::OuProcess(OuParams params, std::uint64_t stream_seed, double y0)
    : p_(params), y_(y0), rng_(stream_seed) {
  p_.validate();
}

double OuProcess::step(double dt) {
  const double noise = gaussian(rng_);
  y_ += p_.kappa * (p_.mu - y_) * dt + p_.sigma * std::sqrt(dt) * noise;
  return y_;
}

std::array<OuProcess, 3> make_disturbances(const DisturbanceConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return {
      OuProcess(cfg.cart, derive_stream(seed, stream::dist_cart)),
      OuProcess(cfg.beam, derive_stream(seed, stream::dist_beam)),
      OuProcess(cfg.tip, derive_stream(seed, stream::dist_tip)),
  };
}

ModelParams sample_params(const ModelParams& nominal, const UncertaintySpec& spec, std::uint64_t seed) {
  nominal.validate();
  spec.validate();
  SplitMix64 rng(seed);
  ModelParams out = nominal;
  // Draw order is part of the reproducibility contract.
  out.k1 = std::fabs(nominal.k1 + spec.relative_spread * nominal.k1 * gaussian(rng));
  out.k2 = std::fabs(nominal.k2 + spec.relative_spread * nominal.k2 * gaussian(rng));
  out.b1 = std::fabs(nominal.b1 + spec.relative_spread * nominal.b1 * gaussian(rng));
  out.b2 = std::fabs(nominal.b2 + spec.relative_spread * nominal.b2 * gaussian(rng));
  out.b3 = std::fabs(nominal.b3 + spec.relative_spread * nominal.b3 * gaussian(rng));
  return out;
}

double folded_normal_mean(double mu, double sigma) {
  if (sigma == 0.0) return std::fabs(mu);
  const double r = mu / sigma;
  return sigma * std::sqrt(2.0 / 3.14159265358979323846) * std::exp(-0.5 * r * r)
         + mu * std::erf(r / std::sqrt(2.0));
}

}  // namespace fipwc
