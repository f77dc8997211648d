#pragma once

#include <cmath>
#include <cstdint>

namespace fipwc {

// SplitMix64 finalizer; full avalanche on 64 bits.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// Derives an independent stream key from a parent key and a word (a tag or
// an index). Every stochastic consumer gets its own generator seeded this
// way, so results never depend on the order consumers happen to draw in.
inline constexpr std::uint64_t derive_stream(std::uint64_t key, std::uint64_t word) {
  return mix64(key + 0x9e3779b97f4a7c15ULL * (word + 1));
}

// Counter-based generator (SplitMix64). State is one word, cheap to
// snapshot and restore when checkpointing.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

// Uniform on (0, 1]. Never returns 0, so log() of it is finite.
inline double uniform01(SplitMix64& g) {
  return static_cast<double>((g() >> 11) + 1) * 0x1.0p-53;
}

// One standard normal draw via Box-Muller (cosine branch). Consumes exactly
// two uniforms per call and keeps no cached second deviate, so the number of
// generator advances per draw is fixed.
inline double gaussian(SplitMix64& g) {
  const double u1 = uniform01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Stream tags. Values are arbitrary but must stay stable: they are part of
// what makes a given master seed reproduce a run exactly.
namespace stream {
inline constexpr std::uint64_t uncertainty = 1;
inline constexpr std::uint64_t dist_cart = 2;
inline constexpr std::uint64_t dist_beam = 3;
inline constexpr std::uint64_t dist_tip = 4;
inline constexpr std::uint64_t exploration = 5;
inline constexpr std::uint64_t replay = 6;
inline constexpr std::uint64_t actor_init = 7;
inline constexpr std::uint64_t critic_init = 8;
inline constexpr std::uint64_t episode = 9;
inline constexpr std::uint64_t run = 10;
inline constexpr std::uint64_t tune = 11;
// one tag per reward-statistics campaign cell
inline constexpr std::uint64_t cell_pd_cart = 12;
inline constexpr std::uint64_t cell_pd_quiet = 13;
inline constexpr std::uint64_t cell_drl_cart = 14;
inline constexpr std::uint64_t cell_drl_quiet = 15;
// fixed evaluation episodes used to rank training snapshots
inline constexpr std::uint64_t eval = 16;
}  // namespace stream

}  // namespace fipwc
