// Deterministic random streams: xoshiro256** seeded through SplitMix64 from a
// (master seed, stream id) pair, plus the handful of variate generators the
// samplers need. Everything is implemented here rather than through
// <random> distributions so draws are identical across standard libraries.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace torusmix {

class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Independent child stream derived deterministically from this stream's
  // identity and `sub`.
  RngStream split(std::uint64_t sub) const;

  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  // Gamma(shape, 1).
  double gamma(double shape);
  std::vector<double> dirichlet(std::span<const double> alpha);
  // Index drawn with probability proportional to weights (need not sum to 1).
  std::size_t categorical(std::span<const double> weights);
  // Uniform random permutation of {0, ..., n-1}.
  std::vector<int> permutation(int n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> s_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace torusmix
