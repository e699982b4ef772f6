#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace synaug {

/// Identity of a deterministic random stream.
///
/// Streams are addressed by a root seed plus a path of derivation indices.
/// The draw sequence of a stream depends only on (algorithm, seed, path), so
/// repetitions, folds and generators can each own a stream without consuming
/// draws from a shared sequential generator.
struct RngStream {
  static constexpr const char* kAlgorithmId = "splitmix64-counter/v1";

  std::uint64_t seed = 0;
  std::vector<std::uint64_t> path;

  RngStream() = default;
  explicit RngStream(std::uint64_t root_seed) : seed(root_seed) {}

  std::string algorithm_id() const { return kAlgorithmId; }

  /// 64-bit key mixed from seed and path; the generator's counter offset.
  std::uint64_t key() const;

  /// "seed:i/j/k" style label used in output files.
  std::string label() const;

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// Child stream `index` of `base`. Deterministic in (base, index).
RngStream derive_stream(const RngStream& base, std::uint64_t index);

/// Counter-mode SplitMix64 generator over a stream key.
///
/// Output i is mix64(key + (i + 1) * golden_gamma). Satisfies
/// UniformRandomBitGenerator, but distributions are implemented here
/// rather than through <random> so that draws are identical across
/// standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(const RngStream& stream) : state_(stream.key()) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal deviate (Marsaglia polar method).
  double normal();

  /// +1 or -1 with equal probability.
  double rademacher() { return ((*this)() >> 63) ? 1.0 : -1.0; }

 private:
  std::uint64_t state_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace synaug
