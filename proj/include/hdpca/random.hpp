#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>

namespace hdpca {

/// Philox4x32-10 block function (Salmon et al., SC 2011).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

/// SplitMix64 finalizer; used to derive independent stream identifiers.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Folds a master seed and a path of labels (grid value, replicate, ...)
/// into a single 64-bit seed. Different paths give unrelated seeds.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Counter-based generator: stream `stream` under key `seed`.
///
/// The output of block k depends only on (seed, stream, k), so any number of
/// streams can be consumed concurrently in any order with identical results.
/// Satisfies std::uniform_random_bit_generator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Standard normal (Box-Muller; the second variate of each pair is cached).
  double normal();

  void fill_normal(std::span<double> out);

  std::uint64_t blocks_consumed() const { return block_; }

 private:
  void refill();

  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int available_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace hdpca
