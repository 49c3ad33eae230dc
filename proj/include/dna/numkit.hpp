// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace dna {

/// Embedding vector. All arithmetic is f64; caches store f32.
using Vec = std::vector<double>;

inline constexpr double kNormEpsilon = 1e-12;
/// Norms within this of 1 count as already normalized.
inline constexpr double kUnitSlack = 1e-12;

double dot(std::span<const double> u, std::span<const double> w);
double l2_norm(std::span<const double> v);

/// Unit vector in the direction of v. Throws ZeroNorm when ||v|| <= 1e-12.
Vec l2_normalize(std::span<const double> v);

/// Dot product of two unit vectors, clamped to [-1, 1].
double cosine(std::span<const double> u, std::span<const double> w);

/// Temperature softmax with max-subtraction.
Vec softmax(std::span<const double> logits, double temperature);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Order-independent sum: sorts a copy, then Neumaier-compensated
/// accumulation. Equal multisets give bitwise-equal results.
double canonical_sum(std::vector<double> values);

/// Seeded generator with platform-stable output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Standard distributions are not, so uniforms take the top 53
/// bits of each draw and normals use the polar-free Box-Muller transform
/// (cos branch first, sin branch cached for the next call).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// n draws from N(mean, diag(diag_cov)). Deterministic per seed.
std::vector<Vec> sample_gaussian(std::span<const double> mean,
                                 std::span<const double> diag_cov,
                                 std::size_t n, std::uint64_t seed);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Stable seed for a named sub-task: FNV-1a over the name, mixed with
/// the parent seed.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view name);

}  // namespace dna
