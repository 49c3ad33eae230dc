// SPDX-License-Identifier: Apache-2.0
#include "dna/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dna/error.hpp"

namespace dna {

namespace {

void require_same_dim(std::span<const double> u, std::span<const double> w) {
  if (u.size() != w.size()) {
    throw Error(Errc::DimensionMismatch, std::to_string(u.size()) + " vs " +
                                             std::to_string(w.size()));
  }
}

}  // namespace

double dot(std::span<const double> u, std::span<const double> w) {
  require_same_dim(u, w);
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * w[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vec l2_normalize(std::span<const double> v) {
  const double n = l2_norm(v);
  if (!(n > kNormEpsilon)) {
    throw Error(Errc::ZeroNorm, "vector norm " + std::to_string(n));
  }
  Vec out(v.begin(), v.end());
  // Vectors already unit to rounding are returned as-is so that
  // normalization is idempotent bitwise.
  if (std::abs(n - 1.0) <= kUnitSlack) return out;
  for (double& x : out) x /= n;
  return out;
}

double cosine(std::span<const double> u, std::span<const double> w) {
  return std::clamp(dot(u, w), -1.0, 1.0);
}

Vec softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(Errc::InvalidTemperature,
                "temperature must be > 0, got " + std::to_string(temperature));
  }
  Vec out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - top) / temperature);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double canonical_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  double carry = 0.0;
  for (double x : values) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      carry += (sum - t) + x;
    } else {
      carry += (x - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::vector<Vec> sample_gaussian(std::span<const double> mean,
                                 std::span<const double> diag_cov,
                                 std::size_t n, std::uint64_t seed) {
  require_same_dim(mean, diag_cov);
  Vec stddev(diag_cov.size());
  for (std::size_t i = 0; i < diag_cov.size(); ++i) {
    if (!(diag_cov[i] >= 0.0)) {
      throw Error(Errc::NegativeVariance,
                  "variance[" + std::to_string(i) + "] = " +
                      std::to_string(diag_cov[i]));
    }
    stddev[i] = std::sqrt(diag_cov[i]);
  }
  Rng rng(seed);
  std::vector<Vec> out(n, Vec(mean.size()));
  for (Vec& draw : out) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
      draw[i] = mean[i] + stddev[i] * rng.normal();
    }
  }
  return out;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(parent) ^ h);
}

}  // namespace dna
