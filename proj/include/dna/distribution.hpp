// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dna/features.hpp"
#include "dna/numkit.hpp"

namespace dna {

inline constexpr double kVarianceFloor = 1e-6;

/// Diagonal Gaussian estimate of one class.
struct ClassDistribution {
  Vec raw_mean;   ///< coordinatewise arithmetic mean
  Vec mean;       ///< l2_normalize(raw_mean); what inference uses
  Vec diag_cov;   ///< unbiased per-coordinate variance, floored
  std::size_t count = 0;
};

/// Mean and diagonal covariance of the given unit vectors.
///
/// Each coordinate is summed in sorted order with compensation, so the
/// result is bitwise independent of input order. With a single sample the
/// covariance is the floor vector.
ClassDistribution estimate_distribution(std::span<const Vec> features);
ClassDistribution estimate_distribution(std::span<const FeatureRecord> features);

/// ||raw_mean - reference_mean||_2, the magnitude of the gap between the
/// few-shot estimate and the class expectation.
double distribution_bias(const ClassDistribution& estimated,
                         std::span<const double> reference_mean);

/// Supplies extra candidate features for a class.
///
/// Implementations must be callable concurrently.
class AugmentationSource {
 public:
  virtual ~AugmentationSource() = default;
  /// n unit-norm Candidate records for `label`. May return fewer when the
  /// source is exhausted.
  virtual std::vector<FeatureRecord> candidates(Label label, std::size_t n,
                                                std::uint64_t seed) const = 0;
};

/// Draws candidates from a known class Gaussian: normalize(dir + sigma*z).
class OracleSampler final : public AugmentationSource {
 public:
  OracleSampler(Vec direction_pos, Vec direction_neg, double sigma);
  std::vector<FeatureRecord> candidates(Label label, std::size_t n,
                                        std::uint64_t seed) const override;

 private:
  Vec direction_pos_;
  Vec direction_neg_;
  double sigma_;
};

/// Serves precomputed Candidate records, in stored order, ignoring the
/// seed.
class CacheSource final : public AugmentationSource {
 public:
  CacheSource(std::vector<FeatureRecord> positive,
              std::vector<FeatureRecord> negative);
  /// Candidate-role records whose ids are "<tag>/<n>".
  static CacheSource from_index(const FeatureIndex& index,
                                std::string_view positive_tag,
                                std::string_view negative_tag);

  std::vector<FeatureRecord> candidates(Label label, std::size_t n,
                                        std::uint64_t seed) const override;
  std::size_t available(Label label) const;

 private:
  std::vector<FeatureRecord> positive_;
  std::vector<FeatureRecord> negative_;
};

/// Base supports followed by the k candidates (out of `pool`) with the
/// highest cosine to `class_text`. Ties keep the lower candidate index.
std::vector<FeatureRecord> augment_support(std::span<const FeatureRecord> base,
                                           const AugmentationSource& source,
                                           Label label,
                                           std::span<const double> class_text,
                                           std::size_t k, std::size_t pool,
                                           std::uint64_t seed);

struct AugmentConfig {
  std::size_t k = 6;
  /// Candidates requested per kept candidate.
  std::size_t pool_factor = 4;

  std::size_t pool() const { return k * pool_factor; }
};

struct RectifiedSupport {
  std::vector<FeatureRecord> positive;
  std::vector<FeatureRecord> negative;
  ClassDistribution pos;
  ClassDistribution neg;

  const ClassDistribution& distribution(Label label) const {
    return label == Label::Positive ? pos : neg;
  }
};

/// Augments each class of the episode (k = 0 or no source: supports as-is)
/// and estimates both class distributions.
RectifiedSupport rectified_distributions(const Episode& episode,
                                         const AugmentationSource* source,
                                         const TextFeatures& text,
                                         const AugmentConfig& cfg,
                                         std::uint64_t seed);

}  // namespace dna
