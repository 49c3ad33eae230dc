// SPDX-License-Identifier: Apache-2.0
#include "dna/distribution.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dna/error.hpp"

namespace dna {

ClassDistribution estimate_distribution(std::span<const Vec> features) {
  if (features.empty()) {
    throw Error(Errc::EmptySupport, "cannot estimate from zero features");
  }
  const std::size_t d = features.front().size();
  if (d == 0) throw Error(Errc::DimensionZero, "zero-length feature");
  for (const Vec& f : features) {
    if (f.size() != d) {
      throw Error(Errc::DimensionMismatch,
                  std::to_string(f.size()) + " vs " + std::to_string(d));
    }
  }

  const std::size_t n = features.size();
  ClassDistribution out;
  out.count = n;
  out.raw_mean.resize(d);
  out.diag_cov.assign(d, kVarianceFloor);
  std::vector<double> column(n);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < n; ++k) column[k] = features[k][i];
    const double mu = canonical_sum(column) / static_cast<double>(n);
    out.raw_mean[i] = mu;
    if (n >= 2) {
      for (std::size_t k = 0; k < n; ++k) {
        const double dev = features[k][i] - mu;
        column[k] = dev * dev;
      }
      const double var = canonical_sum(column) / static_cast<double>(n - 1);
      out.diag_cov[i] = std::max(var, kVarianceFloor);
    }
  }
  out.mean = l2_normalize(out.raw_mean);
  return out;
}

ClassDistribution estimate_distribution(
    std::span<const FeatureRecord> features) {
  std::vector<Vec> vectors;
  vectors.reserve(features.size());
  for (const FeatureRecord& r : features) vectors.push_back(r.vector);
  return estimate_distribution(vectors);
}

double distribution_bias(const ClassDistribution& estimated,
                         std::span<const double> reference_mean) {
  if (estimated.raw_mean.size() != reference_mean.size()) {
    throw Error(Errc::DimensionMismatch, "bias reference dimension");
  }
  Vec gap(reference_mean.size());
  for (std::size_t i = 0; i < gap.size(); ++i) {
    gap[i] = estimated.raw_mean[i] - reference_mean[i];
  }
  return l2_norm(gap);
}

OracleSampler::OracleSampler(Vec direction_pos, Vec direction_neg,
                             double sigma)
    : direction_pos_(std::move(direction_pos)),
      direction_neg_(std::move(direction_neg)),
      sigma_(sigma) {
  if (direction_pos_.size() != direction_neg_.size()) {
    throw Error(Errc::DimensionMismatch, "oracle class directions");
  }
  if (!(sigma_ >= 0.0)) throw Error(Errc::NegativeVariance, "oracle sigma");
}

std::vector<FeatureRecord> OracleSampler::candidates(Label label,
                                                     std::size_t n,
                                                     std::uint64_t seed) const {
  Rng rng(seed);
  const Vec& dir = label == Label::Positive ? direction_pos_ : direction_neg_;
  std::vector<Vec> draws = draw_class_features(dir, sigma_, n, rng);
  std::vector<FeatureRecord> out;
  out.reserve(n);
  const std::string tag(to_string(label));
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({tag + "/" + std::to_string(i), Role::Candidate,
                   std::move(draws[i])});
  }
  return out;
}

CacheSource::CacheSource(std::vector<FeatureRecord> positive,
                         std::vector<FeatureRecord> negative)
    : positive_(std::move(positive)), negative_(std::move(negative)) {}

CacheSource CacheSource::from_index(const FeatureIndex& index,
                                    std::string_view positive_tag,
                                    std::string_view negative_tag) {
  auto collect = [&](std::string_view tag) {
    std::vector<FeatureRecord> out;
    for (const FeatureRecord* r : index.with_tag(tag)) {
      if (r->role == Role::Candidate) out.push_back(*r);
    }
    return out;
  };
  return CacheSource(collect(positive_tag), collect(negative_tag));
}

std::vector<FeatureRecord> CacheSource::candidates(Label label, std::size_t n,
                                                   std::uint64_t) const {
  const auto& pool = label == Label::Positive ? positive_ : negative_;
  const std::size_t take = std::min(n, pool.size());
  return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take)};
}

std::size_t CacheSource::available(Label label) const {
  return label == Label::Positive ? positive_.size() : negative_.size();
}

std::vector<FeatureRecord> augment_support(std::span<const FeatureRecord> base,
                                           const AugmentationSource& source,
                                           Label label,
                                           std::span<const double> class_text,
                                           std::size_t k, std::size_t pool,
                                           std::uint64_t seed) {
  std::vector<FeatureRecord> out(base.begin(), base.end());
  if (k == 0) return out;
  if (pool < k) {
    throw Error(Errc::InvalidConfig, "candidate pool " + std::to_string(pool) +
                                         " smaller than k " +
                                         std::to_string(k));
  }
  std::vector<FeatureRecord> found = source.candidates(label, pool, seed);
  if (found.size() < pool) {
    throw Error(Errc::InsufficientCandidates,
                "requested " + std::to_string(pool) + " " +
                    std::string(to_string(label)) + " candidates, got " +
                    std::to_string(found.size()));
  }
  found.resize(pool);

  std::vector<double> score(pool);
  for (std::size_t i = 0; i < pool; ++i) {
    if (found[i].vector.size() != class_text.size()) {
      throw Error(Errc::DimensionMismatch, "candidate '" + found[i].id + "'");
    }
    score[i] = cosine(found[i].vector, class_text);
  }
  std::vector<std::size_t> order(pool);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return score[a] > score[b];
                   });
  for (std::size_t i = 0; i < k; ++i) {
    FeatureRecord chosen = std::move(found[order[i]]);
    chosen.role = Role::Candidate;
    out.push_back(std::move(chosen));
  }
  return out;
}

RectifiedSupport rectified_distributions(const Episode& episode,
                                         const AugmentationSource* source,
                                         const TextFeatures& text,
                                         const AugmentConfig& cfg,
                                         std::uint64_t seed) {
  episode.validate();
  const std::size_t k = source == nullptr ? 0 : cfg.k;
  RectifiedSupport out;
  for (Label label : {Label::Positive, Label::Negative}) {
    auto& members = label == Label::Positive ? out.positive : out.negative;
    if (k == 0) {
      const auto& base = episode.supports(label);
      members.assign(base.begin(), base.end());
    } else {
      members = augment_support(episode.supports(label), *source, label,
                                text.for_label(label), k, cfg.pool(),
                                derive_seed(seed, to_string(label)));
    }
  }
  out.pos = estimate_distribution(out.positive);
  out.neg = estimate_distribution(out.negative);
  return out;
}

}  // namespace dna
