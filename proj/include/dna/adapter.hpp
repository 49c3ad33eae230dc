// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>

#include "dna/distribution.hpp"
#include "dna/features.hpp"

namespace dna {

struct AdapterConfig {
  double eta = 5.5;     ///< affinity sharpness
  double lambda = 1.0;  ///< weight of the visual-adapter logits
  double beta = 0.6;    ///< textual-adapter residual scale (fine-tuning)
  double tau = 0.01;    ///< softmax temperature

  /// Throws InvalidConfig.
  void validate() const;

  bool operator==(const AdapterConfig&) const = default;
};

/// Per-class values in class order [positive, negative].
using LogitPair = std::array<double, 2>;

/// exp(-eta * (1 - cos(f_v, mean_J))) for each class mean.
LogitPair visual_logits(std::span<const double> query,
                        std::span<const double> mean_pos,
                        std::span<const double> mean_neg, double eta);

/// Zero-shot logits [f_v . t_true, f_v . t_false].
LogitPair clip_logits(std::span<const double> query, const TextFeatures& text);

/// lambda * visual + clip.
LogitPair fuse_logits(const LogitPair& visual, const LogitPair& clip,
                      double lambda);

struct Prediction {
  Label label = Label::Positive;
  LogitPair probabilities{};
  LogitPair logits{};
};

/// Softmax at temperature tau; ties go to Positive.
Prediction decide(const LogitPair& logits, double tau);

/// Training-free prediction from fused visual-adapter and zero-shot logits.
Prediction predict(std::span<const double> query, const ClassDistribution& pos,
                   const ClassDistribution& neg, const TextFeatures& text,
                   const AdapterConfig& cfg);
Prediction predict(const Episode& episode, const RectifiedSupport& support,
                   const TextFeatures& text, const AdapterConfig& cfg);

/// Diagnostic: the visual adapter alone, i.e. the class whose distribution
/// mean is most similar to the query.
Prediction predict_visual_only(std::span<const double> query,
                               const ClassDistribution& pos,
                               const ClassDistribution& neg,
                               const AdapterConfig& cfg);

Prediction predict_zero_shot(std::span<const double> query,
                             const TextFeatures& text, double tau);

/// Nearest class mean by cosine, no text term. Logits are the cosines.
Prediction predict_prototype(std::span<const double> query,
                             const ClassDistribution& pos,
                             const ClassDistribution& neg, double tau);

}  // namespace dna
