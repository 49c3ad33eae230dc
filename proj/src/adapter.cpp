// SPDX-License-Identifier: Apache-2.0
#include "dna/adapter.hpp"

#include <cmath>
#include <string>

#include "dna/error.hpp"

namespace dna {

void AdapterConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw Error(Errc::InvalidConfig, "eta must be > 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(Errc::InvalidConfig, "lambda must be >= 0");
  }
  if (!std::isfinite(beta)) throw Error(Errc::InvalidConfig, "beta not finite");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(Errc::InvalidConfig, "tau must be > 0");
  }
}

LogitPair visual_logits(std::span<const double> query,
                        std::span<const double> mean_pos,
                        std::span<const double> mean_neg, double eta) {
  return {std::exp(-eta * (1.0 - cosine(query, mean_pos))),
          std::exp(-eta * (1.0 - cosine(query, mean_neg)))};
}

LogitPair clip_logits(std::span<const double> query, const TextFeatures& text) {
  return {cosine(query, text.t_true), cosine(query, text.t_false)};
}

LogitPair fuse_logits(const LogitPair& visual, const LogitPair& clip,
                      double lambda) {
  return {lambda * visual[0] + clip[0], lambda * visual[1] + clip[1]};
}

Prediction decide(const LogitPair& logits, double tau) {
  const Vec p = softmax(logits, tau);
  Prediction out;
  out.logits = logits;
  out.probabilities = {p[0], p[1]};
  out.label = label_from_index(argmax(logits));
  return out;
}

Prediction predict(std::span<const double> query, const ClassDistribution& pos,
                   const ClassDistribution& neg, const TextFeatures& text,
                   const AdapterConfig& cfg) {
  const LogitPair visual = visual_logits(query, pos.mean, neg.mean, cfg.eta);
  return decide(fuse_logits(visual, clip_logits(query, text), cfg.lambda),
                cfg.tau);
}

Prediction predict(const Episode& episode, const RectifiedSupport& support,
                   const TextFeatures& text, const AdapterConfig& cfg) {
  return predict(episode.query.vector, support.pos, support.neg, text, cfg);
}

Prediction predict_visual_only(std::span<const double> query,
                               const ClassDistribution& pos,
                               const ClassDistribution& neg,
                               const AdapterConfig& cfg) {
  return decide(visual_logits(query, pos.mean, neg.mean, cfg.eta), cfg.tau);
}

Prediction predict_zero_shot(std::span<const double> query,
                             const TextFeatures& text, double tau) {
  return decide(clip_logits(query, text), tau);
}

Prediction predict_prototype(std::span<const double> query,
                             const ClassDistribution& pos,
                             const ClassDistribution& neg, double tau) {
  return decide({cosine(query, pos.mean), cosine(query, neg.mean)}, tau);
}

}  // namespace dna
