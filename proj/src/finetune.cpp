// SPDX-License-Identifier: Apache-2.0
#include "dna/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dna/error.hpp"
#include "json.hpp"

namespace dna {

TunableModel::TunableModel(ClassRows query_rows, ClassRows adapter_rows,
                           const TextFeatures& text, const AdapterConfig& cfg)
    : w_(std::move(query_rows)),
      a_(std::move(adapter_rows)),
      text_{text.t_true, text.t_false},
      cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = text_[0].size();
  for (const ClassRows* rows : {&w_, &a_, &text_}) {
    for (const Vec& row : *rows) {
      if (row.size() != d) {
        throw Error(Errc::DimensionMismatch, "model rows must share dim " +
                                                 std::to_string(d));
      }
    }
  }
}

TunableModel TunableModel::init(const ClassDistribution& pos,
                                const ClassDistribution& neg,
                                const TextFeatures& text,
                                const AdapterConfig& cfg) {
  const std::size_t d = text.t_true.size();
  return TunableModel({pos.mean, neg.mean}, {Vec(d, 0.0), Vec(d, 0.0)}, text,
                      cfg);
}

namespace {

double row_dot(const Vec& row, std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) acc += row[i] * x[i];
  return acc;
}

void require_dim(const TunableModel& model, std::span<const double> query) {
  if (query.size() != model.dim()) {
    throw Error(Errc::DimensionMismatch,
                "query dim " + std::to_string(query.size()) + ", model dim " +
                    std::to_string(model.dim()));
  }
}

/// Visual affinity term exp(-eta * (1 - W_j . f)) per class.
LogitPair affinities(const TunableModel& model, std::span<const double> query) {
  const double eta = model.config().eta;
  const ClassRows& w = model.query_rows();
  return {std::exp(-eta * (1.0 - row_dot(w[0], query))),
          std::exp(-eta * (1.0 - row_dot(w[1], query)))};
}

}  // namespace

LogitPair forward(const TunableModel& model, std::span<const double> query) {
  require_dim(model, query);
  const AdapterConfig& cfg = model.config();
  const LogitPair visual = affinities(model, query);
  LogitPair out{};
  for (std::size_t j = 0; j < 2; ++j) {
    const Vec& t = model.text_rows()[j];
    const Vec& a = model.adapter_rows()[j];
    double text_term = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      text_term += query[i] * (t[i] + cfg.beta * a[i]);
    }
    out[j] = cfg.lambda * visual[j] + text_term;
  }
  return out;
}

double cross_entropy(const LogitPair& logits, std::size_t label, double tau) {
  if (label > 1) {
    throw Error(Errc::InvalidLabel, "label " + std::to_string(label));
  }
  if (!(tau > 0.0)) throw Error(Errc::InvalidTemperature, "tau must be > 0");
  // Two classes: -log p_label = softplus(z_other - z_label). Evaluating it
  // directly keeps full relative precision when the label dominates.
  const double margin = (logits[1 - label] - logits[label]) / tau;
  return margin > 0.0 ? margin + std::log1p(std::exp(-margin))
                      : std::log1p(std::exp(margin));
}

Gradients gradients(const TunableModel& model, std::span<const double> query,
                    std::size_t label) {
  if (label > 1) {
    throw Error(Errc::InvalidLabel, "label " + std::to_string(label));
  }
  require_dim(model, query);
  const AdapterConfig& cfg = model.config();
  const LogitPair logits = forward(model, query);
  const LogitPair visual = affinities(model, query);
  // p_other = sigmoid(margin); p_label - 1 = -p_other exactly, and using
  // that avoids cancellation when the label dominates.
  const double margin = (logits[1 - label] - logits[label]) / cfg.tau;
  const double p_other = margin > 0.0 ? 1.0 / (1.0 + std::exp(-margin))
                                      : std::exp(margin) / (1.0 + std::exp(margin));

  const std::size_t d = model.dim();
  Gradients g{{Vec(d), Vec(d)}, {Vec(d), Vec(d)}};
  for (std::size_t j = 0; j < 2; ++j) {
    const double dlogit = (j == label ? -p_other : p_other) / cfg.tau;
    const double w_scale = dlogit * cfg.lambda * cfg.eta * visual[j];
    const double a_scale = dlogit * cfg.beta;
    for (std::size_t i = 0; i < d; ++i) {
      g.d_query[j][i] = w_scale * query[i];
      g.d_adapter[j][i] = a_scale * query[i];
    }
  }
  return g;
}

double fd_gradcheck(const TunableModel& model, std::span<const double> query,
                    std::size_t label, double h, const Gradients& analytic) {
  if (!(h > 0.0)) {
    throw Error(Errc::InvalidConfig, "finite-difference step must be > 0");
  }
  const double tau = model.config().tau;
  TunableModel probe = model;
  double worst = 0.0;
  auto check_block = [&](ClassRows& rows, const ClassRows& grad) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t i = 0; i < rows[j].size(); ++i) {
        const double saved = rows[j][i];
        rows[j][i] = saved + h;
        const double up = cross_entropy(forward(probe, query), label, tau);
        rows[j][i] = saved - h;
        const double down = cross_entropy(forward(probe, query), label, tau);
        rows[j][i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double exact = grad[j][i];
        const double scale =
            std::max({std::abs(exact), std::abs(numeric), 1e-12});
        worst = std::max(worst, std::abs(exact - numeric) / scale);
      }
    }
  };
  check_block(probe.mutable_query_rows(), analytic.d_query);
  check_block(probe.mutable_adapter_rows(), analytic.d_adapter);
  return worst;
}

double fd_gradcheck(const TunableModel& model, std::span<const double> query,
                    std::size_t label, double h) {
  return fd_gradcheck(model, query, label, h, gradients(model, query, label));
}

GradcheckCase make_gradcheck_case(std::size_t dim, std::uint64_t seed,
                                  const AdapterConfig& cfg) {
  if (dim < 2) throw Error(Errc::InvalidConfig, "gradcheck dim must be >= 2");
  Rng rng(seed);
  auto unit = [&] {
    Vec v(dim);
    for (double& x : v) x = rng.normal();
    return l2_normalize(v);
  };
  auto jitter = [&](Vec v, double scale) {
    for (double& x : v) x += scale * rng.normal();
    return v;
  };
  TextFeatures text{unit(), unit(), "", ""};
  ClassRows w = {jitter(unit(), 0.05), jitter(unit(), 0.05)};
  ClassRows a = {jitter(Vec(dim, 0.0), 0.05), jitter(Vec(dim, 0.0), 0.05)};
  // Queries near a class row keep the softmax away from full saturation.
  const std::size_t near = rng.below(2);
  Vec query = l2_normalize(jitter(w[near], 0.3));
  const std::size_t label = rng.below(2);
  return {TunableModel(std::move(w), std::move(a), text, cfg), std::move(query),
          label};
}

void AdamW::step(std::span<const std::span<double>> params,
                 std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) {
    throw Error(Errc::ShapeMismatch, "params/grads block count differs");
  }
  if (m_.empty()) {
    for (const auto& block : params) {
      m_.emplace_back(block.size(), 0.0);
      v_.emplace_back(block.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "parameter block count changed");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != m_[b].size() || grads[b].size() != m_[b].size()) {
      throw Error(Errc::ShapeMismatch,
                  "block " + std::to_string(b) + " shape changed");
    }
  }

  ++t_;
  const Options& o = options_;
  const double correct1 =
      1.0 - std::pow(o.beta1, static_cast<double>(t_));
  const double correct2 =
      1.0 - std::pow(o.beta2, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    std::span<double> p = params[b];
    std::span<const double> g = grads[b];
    Vec& m = m_[b];
    Vec& v = v_[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] -= o.lr * o.weight_decay * p[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      p[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

void FinetuneConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw Error(Errc::InvalidConfig, "lr must be >= 0");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw Error(Errc::InvalidConfig, "weight_decay must be >= 0");
  }
}

namespace {

struct LabeledSample {
  const Vec* feature;
  std::size_t label;
};

std::vector<LabeledSample> labeled_samples(const RectifiedSupport& support) {
  std::vector<LabeledSample> out;
  for (const FeatureRecord& r : support.positive) out.push_back({&r.vector, 0});
  for (const FeatureRecord& r : support.negative) out.push_back({&r.vector, 1});
  return out;
}

}  // namespace

double support_loss(const TunableModel& model,
                    const RectifiedSupport& support) {
  const std::vector<LabeledSample> samples = labeled_samples(support);
  if (samples.empty()) throw Error(Errc::EmptySupport, "no training samples");
  const double tau = model.config().tau;
  double total = 0.0;
  for (const LabeledSample& s : samples) {
    total += cross_entropy(forward(model, *s.feature), s.label, tau);
  }
  return total / static_cast<double>(samples.size());
}

FinetuneResult finetune_episode(const RectifiedSupport& support,
                                const TextFeatures& text,
                                const AdapterConfig& cfg,
                                const FinetuneConfig& train,
                                std::uint64_t seed) {
  train.validate();
  if (support.positive.empty() || support.negative.empty()) {
    throw Error(Errc::EmptySupport, "fine-tuning needs both classes");
  }
  FinetuneResult result{TunableModel::init(support.pos, support.neg, text, cfg),
                        {}};
  TunableModel& model = result.model;
  result.loss_history.reserve(train.epochs + 1);
  result.loss_history.push_back(support_loss(model, support));

  std::vector<LabeledSample> samples = labeled_samples(support);
  const std::size_t batch =
      train.batch_size == 0 ? samples.size()
                            : std::min(train.batch_size, samples.size());
  const std::size_t d = model.dim();
  // Two parameter groups: W starts at the class means, so pulling it toward
  // zero is opt-in; A starts at zero and is always decayed.
  AdamW query_opt({.lr = train.lr,
                   .weight_decay =
                       train.decay_query_model ? train.weight_decay : 0.0});
  AdamW adapter_opt({.lr = train.lr, .weight_decay = train.weight_decay});
  Rng rng(seed);

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    rng.shuffle(samples);
    for (std::size_t start = 0; start < samples.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, samples.size());
      Gradients sum{{Vec(d, 0.0), Vec(d, 0.0)}, {Vec(d, 0.0), Vec(d, 0.0)}};
      for (std::size_t s = start; s < stop; ++s) {
        const Gradients g =
            gradients(model, *samples[s].feature, samples[s].label);
        for (std::size_t j = 0; j < 2; ++j) {
          for (std::size_t i = 0; i < d; ++i) {
            sum.d_query[j][i] += g.d_query[j][i];
            sum.d_adapter[j][i] += g.d_adapter[j][i];
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t j = 0; j < 2; ++j) {
        for (std::size_t i = 0; i < d; ++i) {
          sum.d_query[j][i] *= inv;
          sum.d_adapter[j][i] *= inv;
        }
      }
      ClassRows& w = model.mutable_query_rows();
      ClassRows& a = model.mutable_adapter_rows();
      const std::array<std::span<double>, 2> w_params = {w[0], w[1]};
      const std::array<std::span<const double>, 2> w_grads = {sum.d_query[0],
                                                              sum.d_query[1]};
      const std::array<std::span<double>, 2> a_params = {a[0], a[1]};
      const std::array<std::span<const double>, 2> a_grads = {
          sum.d_adapter[0], sum.d_adapter[1]};
      query_opt.step(w_params, w_grads);
      adapter_opt.step(a_params, a_grads);
    }
    result.loss_history.push_back(support_loss(model, support));
  }
  return result;
}

std::string model_to_json(const TunableModel& model) {
  auto flatten = [](const ClassRows& rows) {
    std::vector<double> flat;
    for (const Vec& row : rows) flat.insert(flat.end(), row.begin(), row.end());
    return flat;
  };
  const AdapterConfig& cfg = model.config();
  nlohmann::json j;
  j["rows"] = 2;
  j["dim"] = model.dim();
  j["config"] = {{"eta", cfg.eta},
                 {"lambda", cfg.lambda},
                 {"beta", cfg.beta},
                 {"tau", cfg.tau}};
  j["W"] = flatten(model.query_rows());
  j["A"] = flatten(model.adapter_rows());
  return j.dump(2);
}

}  // namespace dna
