// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dna/adapter.hpp"
#include "dna/distribution.hpp"

namespace dna {

/// Two per-class rows, positive first.
using ClassRows = std::array<Vec, 2>;

/// Trainable generalization of the training-free adapter.
///
///   logits_j = lambda * exp(-eta * (1 - W_j . f)) + f . (t_j + beta * A_j)
///
/// W starts at the rectified class means and A at zero, so a fresh model
/// reproduces the fused training-free logits. The text rows never change.
class TunableModel {
 public:
  TunableModel(ClassRows query_rows, ClassRows adapter_rows,
               const TextFeatures& text, const AdapterConfig& cfg);

  static TunableModel init(const ClassDistribution& pos,
                           const ClassDistribution& neg,
                           const TextFeatures& text, const AdapterConfig& cfg);

  std::size_t dim() const { return text_[0].size(); }
  const AdapterConfig& config() const { return cfg_; }
  const ClassRows& query_rows() const { return w_; }
  const ClassRows& adapter_rows() const { return a_; }
  const ClassRows& text_rows() const { return text_; }
  ClassRows& mutable_query_rows() { return w_; }
  ClassRows& mutable_adapter_rows() { return a_; }

  bool operator==(const TunableModel&) const = default;

 private:
  ClassRows w_;
  ClassRows a_;
  ClassRows text_;
  AdapterConfig cfg_;
};

LogitPair forward(const TunableModel& model, std::span<const double> query);

/// Softmax cross-entropy at temperature tau. Throws InvalidLabel for
/// label > 1.
double cross_entropy(const LogitPair& logits, std::size_t label, double tau);

struct Gradients {
  ClassRows d_query;    ///< dL/dW
  ClassRows d_adapter;  ///< dL/dA
};

/// Analytic gradient of cross_entropy(forward(model, query), label):
///   g_j     = (p_j - y_j) / tau
///   dW_j    = g_j * lambda * eta * exp(-eta * (1 - W_j . f)) * f
///   dA_j    = g_j * beta * f
Gradients gradients(const TunableModel& model, std::span<const double> query,
                    std::size_t label);

/// Largest relative error between `analytic` and central differences of
/// the loss with step h, over every entry of W and A. The denominator is
/// max(|analytic|, |numeric|, 1e-12). Steps in [1e-7, 1e-3] are the
/// meaningful range for f64; larger steps show truncation error.
double fd_gradcheck(const TunableModel& model, std::span<const double> query,
                    std::size_t label, double h, const Gradients& analytic);
double fd_gradcheck(const TunableModel& model, std::span<const double> query,
                    std::size_t label, double h);

/// Pass threshold for fd_gradcheck at h = 1e-5 in f64.
inline constexpr double kGradcheckTolerance = 1e-5;

/// A seeded random point for gradient checking: text rows and W rows near
/// random unit vectors, small random A, a unit query near one W row, and a
/// random label.
struct GradcheckCase {
  TunableModel model;
  Vec query;
  std::size_t label = 0;
};
GradcheckCase make_gradcheck_case(std::size_t dim, std::uint64_t seed,
                                  const AdapterConfig& cfg = {});

/// AdamW with bias-corrected moments and decoupled weight decay.
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW() = default;
  explicit AdamW(Options options) : options_(options) {}

  /// One update of every parameter block. Block shapes are fixed by the
  /// first call; a later mismatch throws ShapeMismatch.
  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads);

  std::uint64_t steps() const { return t_; }
  const Options& options() const { return options_; }

 private:
  Options options_;
  std::vector<Vec> m_;
  std::vector<Vec> v_;
  std::uint64_t t_ = 0;
};

struct FinetuneConfig {
  std::size_t epochs = 20;
  double lr = 1e-3;
  double weight_decay = 0.01;
  /// Also decay the query model W. Off by default: W is initialized at the
  /// class means, and decaying it toward zero raises the loss of already
  /// well-classified supports.
  bool decay_query_model = false;
  /// Samples per step; 0 means the whole support set.
  std::size_t batch_size = 0;

  void validate() const;
};

struct FinetuneResult {
  TunableModel model;
  /// Mean support loss before training, then after each epoch.
  std::vector<double> loss_history;
};

/// Mean loss of `model` over labeled supports.
double support_loss(const TunableModel& model,
                    const RectifiedSupport& support);

/// Fine-tunes W and A on the (augmented) support set of one episode.
/// Samples are reshuffled each epoch with a generator seeded by `seed`.
FinetuneResult finetune_episode(const RectifiedSupport& support,
                                const TextFeatures& text,
                                const AdapterConfig& cfg,
                                const FinetuneConfig& train,
                                std::uint64_t seed);

/// Diagnostic JSON snapshot: dims, config, W and A row-major.
std::string model_to_json(const TunableModel& model);

}  // namespace dna
