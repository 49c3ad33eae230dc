// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dna/adapter.hpp"
#include "dna/distribution.hpp"
#include "dna/features.hpp"
#include "dna/finetune.hpp"

namespace dna {

enum class Mode : std::uint8_t { ZeroShot, TTDNA, TTDNAF, Prototype };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);
/// Row label used in markdown tables.
std::string_view display_name(Mode mode);

struct EvalConfig {
  Mode mode = Mode::TTDNA;
  AdapterConfig adapter;
  AugmentConfig augment;
  FinetuneConfig finetune;
  std::uint64_t seed = 0;
  /// Require query labels and score predictions.
  bool score = true;

  bool operator==(const EvalConfig&) const;
};

/// Everything needed to run one episode. A non-empty setup_error marks an
/// episode that failed to resolve; it is reported, not run.
struct EpisodeJob {
  Episode episode;
  TextFeatures text;
  std::shared_ptr<const AugmentationSource> augmentation;
  std::string setup_error;
};

struct EpisodeResult {
  std::string episode_id;
  Split split = Split::SeenActSeenObj;
  std::optional<Label> predicted;
  std::optional<Label> truth;
  std::optional<bool> correct;
  LogitPair logits{};
  LogitPair probabilities{};
  /// Empty on success.
  std::string error;

  bool operator==(const EpisodeResult&) const = default;
};

/// Predicts one episode in the given mode. Throws MissingLabel when
/// cfg.score is set and the episode has no query label.
EpisodeResult run_episode(const Episode& episode, const TextFeatures& text,
                          const AugmentationSource* augmentation,
                          const EvalConfig& cfg, std::uint64_t seed);

/// The fine-tuned model TTDNAF mode predicts with, for the same seed.
FinetuneResult train_episode_model(const Episode& episode,
                                   const TextFeatures& text,
                                   const AugmentationSource* augmentation,
                                   const EvalConfig& cfg, std::uint64_t seed);

/// Per-episode seed: a stable hash of the global seed and the episode id.
std::uint64_t episode_seed(std::uint64_t global_seed,
                           std::string_view episode_id);

struct Wallclock {
  double total_ms = 0.0;
  std::size_t jobs = 1;
};

struct EvalReport {
  EvalConfig config;
  std::vector<EpisodeResult> per_episode;
  /// Accuracy per split, over that split's scored episodes.
  std::map<Split, double> per_split_accuracy;
  /// Correct / scored episodes. Errored episodes are counted separately.
  double overall_accuracy = 0.0;
  std::size_t scored = 0;
  std::size_t correct = 0;
  std::size_t errors = 0;
  Wallclock wallclock;

  /// Mean of the per-split accuracies.
  double split_average() const;
};

/// Recomputes the aggregate fields from per_episode.
void aggregate(EvalReport& report);

/// Runs every job on `parallelism` worker threads. Results are in job
/// order and do not depend on the number of workers. Episode failures
/// become error rows.
EvalReport evaluate(std::span<const EpisodeJob> jobs, const EvalConfig& cfg,
                    std::size_t parallelism = 1);

}  // namespace dna
