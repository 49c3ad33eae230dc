// SPDX-License-Identifier: Apache-2.0
#include "dna/eval.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include "dna/error.hpp"

namespace dna {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::ZeroShot: return "zeroshot";
    case Mode::TTDNA: return "ttdna";
    case Mode::TTDNAF: return "ttdnaf";
    case Mode::Prototype: return "proto";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view text) {
  for (Mode m : {Mode::ZeroShot, Mode::TTDNA, Mode::TTDNAF, Mode::Prototype}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

std::string_view display_name(Mode mode) {
  switch (mode) {
    case Mode::ZeroShot: return "Zero-shot";
    case Mode::TTDNA: return "TT-DNA";
    case Mode::TTDNAF: return "TT-DNA-F";
    case Mode::Prototype: return "ProtoNet";
  }
  return "unknown";
}

bool EvalConfig::operator==(const EvalConfig& o) const {
  return mode == o.mode && adapter.eta == o.adapter.eta &&
         adapter.lambda == o.adapter.lambda && adapter.beta == o.adapter.beta &&
         adapter.tau == o.adapter.tau && augment.k == o.augment.k &&
         augment.pool_factor == o.augment.pool_factor &&
         finetune.epochs == o.finetune.epochs && finetune.lr == o.finetune.lr &&
         finetune.weight_decay == o.finetune.weight_decay &&
         finetune.decay_query_model == o.finetune.decay_query_model &&
         finetune.batch_size == o.finetune.batch_size && seed == o.seed &&
         score == o.score;
}

std::uint64_t episode_seed(std::uint64_t global_seed,
                           std::string_view episode_id) {
  return derive_seed(global_seed, episode_id);
}

FinetuneResult train_episode_model(const Episode& episode,
                                   const TextFeatures& text,
                                   const AugmentationSource* augmentation,
                                   const EvalConfig& cfg, std::uint64_t seed) {
  const RectifiedSupport support = rectified_distributions(
      episode, augmentation, text, cfg.augment, derive_seed(seed, "augment"));
  return finetune_episode(support, text, cfg.adapter, cfg.finetune,
                          derive_seed(seed, "finetune"));
}

EpisodeResult run_episode(const Episode& episode, const TextFeatures& text,
                          const AugmentationSource* augmentation,
                          const EvalConfig& cfg, std::uint64_t seed) {
  if (cfg.score && !episode.query_label) {
    throw Error(Errc::MissingLabel, "episode " + episode.id + " has no label");
  }
  cfg.adapter.validate();
  episode.validate();
  const Vec& query = episode.query.vector;

  Prediction prediction;
  switch (cfg.mode) {
    case Mode::ZeroShot:
      prediction = predict_zero_shot(query, text, cfg.adapter.tau);
      break;
    case Mode::Prototype: {
      const RectifiedSupport basic = rectified_distributions(
          episode, nullptr, text, cfg.augment, seed);
      prediction = predict_prototype(query, basic.pos, basic.neg,
                                     cfg.adapter.tau);
      break;
    }
    case Mode::TTDNA: {
      const RectifiedSupport support =
          rectified_distributions(episode, augmentation, text, cfg.augment,
                                  derive_seed(seed, "augment"));
      prediction = predict(episode, support, text, cfg.adapter);
      break;
    }
    case Mode::TTDNAF: {
      const FinetuneResult trained =
          train_episode_model(episode, text, augmentation, cfg, seed);
      prediction = decide(forward(trained.model, query), cfg.adapter.tau);
      break;
    }
  }

  EpisodeResult out;
  out.episode_id = episode.id;
  out.split = episode.split;
  out.predicted = prediction.label;
  out.truth = episode.query_label;
  if (episode.query_label) out.correct = prediction.label == *episode.query_label;
  out.logits = prediction.logits;
  out.probabilities = prediction.probabilities;
  return out;
}

double EvalReport::split_average() const {
  if (per_split_accuracy.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [split, acc] : per_split_accuracy) total += acc;
  return total / static_cast<double>(per_split_accuracy.size());
}

void aggregate(EvalReport& report) {
  std::map<Split, std::pair<std::size_t, std::size_t>> tally;
  report.scored = report.correct = report.errors = 0;
  for (const EpisodeResult& r : report.per_episode) {
    if (!r.error.empty()) {
      ++report.errors;
      continue;
    }
    if (!r.correct) continue;
    auto& [hits, seen] = tally[r.split];
    ++seen;
    ++report.scored;
    if (*r.correct) {
      ++hits;
      ++report.correct;
    }
  }
  report.per_split_accuracy.clear();
  for (const auto& [split, counts] : tally) {
    report.per_split_accuracy[split] =
        static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  report.overall_accuracy =
      report.scored == 0 ? 0.0
                         : static_cast<double>(report.correct) /
                               static_cast<double>(report.scored);
}

EvalReport evaluate(std::span<const EpisodeJob> jobs, const EvalConfig& cfg,
                    std::size_t parallelism) {
  if (jobs.empty()) throw Error(Errc::InvalidConfig, "no episodes to evaluate");
  cfg.adapter.validate();
  cfg.finetune.validate();
  const auto started = std::chrono::steady_clock::now();

  EvalReport report;
  report.config = cfg;
  report.per_episode.resize(jobs.size());

  auto run_one = [&](std::size_t index) {
    const EpisodeJob& job = jobs[index];
    EpisodeResult& slot = report.per_episode[index];
    if (!job.setup_error.empty()) {
      slot.episode_id = job.episode.id;
      slot.split = job.episode.split;
      slot.truth = job.episode.query_label;
      slot.error = job.setup_error;
      return;
    }
    try {
      slot = run_episode(job.episode, job.text, job.augmentation.get(), cfg,
                         episode_seed(cfg.seed, job.episode.id));
    } catch (const std::exception& e) {
      slot = EpisodeResult{};
      slot.episode_id = job.episode.id;
      slot.split = job.episode.split;
      slot.truth = job.episode.query_label;
      slot.error = e.what();
    }
  };

  const std::size_t workers =
      std::max<std::size_t>(1, std::min(parallelism, jobs.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) run_one(i);
      });
    }
  }

  aggregate(report);
  report.wallclock.jobs = workers;
  report.wallclock.total_ms =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - started)
          .count();
  return report;
}

}  // namespace dna
