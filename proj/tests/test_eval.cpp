// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dna/error.hpp"
#include "dna/eval.hpp"
#include "dna/report.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace dna;

namespace {

std::vector<EpisodeJob> synthetic_jobs(std::size_t n, double sigma,
                                       std::uint64_t seed,
                                       bool with_candidates = true) {
  std::vector<EpisodeJob> jobs;
  for (std::size_t i = 0; i < n; ++i) {
    SynthConfig cfg;
    cfg.noise_sigma = sigma;
    cfg.seed = derive_seed(seed, std::to_string(i));
    SyntheticEpisode s = generate_synthetic_episode(
        cfg, "ep" + std::to_string(i), static_cast<Split>(i % kSplitCount));
    EpisodeJob job{std::move(s.episode), std::move(s.text), nullptr, {}};
    if (with_candidates) {
      job.augmentation =
          std::make_shared<OracleSampler>(s.true_pos, s.true_neg, sigma);
    }
    jobs.push_back(std::move(job));
  }
  return jobs;
}

EvalConfig config(Mode mode) {
  EvalConfig cfg;
  cfg.mode = mode;
  cfg.seed = 13;
  return cfg;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("mode names") {
  for (Mode m : {Mode::ZeroShot, Mode::TTDNA, Mode::TTDNAF, Mode::Prototype}) {
    CHECK(parse_mode(to_string(m)) == m);
  }
  CHECK(to_string(Mode::TTDNAF) == "ttdnaf");
  CHECK(display_name(Mode::TTDNAF) == "TT-DNA-F");
  CHECK_FALSE(parse_mode("TTDNA"));
}

TEST_CASE("adapter with lambda zero equals zero-shot") {
  const auto jobs = synthetic_jobs(40, 0.15, 1);
  EvalConfig ttdna = config(Mode::TTDNA);
  ttdna.adapter.lambda = 0.0;
  const EvalReport a = evaluate(jobs, ttdna);
  const EvalReport z = evaluate(jobs, config(Mode::ZeroShot));
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    CHECK(a.per_episode[i].predicted == z.per_episode[i].predicted);
    CHECK(a.per_episode[i].logits == z.per_episode[i].logits);
  }
}

TEST_CASE("noise-free prototypes are perfect") {
  const auto jobs = synthetic_jobs(40, 0.0, 2, false);
  const EvalReport r = evaluate(jobs, config(Mode::Prototype));
  CHECK(r.overall_accuracy == 1.0);
  CHECK(r.scored == 40);
  CHECK(r.errors == 0);
}

TEST_CASE("zero epochs of fine-tuning equals the training-free adapter") {
  const auto jobs = synthetic_jobs(20, 0.1, 3);
  EvalConfig f = config(Mode::TTDNAF);
  f.finetune.epochs = 0;
  const EvalReport a = evaluate(jobs, f);
  const EvalReport b = evaluate(jobs, config(Mode::TTDNA));
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    CHECK(a.per_episode[i].predicted == b.per_episode[i].predicted);
    CHECK(a.per_episode[i].logits[0] ==
          doctest::Approx(b.per_episode[i].logits[0]).epsilon(1e-14));
    CHECK(a.per_episode[i].logits[1] ==
          doctest::Approx(b.per_episode[i].logits[1]).epsilon(1e-14));
  }
}

TEST_CASE("results do not depend on the number of workers") {
  const auto jobs = synthetic_jobs(60, 0.15, 4);
  for (Mode m : {Mode::TTDNA, Mode::TTDNAF}) {
    const EvalReport one = evaluate(jobs, config(m), 1);
    const EvalReport many = evaluate(jobs, config(m), 8);
    CHECK(one.per_episode == many.per_episode);
    CHECK(one.overall_accuracy == many.overall_accuracy);
    CHECK(emit_report(one, ReportFormat::Json, false) ==
          emit_report(many, ReportFormat::Json, false));
  }
}

TEST_CASE("episode failures become error rows") {
  auto jobs = synthetic_jobs(6, 0.1, 5);
  jobs[1].episode.query_label.reset();
  jobs[2].setup_error = "UnknownRecord: nope";
  jobs[3].episode.support_neg.clear();
  const EvalReport r = evaluate(jobs, config(Mode::TTDNA), 2);
  CHECK(r.errors == 3);
  CHECK(r.scored == 3);
  CHECK(r.per_episode[1].error.find("MissingLabel") != std::string::npos);
  CHECK(r.per_episode[2].error == "UnknownRecord: nope");
  CHECK(r.per_episode[3].error.find("EmptySupport") != std::string::npos);
  CHECK_FALSE(r.per_episode[1].correct);

  // Unscored runs accept unlabeled queries.
  EvalConfig unscored = config(Mode::TTDNA);
  unscored.score = false;
  const EvalReport u = evaluate(jobs, unscored);
  CHECK(u.per_episode[1].error.empty());
  CHECK(u.per_episode[1].predicted.has_value());
}

TEST_CASE("aggregates are recomputable from the rows") {
  const auto jobs = synthetic_jobs(50, 0.2, 6);
  EvalReport r = evaluate(jobs, config(Mode::ZeroShot));
  std::size_t correct = 0;
  std::map<Split, std::pair<int, int>> per;
  for (const EpisodeResult& e : r.per_episode) {
    correct += *e.correct;
    per[e.split].first += *e.correct;
    per[e.split].second += 1;
  }
  CHECK(r.correct == correct);
  CHECK(r.overall_accuracy == static_cast<double>(correct) / 50.0);
  double avg = 0.0;
  for (const auto& [split, counts] : per) {
    const double acc = static_cast<double>(counts.first) / counts.second;
    CHECK(r.per_split_accuracy.at(split) == acc);
    avg += acc / 4.0;
  }
  CHECK(r.split_average() == doctest::Approx(avg).epsilon(1e-15));

  EvalReport copy = r;
  copy.overall_accuracy = -1.0;
  copy.per_split_accuracy.clear();
  aggregate(copy);
  CHECK(copy.overall_accuracy == r.overall_accuracy);
  CHECK(copy.per_split_accuracy == r.per_split_accuracy);
}

TEST_CASE("episode seeds") {
  CHECK(episode_seed(1, "a") == episode_seed(1, "a"));
  CHECK(episode_seed(1, "a") != episode_seed(2, "a"));
  CHECK(episode_seed(1, "a") != episode_seed(1, "b"));
}

}

TEST_SUITE("report") {

TEST_CASE("json round trip") {
  auto jobs = synthetic_jobs(12, 0.15, 7);
  jobs[0].setup_error = "UnknownRecord: x";
  const EvalReport r = evaluate(jobs, config(Mode::TTDNAF), 3);
  const std::string text = emit_report(r, ReportFormat::Json);
  const EvalReport back = report_from_json(text);
  CHECK(back.config == r.config);
  CHECK(back.per_episode == r.per_episode);
  CHECK(back.per_split_accuracy == r.per_split_accuracy);
  CHECK(back.overall_accuracy == r.overall_accuracy);
  CHECK(back.errors == 1);
  CHECK(back.wallclock.jobs == 3);
  CHECK(emit_report(back, ReportFormat::Json) == text);

  const auto j = nlohmann::json::parse(text);
  CHECK(j["format"] == "dna-report/1");
  CHECK(j.contains("wallclock"));
  CHECK_FALSE(nlohmann::json::parse(emit_report(r, ReportFormat::Json, false))
                  .contains("wallclock"));
  CHECK_THROWS_AS(report_from_json("{\"format\": \"x\"}"), Error);
}

TEST_CASE("csv has one row per episode plus header and summary") {
  const auto jobs = synthetic_jobs(9, 0.1, 8);
  const EvalReport r = evaluate(jobs, config(Mode::TTDNA));
  std::istringstream in(emit_report(r, ReportFormat::Csv));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 9 + 2);
  CHECK(lines.back().rfind("# summary", 0) == 0);
  CHECK(lines[1].rfind("ep0,", 0) == 0);
}

TEST_CASE("markdown grid") {
  const auto jobs = synthetic_jobs(8, 0.1, 9);
  const EvalReport r = evaluate(jobs, config(Mode::ZeroShot));
  const std::string md = emit_report(r, ReportFormat::Markdown);
  std::istringstream in(md);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] ==
        "| Method | Seen act. Seen obj. | Unseen act. Seen obj. | "
        "Seen act. Unseen obj. | Unseen act. Unseen obj. | Avg. |");
  CHECK(lines[2].rfind("| Zero-shot |", 0) == 0);
  int numeric = 0;
  std::istringstream cells(lines[2]);
  for (std::string cell; std::getline(cells, cell, '|');) {
    if (cell.find('.') != std::string::npos &&
        cell.find_first_of("0123456789") != std::string::npos) {
      ++numeric;
    }
  }
  CHECK(numeric == 5);

  EvalReport partial = r;
  partial.per_split_accuracy.erase(Split::SeenActSeenObj);
  partial.per_split_accuracy[Split::UnseenActSeenObj] = 0.5;
  partial.per_split_accuracy[Split::SeenActUnseenObj] = 0.25;
  partial.per_split_accuracy[Split::UnseenActUnseenObj] = 1.0;
  const std::vector<std::string> labels = {"Custom"};
  const std::vector<EvalReport> rows = {partial};
  const std::string table = render_table(rows, labels);
  CHECK(table.find("| Custom | - | 50.00 | 25.00 | 100.00 |") !=
        std::string::npos);
}

TEST_CASE("format_for_path") {
  CHECK(format_for_path("a/b.json") == ReportFormat::Json);
  CHECK(format_for_path("x.csv") == ReportFormat::Csv);
  CHECK(format_for_path("x.md") == ReportFormat::Markdown);
  CHECK_FALSE(format_for_path("x.txt"));
}

}
