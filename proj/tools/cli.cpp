// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "dna/error.hpp"
#include "dna/eval.hpp"
#include "dna/features.hpp"
#include "dna/finetune.hpp"
#include "dna/manifest.hpp"
#include "dna/report.hpp"
#include "json.hpp"

namespace dna::cli {

namespace fs = std::filesystem;

namespace {

/// Flags shared by eval and sweep.
struct EvalFlags {
  std::string episodes;
  std::string features;
  std::string text;
  std::string mode;
  double eta = 5.5;
  double lambda = 1.0;
  double beta = 0.6;
  double tau = 0.01;
  std::size_t k = 6;
  std::size_t pool_factor = 4;
  std::size_t epochs = 20;
  double lr = 1e-3;
  double weight_decay = 0.01;
  bool decay_query_model = false;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out;
  std::string dump_models;
  std::vector<double> lambdas;
};

struct GradcheckFlags {
  std::size_t dim = 16;
  std::size_t trials = 20;
  double h = 1e-5;
  std::uint64_t seed = 0;
};

struct SynthFlags {
  std::size_t dim = 32;
  std::size_t episodes = 500;
  double separation_deg = 60.0;
  double sigma = 0.1;
  std::size_t m = 6;
  double text_align = 0.9;
  std::string text_residual = "in-plane";
  std::size_t candidates = 24;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct InspectFlags {
  std::string features;
};

void add_eval_flags(CLI::App& cmd, EvalFlags& f, bool with_mode) {
  cmd.add_option("--episodes", f.episodes, "Episode manifest (JSON)")
      ->required();
  cmd.add_option("--features", f.features, "Feature cache (FCH1)")->required();
  cmd.add_option("--text", f.text,
                 "Text-feature cache; defaults to Text records in --features");
  if (with_mode) {
    cmd.add_option("--mode", f.mode,
                   "zeroshot|ttdna|ttdnaf|proto, or a comma-separated list")
        ->required();
  }
  cmd.add_option("--eta", f.eta, "Affinity sharpness")->capture_default_str();
  cmd.add_option("--beta", f.beta, "Textual-adapter residual scale")
      ->capture_default_str();
  cmd.add_option("--tau", f.tau, "Softmax temperature")->capture_default_str();
  cmd.add_option("--k", f.k, "Augmentation candidates kept per class")
      ->capture_default_str();
  cmd.add_option("--pool-factor", f.pool_factor,
                 "Candidates requested per kept candidate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd.add_option("--epochs", f.epochs, "Fine-tuning epochs")
      ->capture_default_str();
  cmd.add_option("--lr", f.lr, "AdamW learning rate")->capture_default_str();
  cmd.add_option("--weight-decay", f.weight_decay, "AdamW weight decay")
      ->capture_default_str();
  cmd.add_flag("--decay-query-model", f.decay_query_model,
               "Apply weight decay to the query model as well");
  cmd.add_option("--seed", f.seed, "Global seed (falls back to DNA_SEED)")
      ->envname("DNA_SEED")
      ->capture_default_str();
  cmd.add_option("--jobs", f.jobs, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

/// Thrown for invalid flag combinations found after parsing.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

EvalConfig eval_config(const EvalFlags& f, Mode mode, double lambda) {
  EvalConfig cfg;
  cfg.mode = mode;
  cfg.adapter = {f.eta, lambda, f.beta, f.tau};
  cfg.augment = {f.k, f.pool_factor};
  cfg.finetune.epochs = f.epochs;
  cfg.finetune.lr = f.lr;
  cfg.finetune.weight_decay = f.weight_decay;
  cfg.finetune.decay_query_model = f.decay_query_model;
  cfg.seed = f.seed;
  try {
    cfg.adapter.validate();
    cfg.finetune.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::vector<Mode> parse_modes(const std::string& text) {
  std::vector<Mode> modes;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto mode = parse_mode(item);
    if (!mode) throw ConfigError("unknown mode '" + item + "'");
    modes.push_back(*mode);
  }
  if (modes.empty()) throw ConfigError("--mode is empty");
  return modes;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << bytes;
  if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

std::vector<EpisodeJob> load_jobs(const EvalFlags& f) {
  FeatureIndex features;
  features.add(load_feature_cache(f.features));
  const auto entries = load_manifest(f.episodes);
  if (entries.empty()) throw Error(Errc::ManifestFormat, "manifest is empty");
  if (f.text.empty()) return resolve_jobs(entries, features, features);
  FeatureIndex text;
  text.add(load_feature_cache(f.text));
  return resolve_jobs(entries, features, text);
}

/// "report.json" -> "report.ttdna.json" when several modes share --out.
fs::path per_mode_path(const fs::path& out, Mode mode, bool several) {
  if (!several) return out;
  fs::path p = out;
  p.replace_extension(std::string(".") + std::string(to_string(mode)) +
                      out.extension().string());
  return p;
}

int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  const std::vector<Mode> modes = parse_modes(f.mode);
  std::optional<ReportFormat> format;
  if (!f.out.empty()) {
    format = format_for_path(f.out);
    if (!format) throw ConfigError("--out must end in .json, .csv or .md");
  }
  std::vector<EvalConfig> configs;
  for (Mode m : modes) configs.push_back(eval_config(f, m, f.lambda));

  const std::vector<EpisodeJob> jobs = load_jobs(f);
  std::vector<EvalReport> reports;
  std::size_t errors = 0;
  for (const EvalConfig& cfg : configs) {
    reports.push_back(evaluate(jobs, cfg, f.jobs));
    const EvalReport& r = reports.back();
    errors += r.errors;
    for (const EpisodeResult& e : r.per_episode) {
      if (!e.error.empty()) {
        err << to_string(cfg.mode) << ": episode " << e.episode_id << ": "
            << e.error << '\n';
      }
    }
    if (format) {
      write_file(per_mode_path(f.out, cfg.mode, modes.size() > 1),
                 emit_report(r, *format));
    }
    if (!f.dump_models.empty() && cfg.mode == Mode::TTDNAF) {
      fs::create_directories(f.dump_models);
      for (const EpisodeJob& job : jobs) {
        if (!job.setup_error.empty()) continue;
        try {
          const FinetuneResult trained = train_episode_model(
              job.episode, job.text, job.augmentation.get(), cfg,
              episode_seed(cfg.seed, job.episode.id));
          write_file(fs::path(f.dump_models) / (job.episode.id + ".json"),
                     model_to_json(trained.model));
        } catch (const Error&) {
          // Already reported as an error row.
        }
      }
    }
  }
  out << render_table(reports);
  for (const EvalReport& r : reports) {
    out << to_string(r.config.mode) << ": accuracy " << r.overall_accuracy
        << " (" << r.correct << "/" << r.scored << "), errors " << r.errors
        << '\n';
  }
  return errors == 0 ? kOk : kRuntimeError;
}

int cmd_sweep(const EvalFlags& f, std::ostream& out) {
  if (f.lambdas.empty()) throw ConfigError("--lambdas needs at least one value");
  const std::vector<EpisodeJob> jobs = load_jobs(f);
  std::vector<EvalReport> reports;
  std::vector<std::string> labels;
  std::size_t errors = 0;
  EvalReport zero_shot = evaluate(jobs, eval_config(f, Mode::ZeroShot, 0.0),
                                  f.jobs);
  errors += zero_shot.errors;
  reports.push_back(std::move(zero_shot));
  labels.emplace_back("Zero-shot");
  for (double lambda : f.lambdas) {
    reports.push_back(evaluate(jobs, eval_config(f, Mode::TTDNA, lambda),
                               f.jobs));
    errors += reports.back().errors;
    std::ostringstream label;
    label << "TT-DNA lambda=" << lambda;
    labels.push_back(label.str());
  }
  out << render_table(reports, labels);
  return errors == 0 ? kOk : kRuntimeError;
}

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  double worst = 0.0;
  char line[128];
  for (std::size_t trial = 0; trial < f.trials; ++trial) {
    const GradcheckCase c =
        make_gradcheck_case(f.dim, derive_seed(f.seed, std::to_string(trial)));
    const double e = fd_gradcheck(c.model, c.query, c.label, f.h);
    worst = std::max(worst, e);
    std::snprintf(line, sizeof line, "trial %zu: max relative error %.3e\n",
                  trial, e);
    out << line;
  }
  const bool ok = worst < kGradcheckTolerance;
  std::snprintf(line, sizeof line, "max relative error %.3e (%s, tol %.0e)\n",
                worst, ok ? "PASS" : "FAIL", kGradcheckTolerance);
  out << line;
  return ok ? kOk : kRuntimeError;
}

nlohmann::json vec_json(const Vec& v) { return nlohmann::json(v); }

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  SynthConfig base;
  base.dim = f.dim;
  base.separation = f.separation_deg * std::numbers::pi / 180.0;
  base.noise_sigma = f.sigma;
  base.m = f.m;
  base.text_alignment = f.text_align;
  const auto residual = parse_text_residual(f.text_residual);
  if (!residual) throw ConfigError("--text-residual must be in-plane|random");
  base.text_residual = *residual;
  try {
    base.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  std::vector<FeatureRecord> records;
  std::vector<ManifestEntry> entries;
  nlohmann::json truth = nlohmann::json::array();
  char name[32];
  for (std::size_t i = 0; i < f.episodes; ++i) {
    std::snprintf(name, sizeof name, "ep%05zu", i);
    SynthConfig cfg = base;
    cfg.seed = derive_seed(f.seed, name);
    const SyntheticEpisode s = generate_synthetic_episode(
        cfg, name, static_cast<Split>(i % kSplitCount));
    const Episode& ep = s.episode;

    ManifestEntry m;
    m.id = ep.id;
    m.action = ep.action;
    m.object = ep.object;
    m.split = ep.split;
    m.query_label = ep.query_label;
    for (const FeatureRecord& r : ep.support_pos) {
      m.support_pos.push_back(r.id);
      records.push_back(r);
    }
    for (const FeatureRecord& r : ep.support_neg) {
      m.support_neg.push_back(r.id);
      records.push_back(r);
    }
    m.query = ep.query.id;
    records.push_back(ep.query);
    records.push_back({s.text.prompt_true, Role::Text, s.text.t_true});
    records.push_back({s.text.prompt_false, Role::Text, s.text.t_false});

    if (f.candidates > 0) {
      const OracleSampler oracle(s.true_pos, s.true_neg, f.sigma);
      for (Label label : {Label::Positive, Label::Negative}) {
        const std::string tag =
            ep.id + (label == Label::Positive ? ".pos" : ".neg");
        auto drawn = oracle.candidates(
            label, f.candidates, derive_seed(cfg.seed, "candidates" +
                                                           std::string(to_string(label))));
        for (std::size_t n = 0; n < drawn.size(); ++n) {
          drawn[n].id = tag + "/" + std::to_string(n);
          records.push_back(std::move(drawn[n]));
        }
        (label == Label::Positive ? m.augment_pos : m.augment_neg) = tag;
      }
    }
    entries.push_back(std::move(m));
    truth.push_back({{"id", ep.id},
                     {"query_label", to_string(*ep.query_label)},
                     {"true_pos", vec_json(s.true_pos)},
                     {"true_neg", vec_json(s.true_neg)}});
  }

  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  save_feature_cache((dir / "features.fch1").string(), records,
                     static_cast<std::uint32_t>(f.dim));
  write_file(dir / "episodes.json", manifest_to_json(entries));
  const nlohmann::json sidecar = {
      {"format", "dna-truth/1"},
      {"config",
       {{"dim", f.dim},
        {"separation_deg", f.separation_deg},
        {"sigma", f.sigma},
        {"m", f.m},
        {"text_align", f.text_align},
        {"text_residual", f.text_residual},
        {"candidates", f.candidates},
        {"seed", f.seed}}},
      {"episodes", truth}};
  write_file(dir / "truth.json", sidecar.dump(2) + "\n");
  out << "wrote " << f.episodes << " episodes, " << records.size()
      << " records to " << dir.string() << '\n';
  return kOk;
}

int cmd_inspect(const InspectFlags& f, std::ostream& out, std::ostream& err) {
  FeatureCache cache;
  try {
    cache = load_feature_cache(f.features);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  std::map<Role, std::size_t> roles;
  for (const FeatureRecord& r : cache.records) ++roles[r.role];
  out << "file: " << f.features << '\n';
  out << "dim: " << cache.dim << '\n';
  out << cache.records.size() << " records\n";
  for (const auto& [role, count] : roles) {
    out << "  " << to_string(role) << ": " << count << '\n';
  }
  char line[96];
  std::snprintf(line, sizeof line, "max norm drift: %.3e\n",
                cache.max_norm_drift);
  out << line;
  out << "renormalized on load: " << cache.renormalized << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Few-shot adaptation engine: distribution-based visual "
               "adapter, zero-shot fusion and per-episode fine-tuning over "
               "precomputed embeddings.",
               "dna"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dna 1.0.0");

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate episodes and report "
                                              "per-split accuracy");
  add_eval_flags(*eval_cmd, eval_flags, true);
  eval_cmd->add_option("--lambda", eval_flags.lambda, "Residual ratio")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_flags.out,
                       "Report file (.json, .csv or .md)");
  eval_cmd->add_option("--dump-models", eval_flags.dump_models,
                       "Directory for fine-tuned model snapshots (ttdnaf)");

  EvalFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Compare TT-DNA over residual ratios against zero-shot");
  add_eval_flags(*sweep_cmd, sweep_flags, false);
  sweep_cmd->add_option("--lambdas", sweep_flags.lambdas,
                        "Residual ratios to evaluate")
      ->delimiter(',')
      ->required();

  GradcheckFlags grad_flags;
  auto* grad_cmd = app.add_subcommand(
      "gradcheck", "Compare analytic gradients with central differences");
  // --h is the step size here, so help is long-form only.
  grad_cmd->set_help_flag("--help", "Print this help message and exit");
  grad_cmd->add_option("--dim", grad_flags.dim, "Feature dimension")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 16));
  grad_cmd->add_option("--trials", grad_flags.trials, "Random trials")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  grad_cmd->add_option("--h", grad_flags.h, "Finite-difference step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  grad_cmd->add_option("--seed", grad_flags.seed,
                       "Seed (falls back to DNA_SEED)")
      ->envname("DNA_SEED")
      ->capture_default_str();

  SynthFlags synth_flags;
  auto* synth_cmd = app.add_subcommand(
      "synth", "Write synthetic episodes with known class distributions");
  synth_cmd->add_option("--dim", synth_flags.dim, "Feature dimension")
      ->capture_default_str();
  synth_cmd->add_option("--episodes", synth_flags.episodes, "Episode count")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--separation-deg", synth_flags.separation_deg,
                        "Angle between the class concepts (degrees)")
      ->capture_default_str();
  synth_cmd->add_option("--sigma", synth_flags.sigma,
                        "Per-coordinate feature noise")
      ->capture_default_str();
  synth_cmd->add_option("--m", synth_flags.m, "Supports per class")
      ->capture_default_str();
  synth_cmd->add_option("--text-align", synth_flags.text_align,
                        "Cosine of each text feature to its concept")
      ->capture_default_str();
  synth_cmd->add_option("--text-residual", synth_flags.text_residual,
                        "in-plane|random placement of the text residual")
      ->capture_default_str();
  synth_cmd->add_option("--candidates", synth_flags.candidates,
                        "Augmentation candidates stored per class")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth_flags.seed,
                        "Seed (falls back to DNA_SEED)")
      ->envname("DNA_SEED")
      ->capture_default_str();
  synth_cmd->add_option("--out-dir", synth_flags.out_dir, "Output directory")
      ->required();

  InspectFlags inspect_flags;
  auto* inspect_cmd =
      app.add_subcommand("inspect", "Summarize a feature cache");
  inspect_cmd->add_option("--features", inspect_flags.features,
                          "Feature cache (FCH1)")
      ->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*eval_cmd) return cmd_eval(eval_flags, out, err);
    if (*sweep_cmd) return cmd_sweep(sweep_flags, out);
    if (*grad_cmd) return cmd_gradcheck(grad_flags, out);
    if (*synth_cmd) return cmd_synth(synth_flags, out);
    if (*inspect_cmd) return cmd_inspect(inspect_flags, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kConfigError;
}

}  // namespace dna::cli
