// SPDX-License-Identifier: Apache-2.0
#include "dna/report.hpp"

#include <cstdio>
#include <sstream>

#include "dna/error.hpp"
#include "json.hpp"

namespace dna {

using nlohmann::json;

std::optional<ReportFormat> format_for_path(std::string_view path) {
  auto ends_with = [&](std::string_view ext) {
    return path.size() >= ext.size() &&
           path.substr(path.size() - ext.size()) == ext;
  };
  if (ends_with(".json")) return ReportFormat::Json;
  if (ends_with(".csv")) return ReportFormat::Csv;
  if (ends_with(".md")) return ReportFormat::Markdown;
  return std::nullopt;
}

namespace {

json label_json(const std::optional<Label>& label) {
  return label ? json(to_string(*label)) : json(nullptr);
}

std::optional<Label> label_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  auto parsed = parse_label(j.get<std::string>());
  if (!parsed) throw Error(Errc::ManifestFormat, "bad label in report");
  return parsed;
}

json config_json(const EvalConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"eta", c.adapter.eta},
          {"lambda", c.adapter.lambda},
          {"beta", c.adapter.beta},
          {"tau", c.adapter.tau},
          {"k", c.augment.k},
          {"pool_factor", c.augment.pool_factor},
          {"epochs", c.finetune.epochs},
          {"lr", c.finetune.lr},
          {"weight_decay", c.finetune.weight_decay},
          {"decay_query_model", c.finetune.decay_query_model},
          {"batch_size", c.finetune.batch_size},
          {"seed", c.seed},
          {"score", c.score}};
}

EvalConfig config_from_json(const json& j) {
  EvalConfig c;
  const auto mode = parse_mode(j.at("mode").get<std::string>());
  if (!mode) throw Error(Errc::ManifestFormat, "bad mode in report");
  c.mode = *mode;
  c.adapter.eta = j.at("eta").get<double>();
  c.adapter.lambda = j.at("lambda").get<double>();
  c.adapter.beta = j.at("beta").get<double>();
  c.adapter.tau = j.at("tau").get<double>();
  c.augment.k = j.at("k").get<std::size_t>();
  c.augment.pool_factor = j.at("pool_factor").get<std::size_t>();
  c.finetune.epochs = j.at("epochs").get<std::size_t>();
  c.finetune.lr = j.at("lr").get<double>();
  c.finetune.weight_decay = j.at("weight_decay").get<double>();
  c.finetune.decay_query_model = j.at("decay_query_model").get<bool>();
  c.finetune.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.score = j.at("score").get<bool>();
  return c;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) {
    return std::string(text);
  }
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string emit_json(const EvalReport& r, bool include_wallclock) {
  json episodes = json::array();
  for (const EpisodeResult& e : r.per_episode) {
    episodes.push_back({
        {"id", e.episode_id},
        {"split", to_string(e.split)},
        {"predicted", label_json(e.predicted)},
        {"truth", label_json(e.truth)},
        {"correct", e.correct ? json(*e.correct) : json(nullptr)},
        {"logits", e.logits},
        {"probabilities", e.probabilities},
        {"error", e.error.empty() ? json(nullptr) : json(e.error)},
    });
  }
  json splits = json::object();
  for (const auto& [split, acc] : r.per_split_accuracy) {
    splits[std::string(to_string(split))] = acc;
  }
  json j = {{"format", "dna-report/1"},
            {"config", config_json(r.config)},
            {"overall_accuracy", r.overall_accuracy},
            {"scored", r.scored},
            {"correct", r.correct},
            {"errors", r.errors},
            {"per_split_accuracy", splits},
            {"episodes", episodes}};
  if (include_wallclock) {
    j["wallclock"] = {{"total_ms", r.wallclock.total_ms},
                      {"jobs", r.wallclock.jobs}};
  }
  return j.dump(2) + "\n";
}

std::string emit_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "episode_id,split,predicted,truth,correct,logit_pos,logit_neg,"
         "prob_pos,prob_neg,error\n";
  out.precision(17);
  for (const EpisodeResult& e : r.per_episode) {
    out << csv_field(e.episode_id) << ',' << to_string(e.split) << ','
        << (e.predicted ? to_string(*e.predicted) : "") << ','
        << (e.truth ? to_string(*e.truth) : "") << ','
        << (e.correct ? (*e.correct ? "1" : "0") : "") << ',' << e.logits[0]
        << ',' << e.logits[1] << ',' << e.probabilities[0] << ','
        << e.probabilities[1] << ',' << csv_field(e.error) << '\n';
  }
  out << "# summary,mode=" << to_string(r.config.mode)
      << ",overall_accuracy=" << r.overall_accuracy << ",scored=" << r.scored
      << ",correct=" << r.correct << ",errors=" << r.errors;
  for (const auto& [split, acc] : r.per_split_accuracy) {
    out << ',' << to_string(split) << '=' << acc;
  }
  out << '\n';
  return out.str();
}

}  // namespace

std::string render_table(std::span<const EvalReport> reports,
                         std::span<const std::string> row_labels) {
  std::ostringstream out;
  out << "| Method | Seen act. Seen obj. | Unseen act. Seen obj. "
         "| Seen act. Unseen obj. | Unseen act. Unseen obj. | Avg. |\n";
  out << "|---|---|---|---|---|---|\n";
  for (std::size_t row = 0; row < reports.size(); ++row) {
    const EvalReport& r = reports[row];
    out << "| ";
    if (row < row_labels.size()) {
      out << row_labels[row];
    } else {
      out << display_name(r.config.mode);
    }
    for (std::size_t s = 0; s < kSplitCount; ++s) {
      const auto it = r.per_split_accuracy.find(static_cast<Split>(s));
      out << " | "
          << (it == r.per_split_accuracy.end() ? "-" : percent(it->second));
    }
    out << " | "
        << (r.per_split_accuracy.empty() ? "-" : percent(r.split_average()))
        << " |\n";
  }
  return out.str();
}

std::string emit_report(const EvalReport& report, ReportFormat format,
                        bool include_wallclock) {
  switch (format) {
    case ReportFormat::Json: return emit_json(report, include_wallclock);
    case ReportFormat::Csv: return emit_csv(report);
    case ReportFormat::Markdown:
      return render_table(std::span<const EvalReport>(&report, 1));
  }
  return {};
}

EvalReport report_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::ManifestFormat, e.what());
  }
  try {
    EvalReport r;
    r.config = config_from_json(j.at("config"));
    for (const json& e : j.at("episodes")) {
      EpisodeResult res;
      res.episode_id = e.at("id").get<std::string>();
      const auto split = parse_split(e.at("split").get<std::string>());
      if (!split) throw Error(Errc::ManifestFormat, "bad split in report");
      res.split = *split;
      res.predicted = label_from_json(e.at("predicted"));
      res.truth = label_from_json(e.at("truth"));
      if (!e.at("correct").is_null()) res.correct = e.at("correct").get<bool>();
      res.logits = e.at("logits").get<LogitPair>();
      res.probabilities = e.at("probabilities").get<LogitPair>();
      if (!e.at("error").is_null()) res.error = e.at("error").get<std::string>();
      r.per_episode.push_back(std::move(res));
    }
    r.overall_accuracy = j.at("overall_accuracy").get<double>();
    r.scored = j.at("scored").get<std::size_t>();
    r.correct = j.at("correct").get<std::size_t>();
    r.errors = j.at("errors").get<std::size_t>();
    for (const auto& [name, acc] : j.at("per_split_accuracy").items()) {
      const auto split = parse_split(name);
      if (!split) throw Error(Errc::ManifestFormat, "bad split " + name);
      r.per_split_accuracy[*split] = acc.get<double>();
    }
    if (j.contains("wallclock")) {
      r.wallclock.total_ms = j["wallclock"].at("total_ms").get<double>();
      r.wallclock.jobs = j["wallclock"].at("jobs").get<std::size_t>();
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::ManifestFormat, e.what());
  }
}

}  // namespace dna
