// SPDX-License-Identifier: Apache-2.0
#include "dna/manifest.hpp"

#include <fstream>
#include <sstream>

#include "dna/error.hpp"
#include "json.hpp"

namespace dna {

using nlohmann::json;

namespace {

constexpr std::string_view kManifestFormat = "dna-episodes/1";

ManifestEntry entry_from_json(const json& e) {
  ManifestEntry m;
  m.id = e.at("id").get<std::string>();
  m.action = e.at("action").get<std::string>();
  m.object = e.at("object").get<std::string>();
  const auto split = parse_split(e.at("split").get<std::string>());
  if (!split) throw Error(Errc::ManifestFormat, "episode " + m.id + ": split");
  m.split = *split;
  if (e.contains("query_label") && !e["query_label"].is_null()) {
    m.query_label = parse_label(e["query_label"].get<std::string>());
    if (!m.query_label) {
      throw Error(Errc::ManifestFormat, "episode " + m.id + ": query_label");
    }
  }
  m.support_pos = e.at("support_pos").get<std::vector<std::string>>();
  m.support_neg = e.at("support_neg").get<std::vector<std::string>>();
  m.query = e.at("query").get<std::string>();
  if (e.contains("augment")) {
    const json& a = e["augment"];
    m.augment_pos = a.at("positive").get<std::string>();
    m.augment_neg = a.at("negative").get<std::string>();
  }
  return m;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view json_text) {
  try {
    const json doc = json::parse(json_text);
    if (doc.at("format").get<std::string>() != kManifestFormat) {
      throw Error(Errc::ManifestFormat, "unsupported manifest format");
    }
    std::vector<ManifestEntry> out;
    for (const json& e : doc.at("episodes")) out.push_back(entry_from_json(e));
    return out;
  } catch (const json::exception& e) {
    throw Error(Errc::ManifestFormat, e.what());
  }
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

std::string manifest_to_json(std::span<const ManifestEntry> entries) {
  json episodes = json::array();
  for (const ManifestEntry& m : entries) {
    json e = {{"id", m.id},
              {"action", m.action},
              {"object", m.object},
              {"split", to_string(m.split)},
              {"query_label", m.query_label ? json(to_string(*m.query_label))
                                            : json(nullptr)},
              {"support_pos", m.support_pos},
              {"support_neg", m.support_neg},
              {"query", m.query}};
    if (m.augment_pos && m.augment_neg) {
      e["augment"] = {{"positive", *m.augment_pos},
                      {"negative", *m.augment_neg}};
    }
    episodes.push_back(std::move(e));
  }
  json doc = {{"format", kManifestFormat}, {"episodes", episodes}};
  return doc.dump(2) + "\n";
}

std::vector<EpisodeJob> resolve_jobs(std::span<const ManifestEntry> entries,
                                     const FeatureIndex& features,
                                     const FeatureIndex& text) {
  std::vector<EpisodeJob> jobs;
  jobs.reserve(entries.size());
  for (const ManifestEntry& m : entries) {
    EpisodeJob job;
    Episode& ep = job.episode;
    ep.id = m.id;
    ep.action = m.action;
    ep.object = m.object;
    ep.split = m.split;
    ep.query_label = m.query_label;
    try {
      for (const std::string& id : m.support_pos) {
        ep.support_pos.push_back(features.at(id));
      }
      for (const std::string& id : m.support_neg) {
        ep.support_neg.push_back(features.at(id));
      }
      ep.query = features.at(m.query);
      ep.validate();
      job.text.prompt_true = build_prompt(m.action, m.object, Label::Positive);
      job.text.prompt_false = build_prompt(m.action, m.object, Label::Negative);
      job.text.t_true = text.at(job.text.prompt_true).vector;
      job.text.t_false = text.at(job.text.prompt_false).vector;
      if (job.text.t_true.size() != ep.dim()) {
        throw Error(Errc::DimensionMismatch, "text and image feature dims");
      }
      if (m.augment_pos && m.augment_neg) {
        job.augmentation = std::make_shared<CacheSource>(
            CacheSource::from_index(features, *m.augment_pos, *m.augment_neg));
      }
    } catch (const Error& e) {
      job.setup_error = e.what();
    }
    jobs.push_back(std::move(job));
  }
  return jobs;
}

}  // namespace dna
