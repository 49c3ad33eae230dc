// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dna/eval.hpp"
#include "dna/features.hpp"

namespace dna {

/// One episode of a manifest, before record ids are resolved.
/// The JSON schema is documented in docs/manifest.md.
struct ManifestEntry {
  std::string id;
  std::string action;
  std::string object;
  Split split = Split::SeenActSeenObj;
  std::optional<Label> query_label;
  std::vector<std::string> support_pos;
  std::vector<std::string> support_neg;
  std::string query;
  /// Candidate tags ("<tag>/<n>" record ids) for augmentation.
  std::optional<std::string> augment_pos;
  std::optional<std::string> augment_neg;

  bool operator==(const ManifestEntry&) const = default;
};

std::vector<ManifestEntry> parse_manifest(std::string_view json_text);
std::vector<ManifestEntry> load_manifest(const std::string& path);
std::string manifest_to_json(std::span<const ManifestEntry> entries);

/// Resolves record ids into episodes. Text features are looked up by the
/// exact prompt strings. Episodes that fail to resolve carry a setup error
/// instead of aborting the batch.
std::vector<EpisodeJob> resolve_jobs(std::span<const ManifestEntry> entries,
                                     const FeatureIndex& features,
                                     const FeatureIndex& text);

}  // namespace dna
