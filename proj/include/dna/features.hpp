// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dna/numkit.hpp"

namespace dna {

/// Class convention used everywhere: positive is index 0.
enum class Label : std::uint8_t { Positive = 0, Negative = 1 };

inline constexpr std::size_t index_of(Label label) {
  return static_cast<std::size_t>(label);
}
Label label_from_index(std::size_t index);
std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

enum class Role : std::uint8_t {
  SupportPos = 0,
  SupportNeg = 1,
  Query = 2,
  Candidate = 3,
  Text = 4,
};
std::string_view to_string(Role role);

enum class Split : std::uint8_t {
  SeenActSeenObj = 0,
  UnseenActSeenObj = 1,
  SeenActUnseenObj = 2,
  UnseenActUnseenObj = 3,
};
inline constexpr std::size_t kSplitCount = 4;
std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct FeatureRecord {
  std::string id;
  Role role = Role::Query;
  Vec vector;

  bool operator==(const FeatureRecord&) const = default;
};

/// One few-shot test sample: M positive and M negative supports plus a
/// query.
struct Episode {
  std::string id;
  std::vector<FeatureRecord> support_pos;
  std::vector<FeatureRecord> support_neg;
  FeatureRecord query;
  std::string action;
  std::string object;
  Split split = Split::SeenActSeenObj;
  std::optional<Label> query_label;

  std::size_t dim() const { return query.vector.size(); }
  const std::vector<FeatureRecord>& supports(Label label) const {
    return label == Label::Positive ? support_pos : support_neg;
  }
  /// Throws EmptySupport / DimensionMismatch.
  void validate() const;
};

struct TextFeatures {
  Vec t_true;
  Vec t_false;
  std::string prompt_true;
  std::string prompt_false;

  const Vec& for_label(Label label) const {
    return label == Label::Positive ? t_true : t_false;
  }
};

/// "a photo that a person {action} {object}, it is {true|false}"
std::string build_prompt(std::string_view action, std::string_view object,
                         Label class_label);

// ---------------------------------------------------------------------------
// FCH1 feature cache
//
// Little-endian layout:
//   "FCH1" | u32 dim | u32 count |
//   count x ( u16 id_len | id bytes | u8 role | dim x f32 )

inline constexpr double kSilentRenormDrift = 1e-6;
inline constexpr double kMaxNormDrift = 1e-3;

struct FeatureCache {
  std::uint32_t dim = 0;
  std::vector<FeatureRecord> records;
  /// Load diagnostics: largest |norm - 1| seen and how many records were
  /// renormalized.
  double max_norm_drift = 0.0;
  std::size_t renormalized = 0;
};

FeatureCache read_feature_cache(std::istream& in);
FeatureCache read_feature_cache(std::string_view bytes);
FeatureCache load_feature_cache(const std::string& path);

std::string write_feature_cache(std::span<const FeatureRecord> records,
                                std::uint32_t dim);
void save_feature_cache(const std::string& path,
                        std::span<const FeatureRecord> records,
                        std::uint32_t dim);

/// Id lookup over one or more caches.
class FeatureIndex {
 public:
  FeatureIndex() = default;
  /// Throws DuplicateId if an id is already indexed, DimensionMismatch if
  /// dims disagree.
  void add(const FeatureCache& cache);

  const FeatureRecord& at(const std::string& id) const;
  const FeatureRecord* find(const std::string& id) const;
  std::uint32_t dim() const { return dim_; }
  /// Records whose id starts with "<tag>/", in insertion order.
  std::vector<const FeatureRecord*> with_tag(std::string_view tag) const;

 private:
  std::uint32_t dim_ = 0;
  std::vector<FeatureRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// ---------------------------------------------------------------------------
// Synthetic ground-truth episodes

/// Where a synthetic text feature puts the part not explained by its
/// concept direction.
enum class TextResidual : std::uint8_t {
  /// Within the plane of the two concepts, toward or away from the other
  /// concept with equal probability. The text feature is a rotated copy
  /// of its concept, so the zero-shot head is informative but biased.
  InPlane = 0,
  /// Uniformly random direction orthogonal to the concept. In high
  /// dimension this barely moves the zero-shot decision.
  Random = 1,
};
std::string_view to_string(TextResidual residual);
std::optional<TextResidual> parse_text_residual(std::string_view text);

struct SynthConfig {
  std::size_t dim = 32;
  double separation = 1.0471975511965976;  // 60 degrees
  double noise_sigma = 0.1;
  std::size_t m = 6;
  double text_alignment = 0.9;
  TextResidual text_residual = TextResidual::InPlane;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

struct SyntheticEpisode {
  Episode episode;
  TextFeatures text;
  /// Unit concept directions for each class.
  Vec true_pos;
  Vec true_neg;
};

/// Two unit concept directions `separation` radians apart; every feature
/// is direction + N(0, sigma^2 I), renormalized. Text features sit at
/// cosine `text_alignment` to their direction, with the remainder placed
/// per `text_residual`.
SyntheticEpisode generate_synthetic_episode(const SynthConfig& cfg,
                                            std::string id = "synth",
                                            Split split = Split::SeenActSeenObj);

/// normalize(direction + sigma * noise), n times.
std::vector<Vec> draw_class_features(std::span<const double> direction,
                                     double sigma, std::size_t n, Rng& rng);

/// Scale c with E[normalize(u + sigma * noise)] = c * u for unit u in
/// `dim` dimensions, by seeded Monte Carlo over the radial and transverse
/// components.
double expected_feature_scale(std::size_t dim, double sigma,
                              std::size_t samples = 200000,
                              std::uint64_t seed = 1);

}  // namespace dna
