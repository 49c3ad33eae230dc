// SPDX-License-Identifier: Apache-2.0
#include "dna/features.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <sstream>

#include "dna/error.hpp"

namespace dna {

Label label_from_index(std::size_t index) {
  if (index > 1) {
    throw Error(Errc::InvalidLabel, "class index " + std::to_string(index));
  }
  return static_cast<Label>(index);
}

std::string_view to_string(Label label) {
  return label == Label::Positive ? "positive" : "negative";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "positive") return Label::Positive;
  if (text == "negative") return Label::Negative;
  return std::nullopt;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::SupportPos: return "support_pos";
    case Role::SupportNeg: return "support_neg";
    case Role::Query: return "query";
    case Role::Candidate: return "candidate";
    case Role::Text: return "text";
  }
  return "unknown";
}

namespace {
constexpr std::array<std::string_view, kSplitCount> kSplitNames = {
    "seen_act_seen_obj", "unseen_act_seen_obj", "seen_act_unseen_obj",
    "unseen_act_unseen_obj"};
}  // namespace

std::string_view to_string(Split split) {
  return kSplitNames[static_cast<std::size_t>(split)];
}

std::optional<Split> parse_split(std::string_view text) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    if (kSplitNames[i] == text) return static_cast<Split>(i);
  }
  return std::nullopt;
}

void Episode::validate() const {
  if (support_pos.empty() || support_neg.empty()) {
    throw Error(Errc::EmptySupport, "episode " + id + " has an empty class");
  }
  if (support_pos.size() != support_neg.size()) {
    throw Error(Errc::ShapeMismatch,
                "episode " + id + ": " + std::to_string(support_pos.size()) +
                    " positive vs " + std::to_string(support_neg.size()) +
                    " negative supports");
  }
  const std::size_t d = dim();
  if (d == 0) throw Error(Errc::DimensionZero, "episode " + id);
  for (const auto* group : {&support_pos, &support_neg}) {
    for (const FeatureRecord& r : *group) {
      if (r.vector.size() != d) {
        throw Error(Errc::DimensionMismatch,
                    "episode " + id + " record " + r.id);
      }
    }
  }
}

std::string build_prompt(std::string_view action, std::string_view object,
                         Label class_label) {
  if (action.empty() || object.empty()) {
    throw Error(Errc::EmptyField, "action and object must be non-empty");
  }
  std::string prompt = "a photo that a person ";
  prompt += action;
  prompt += ' ';
  prompt += object;
  prompt += ", it is ";
  prompt += class_label == Label::Positive ? "true" : "false";
  return prompt;
}

// ---------------------------------------------------------------------------
// FCH1

namespace {

constexpr std::string_view kMagic = "FCH1";

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) return false;
  std::make_unsigned_t<T> bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    bits = static_cast<decltype(bits)>((bits << 8) | buf[i]);
  }
  value = static_cast<T>(bits);
  return true;
}

[[noreturn]] void truncated(std::size_t index, std::string_view what) {
  throw Error(Errc::TruncatedRecord, "record " + std::to_string(index) +
                                         ": stream ended inside " +
                                         std::string(what));
}

}  // namespace

FeatureCache read_feature_cache(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 ||
      std::string_view(magic.data(), magic.size()) != kMagic) {
    throw Error(Errc::BadMagic, "stream does not start with FCH1");
  }
  FeatureCache cache;
  std::uint32_t count = 0;
  if (!get_le(in, cache.dim) || !get_le(in, count)) {
    throw Error(Errc::TruncatedRecord, "header: stream ended inside header");
  }
  if (cache.dim == 0) throw Error(Errc::DimensionZero, "header dim is 0");

  std::unordered_map<std::string, std::size_t> seen;
  cache.records.reserve(std::min<std::uint32_t>(count, 1u << 20));
  for (std::size_t index = 0; index < count; ++index) {
    std::uint16_t id_len = 0;
    if (!get_le(in, id_len)) truncated(index, "id length");
    FeatureRecord record;
    record.id.resize(id_len);
    in.read(record.id.data(), id_len);
    if (in.gcount() != id_len) truncated(index, "id");
    std::uint8_t role = 0;
    if (!get_le(in, role)) truncated(index, "role");
    if (role > static_cast<std::uint8_t>(Role::Text)) {
      throw Error(Errc::BadRole,
                  "record " + std::to_string(index) + ": invalid role code " +
                      std::to_string(role));
    }
    record.role = static_cast<Role>(role);
    record.vector.resize(cache.dim);
    for (double& x : record.vector) {
      std::uint32_t bits = 0;
      if (!get_le(in, bits)) truncated(index, "vector payload");
      x = static_cast<double>(std::bit_cast<float>(bits));
    }
    if (!seen.emplace(record.id, index).second) {
      throw Error(Errc::DuplicateId, "record " + std::to_string(index) +
                                         ": id '" + record.id + "' repeats");
    }
    const double norm = l2_norm(record.vector);
    const double drift = std::isfinite(norm) ? std::abs(norm - 1.0) : 1.0;
    cache.max_norm_drift = std::max(cache.max_norm_drift, drift);
    if (drift > kMaxNormDrift) {
      throw Error(Errc::NormDrift, "record " + std::to_string(index) + " ('" +
                                       record.id + "') has norm " +
                                       std::to_string(norm));
    }
    if (drift > kSilentRenormDrift) {
      record.vector = l2_normalize(record.vector);
      ++cache.renormalized;
    }
    cache.records.push_back(std::move(record));
  }
  return cache;
}

FeatureCache read_feature_cache(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  return read_feature_cache(in);
}

FeatureCache load_feature_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return read_feature_cache(in);
}

std::string write_feature_cache(std::span<const FeatureRecord> records,
                                std::uint32_t dim) {
  if (dim == 0) throw Error(Errc::DimensionZero, "cannot write dim 0");
  std::string out(kMagic);
  put_le(out, dim);
  put_le(out, static_cast<std::uint32_t>(records.size()));
  for (const FeatureRecord& r : records) {
    if (r.vector.size() != dim) {
      throw Error(Errc::DimensionMismatch,
                  "record '" + r.id + "' has dim " +
                      std::to_string(r.vector.size()) + ", cache dim " +
                      std::to_string(dim));
    }
    if (r.id.size() > 0xffff) {
      throw Error(Errc::InvalidConfig, "record id longer than 65535 bytes");
    }
    put_le(out, static_cast<std::uint16_t>(r.id.size()));
    out += r.id;
    put_le(out, static_cast<std::uint8_t>(r.role));
    for (double x : r.vector) {
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
  }
  return out;
}

void save_feature_cache(const std::string& path,
                        std::span<const FeatureRecord> records,
                        std::uint32_t dim) {
  const std::string bytes = write_feature_cache(records, dim);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "short write to " + path);
}

void FeatureIndex::add(const FeatureCache& cache) {
  if (dim_ != 0 && cache.dim != dim_ && !cache.records.empty()) {
    throw Error(Errc::DimensionMismatch,
                "cache dim " + std::to_string(cache.dim) + " vs index dim " +
                    std::to_string(dim_));
  }
  if (!cache.records.empty()) dim_ = cache.dim;
  for (const FeatureRecord& r : cache.records) {
    if (!by_id_.emplace(r.id, records_.size()).second) {
      throw Error(Errc::DuplicateId, "id '" + r.id + "' appears twice");
    }
    records_.push_back(r);
  }
}

const FeatureRecord* FeatureIndex::find(const std::string& id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

const FeatureRecord& FeatureIndex::at(const std::string& id) const {
  const FeatureRecord* r = find(id);
  if (r == nullptr) throw Error(Errc::UnknownRecord, "no record '" + id + "'");
  return *r;
}

std::vector<const FeatureRecord*> FeatureIndex::with_tag(
    std::string_view tag) const {
  std::vector<const FeatureRecord*> out;
  for (const FeatureRecord& r : records_) {
    if (r.id.size() > tag.size() && r.id.compare(0, tag.size(), tag) == 0 &&
        r.id[tag.size()] == '/') {
      out.push_back(&r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic episodes

std::string_view to_string(TextResidual residual) {
  return residual == TextResidual::InPlane ? "in-plane" : "random";
}

std::optional<TextResidual> parse_text_residual(std::string_view text) {
  if (text == "in-plane") return TextResidual::InPlane;
  if (text == "random") return TextResidual::Random;
  return std::nullopt;
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(Errc::InvalidConfig, what);
  };
  if (dim < 2) fail("dim must be >= 2");
  if (!(separation > 0.0) || separation > std::acos(-1.0)) {
    fail("separation must lie in (0, pi]");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    fail("noise_sigma must be >= 0");
  }
  if (m < 1) fail("m must be >= 1");
  if (!(text_alignment >= 0.0 && text_alignment <= 1.0)) {
    fail("text_alignment must lie in [0, 1]");
  }
}

namespace {

Vec random_unit(std::size_t dim, Rng& rng) {
  for (;;) {
    Vec v(dim);
    for (double& x : v) x = rng.normal();
    if (l2_norm(v) > 1e-6) return l2_normalize(v);
  }
}

/// Random unit vector orthogonal to every (unit, mutually orthogonal)
/// vector in `basis`.
Vec random_orthogonal(std::size_t dim, std::span<const Vec> basis, Rng& rng) {
  for (;;) {
    Vec v(dim);
    for (double& x : v) x = rng.normal();
    for (const Vec& b : basis) {
      const double c = dot(v, b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= c * b[i];
    }
    if (l2_norm(v) > 1e-6) return l2_normalize(v);
  }
}

Vec combine(double a, std::span<const double> u, double b,
            std::span<const double> w) {
  Vec out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = a * u[i] + b * w[i];
  return out;
}

std::vector<FeatureRecord> as_records(std::vector<Vec> vectors,
                                      const std::string& prefix, Role role) {
  std::vector<FeatureRecord> out;
  out.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    out.push_back({prefix + std::to_string(i), role, std::move(vectors[i])});
  }
  return out;
}

}  // namespace

std::vector<Vec> draw_class_features(std::span<const double> direction,
                                     double sigma, std::size_t n, Rng& rng) {
  std::vector<Vec> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vec v(direction.begin(), direction.end());
    if (sigma > 0.0) {
      for (double& x : v) x += sigma * rng.normal();
    }
    out.push_back(l2_normalize(v));
  }
  return out;
}

SyntheticEpisode generate_synthetic_episode(const SynthConfig& cfg,
                                            std::string id, Split split) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t d = cfg.dim;

  SyntheticEpisode out;
  out.true_pos = random_unit(d, rng);
  const Vec basis0[] = {out.true_pos};
  const Vec across = random_orthogonal(d, basis0, rng);
  out.true_neg = l2_normalize(combine(std::cos(cfg.separation), out.true_pos,
                                      std::sin(cfg.separation), across));

  Episode& ep = out.episode;
  ep.id = std::move(id);
  ep.split = split;
  ep.action = "interacts with";
  ep.object = ep.id;
  ep.support_pos = as_records(
      draw_class_features(out.true_pos, cfg.noise_sigma, cfg.m, rng),
      ep.id + ".sp", Role::SupportPos);
  ep.support_neg = as_records(
      draw_class_features(out.true_neg, cfg.noise_sigma, cfg.m, rng),
      ep.id + ".sn", Role::SupportNeg);

  const Label label = rng.uniform() < 0.5 ? Label::Positive : Label::Negative;
  const Vec& query_dir = label == Label::Positive ? out.true_pos : out.true_neg;
  ep.query = {ep.id + ".q", Role::Query,
              draw_class_features(query_dir, cfg.noise_sigma, 1, rng).front()};
  ep.query_label = label;

  const double along = cfg.text_alignment;
  const double off = std::sqrt(std::max(0.0, 1.0 - along * along));
  for (Label l : {Label::Positive, Label::Negative}) {
    const Vec& dir = l == Label::Positive ? out.true_pos : out.true_neg;
    const Vec& other = l == Label::Positive ? out.true_neg : out.true_pos;
    const Vec basis[] = {dir};
    Vec residual = random_orthogonal(d, basis, rng);
    const bool flip = rng.uniform() < 0.5;
    if (cfg.text_residual == TextResidual::InPlane) {
      // Part of the other concept orthogonal to this one; empty when the
      // concepts are antipodal, in which case the random residual stays.
      Vec across = combine(1.0, other, -dot(other, dir), dir);
      if (l2_norm(across) > 1e-9) {
        residual = l2_normalize(across);
        if (flip) {
          for (double& x : residual) x = -x;
        }
      }
    }
    Vec t = l2_normalize(combine(along, dir, off, residual));
    (l == Label::Positive ? out.text.t_true : out.text.t_false) = std::move(t);
  }
  out.text.prompt_true = build_prompt(ep.action, ep.object, Label::Positive);
  out.text.prompt_false = build_prompt(ep.action, ep.object, Label::Negative);
  return out;
}

double expected_feature_scale(std::size_t dim, double sigma,
                              std::size_t samples, std::uint64_t seed) {
  if (sigma == 0.0) return 1.0;
  Rng rng(seed);
  std::vector<double> terms(samples);
  for (double& term : terms) {
    const double radial = 1.0 + sigma * rng.normal();
    double transverse = 0.0;
    for (std::size_t i = 1; i < dim; ++i) {
      const double z = sigma * rng.normal();
      transverse += z * z;
    }
    term = radial / std::sqrt(radial * radial + transverse);
  }
  return canonical_sum(std::move(terms)) / static_cast<double>(samples);
}

}  // namespace dna
