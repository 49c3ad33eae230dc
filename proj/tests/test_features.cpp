// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dna/error.hpp"
#include "dna/features.hpp"
#include "dna/manifest.hpp"
#include "helpers.hpp"

using namespace dna;
using dna::test::basis;
using dna::test::record;

namespace {

Errc read_error(std::string_view bytes) {
  try {
    read_feature_cache(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a read error");
  return Errc::Io;
}

std::vector<FeatureRecord> sample_records(std::size_t n, std::size_t dim,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeatureRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(record("r" + std::to_string(i),
                         static_cast<Role>(i % 5), test::random_unit(dim, rng)));
  }
  return out;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("build_prompt instantiates the template exactly") {
  CHECK(build_prompt("eats", "orange", Label::Positive) ==
        "a photo that a person eats orange, it is true");
  CHECK(build_prompt("sit on", "bicycle", Label::Negative) ==
        "a photo that a person sit on bicycle, it is false");
  // No normalization of the fields.
  CHECK(build_prompt("Rides ", "Horse", Label::Positive) ==
        "a photo that a person Rides  Horse, it is true");
  for (auto [a, o] : {std::pair{"", "orange"}, std::pair{"eats", ""}}) {
    try {
      build_prompt(a, o, Label::Positive);
      FAIL("expected EmptyField");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EmptyField);
    }
  }
}

TEST_CASE("FCH1 layout") {
  const std::string empty = write_feature_cache({}, 8);
  CHECK(empty.size() == 12);
  CHECK(empty.substr(0, 4) == "FCH1");
  const FeatureCache none = read_feature_cache(empty);
  CHECK(none.dim == 8);
  CHECK(none.records.empty());

  // header 12 + u16 len + "rec0" + role byte + 4 x f32 = 35
  const std::vector<FeatureRecord> one = {
      record("rec0", Role::Query, basis(1, 4))};
  const std::string bytes = write_feature_cache(one, 4);
  CHECK(bytes.size() == 35);
  CHECK(static_cast<unsigned char>(bytes[4]) == 4);  // dim, little-endian
  CHECK(static_cast<unsigned char>(bytes[8]) == 1);  // count
  CHECK(bytes[14] == 'r');
  CHECK(static_cast<unsigned char>(bytes[18]) == 2);  // Query role code
  // 1.0f = 0x3f800000 in the second float slot
  CHECK(static_cast<unsigned char>(bytes[25]) == 0x80);
  CHECK(static_cast<unsigned char>(bytes[26]) == 0x3f);

  CHECK_THROWS_AS(write_feature_cache(one, 3), Error);
}

TEST_CASE("FCH1 round trip") {
  const auto records = sample_records(50, 16, 1);
  const std::string first = write_feature_cache(records, 16);
  const FeatureCache cache = read_feature_cache(first);
  REQUIRE(cache.records.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(cache.records[i].id == records[i].id);
    CHECK(cache.records[i].role == records[i].role);
    for (std::size_t k = 0; k < 16; ++k) {
      CHECK(cache.records[i].vector[k] ==
            static_cast<double>(static_cast<float>(records[i].vector[k])));
    }
  }
  CHECK(write_feature_cache(cache.records, cache.dim) == first);
  // f32-exact input survives unchanged.
  CHECK(read_feature_cache(first).records == cache.records);
}

TEST_CASE("FCH1 rejects corrupt streams") {
  const auto records = sample_records(3, 4, 2);
  const std::string good = write_feature_cache(records, 4);

  std::string bad_magic = good;
  bad_magic[3] = '2';
  CHECK(read_error(bad_magic) == Errc::BadMagic);
  CHECK(read_error("FC") == Errc::BadMagic);
  CHECK(read_error("") == Errc::BadMagic);

  std::string zero_dim = good;
  zero_dim[4] = 0;
  CHECK(read_error(zero_dim) == Errc::DimensionZero);

  CHECK(read_error(good.substr(0, 9)) == Errc::TruncatedRecord);
  try {
    read_feature_cache(good.substr(0, good.size() - 1));
    FAIL("expected TruncatedRecord");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TruncatedRecord);
    CHECK(std::string(e.what()).find("record 2") != std::string::npos);
  }

  std::string bad_role = good;
  bad_role[12 + 2 + 2] = 9;  // first record role, id "r0"
  CHECK(read_error(bad_role) == Errc::BadRole);

  auto dup = records;
  dup[2].id = dup[0].id;
  CHECK(read_error(write_feature_cache(dup, 4)) == Errc::DuplicateId);
}

TEST_CASE("FCH1 norm drift") {
  auto records = sample_records(2, 8, 3);
  records[1].vector = test::scaled(records[1].vector, 0.9);
  try {
    read_feature_cache(write_feature_cache(records, 8));
    FAIL("expected NormDrift");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NormDrift);
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }

  records[1].vector = test::scaled(l2_normalize(records[1].vector), 1.0 + 1e-4);
  const FeatureCache fixed = read_feature_cache(write_feature_cache(records, 8));
  CHECK(fixed.renormalized == 1);
  CHECK(std::abs(l2_norm(fixed.records[1].vector) - 1.0) < 1e-12);
  CHECK(fixed.max_norm_drift == doctest::Approx(1e-4).epsilon(1e-2));

  Vec zero(8, 0.0);
  records[1].vector = zero;
  CHECK(read_error(write_feature_cache(records, 8)) == Errc::NormDrift);
}

TEST_CASE("golden cache written by an independent encoder") {
  const FeatureCache cache =
      load_feature_cache(std::string(DNA_TEST_DATA) + "/golden.fch1");
  CHECK(cache.dim == 4);
  REQUIRE(cache.records.size() == 12);
  CHECK(cache.records[1].id == "g1.sp1");
  CHECK(cache.records[1].role == Role::SupportPos);
  CHECK(cache.records[1].vector[0] == static_cast<double>(0.6f));
  CHECK(cache.records[1].vector[1] == static_cast<double>(0.8f));
  CHECK(cache.records[5].role == Role::Text);
  CHECK(cache.records[5].id == build_prompt("rides", "bicycle", Label::Positive));
  CHECK(cache.renormalized == 0);
}

TEST_CASE("golden manifest resolves against the golden cache") {
  const auto entries =
      load_manifest(std::string(DNA_TEST_DATA) + "/golden_manifest.json");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].split == Split::UnseenActSeenObj);
  CHECK(entries[0].query_label == Label::Positive);
  CHECK(entries[0].augment_pos == "g1.pos");
  CHECK_FALSE(entries[1].query_label);
  CHECK_FALSE(entries[1].augment_pos);

  // Serializing and re-parsing is lossless.
  CHECK(parse_manifest(manifest_to_json(entries)) == entries);

  FeatureIndex index;
  index.add(load_feature_cache(std::string(DNA_TEST_DATA) + "/golden.fch1"));
  const auto jobs = resolve_jobs(entries, index, index);
  REQUIRE(jobs.size() == 2);
  CHECK(jobs[0].setup_error.empty());
  CHECK(jobs[0].episode.support_pos.size() == 2);
  CHECK(jobs[0].text.t_true[2] == static_cast<double>(0.8f));
  REQUIRE(jobs[0].augmentation);
  CHECK(jobs[1].augmentation == nullptr);

  auto broken = entries;
  broken[0].query = "missing";
  broken[1].action = "eats";  // no text features for this prompt
  const auto failed = resolve_jobs(broken, index, index);
  CHECK(failed[0].setup_error.find("UnknownRecord") != std::string::npos);
  CHECK(failed[1].setup_error.find("UnknownRecord") != std::string::npos);
}

TEST_CASE("manifest format errors") {
  CHECK_THROWS_AS(parse_manifest("{"), Error);
  CHECK_THROWS_AS(parse_manifest(R"({"format": "other", "episodes": []})"),
                  Error);
  CHECK_THROWS_AS(
      parse_manifest(
          R"({"format": "dna-episodes/1", "episodes": [{"id": "x"}]})"),
      Error);
}

TEST_CASE("FeatureIndex") {
  FeatureCache a{4, {record("x", Role::Query, basis(0, 4)),
                     record("t/0", Role::Candidate, basis(1, 4)),
                     record("t/1", Role::Candidate, basis(2, 4)),
                     record("tt/0", Role::Candidate, basis(3, 4))}};
  FeatureIndex index;
  index.add(a);
  CHECK(index.at("x").vector == basis(0, 4));
  CHECK(index.find("nope") == nullptr);
  CHECK(index.with_tag("t").size() == 2);
  CHECK_THROWS_AS(index.add(a), Error);
  FeatureCache other{5, {record("y", Role::Query, basis(0, 5))}};
  CHECK_THROWS_AS(index.add(other), Error);
}

TEST_CASE("synthetic episodes") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.seed = 4;
  const SyntheticEpisode s = generate_synthetic_episode(cfg);
  REQUIRE(s.episode.support_pos.size() == 6);
  REQUIRE(s.episode.support_neg.size() == 6);
  for (const FeatureRecord& r : s.episode.support_pos) {
    CHECK(r.vector == s.true_pos);
  }
  CHECK(cosine(s.true_pos, s.true_neg) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cosine(s.text.t_true, s.true_pos) ==
        doctest::Approx(0.9).epsilon(1e-12));
  CHECK(cosine(s.text.t_false, s.true_neg) ==
        doctest::Approx(0.9).epsilon(1e-12));
  CHECK(s.text.prompt_true ==
        build_prompt(s.episode.action, s.episode.object, Label::Positive));

  cfg.separation = std::acos(-1.0);
  const SyntheticEpisode anti = generate_synthetic_episode(cfg);
  CHECK(cosine(anti.true_pos, anti.true_neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cosine(anti.text.t_true, anti.true_pos) ==
        doctest::Approx(0.9).epsilon(1e-12));

  cfg = SynthConfig{};
  cfg.seed = 77;
  const SyntheticEpisode a = generate_synthetic_episode(cfg, "e");
  const SyntheticEpisode b = generate_synthetic_episode(cfg, "e");
  CHECK(a.episode.support_pos == b.episode.support_pos);
  CHECK(a.episode.support_neg == b.episode.support_neg);
  CHECK(a.episode.query == b.episode.query);
  CHECK(a.text.t_true == b.text.t_true);
  for (const auto* group : {&a.episode.support_pos, &a.episode.support_neg}) {
    for (const FeatureRecord& r : *group) {
      CHECK(std::abs(l2_norm(r.vector) - 1.0) < 1e-6);
    }
  }

  for (TextResidual residual : {TextResidual::InPlane, TextResidual::Random}) {
    cfg.text_residual = residual;
    const SyntheticEpisode t = generate_synthetic_episode(cfg);
    CHECK(cosine(t.text.t_true, t.true_pos) ==
          doctest::Approx(0.9).epsilon(1e-12));
  }
}

TEST_CASE("synthetic config validation") {
  auto rejects = [](SynthConfig c) {
    try {
      generate_synthetic_episode(c);
    } catch (const Error& e) {
      return e.code() == Errc::InvalidConfig;
    }
    return false;
  };
  SynthConfig c;
  c.dim = 1;
  CHECK(rejects(c));
  c = {};
  c.separation = 0.0;
  CHECK(rejects(c));
  c.separation = 4.0;
  CHECK(rejects(c));
  c = {};
  c.noise_sigma = -0.1;
  CHECK(rejects(c));
  c = {};
  c.m = 0;
  CHECK(rejects(c));
  c = {};
  c.text_alignment = 1.5;
  CHECK(rejects(c));
}

TEST_CASE("synthetic positive queries sit closer to the positive concept") {
  int closer = 0;
  int positives = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;  // sigma 0.1 < separation / 4
    const SyntheticEpisode s = generate_synthetic_episode(cfg);
    if (s.episode.query_label != Label::Positive) continue;
    ++positives;
    const Vec& q = s.episode.query.vector;
    if (cosine(q, s.true_pos) > cosine(q, s.true_neg)) ++closer;
  }
  CHECK(positives > 400);
  CHECK(static_cast<double>(closer) / positives > 0.99);
}

TEST_CASE("expected_feature_scale") {
  CHECK(expected_feature_scale(32, 0.0) == 1.0);
  // Direct Monte Carlo over full vectors as an independent check.
  Rng rng(123);
  const Vec u = basis(0, 32);
  const auto draws = draw_class_features(u, 0.1, 20000, rng);
  double along = 0.0;
  for (const Vec& d : draws) along += d[0];
  along /= 20000.0;
  CHECK(expected_feature_scale(32, 0.1) == doctest::Approx(along).epsilon(2e-3));
}

}
