// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dna/features.hpp"
#include "dna/numkit.hpp"

namespace dna::test {

/// Standard basis vector e_i in `dim` dimensions.
inline Vec basis(std::size_t i, std::size_t dim) {
  Vec v(dim, 0.0);
  v[i] = 1.0;
  return v;
}

inline Vec scaled(Vec v, double s) {
  for (double& x : v) x *= s;
  return v;
}

inline Vec random_unit(std::size_t dim, Rng& rng) {
  Vec v(dim);
  for (double& x : v) x = rng.normal();
  return l2_normalize(v);
}

inline FeatureRecord record(std::string id, Role role, Vec v) {
  return {std::move(id), role, std::move(v)};
}

inline TextFeatures text(Vec t_true, Vec t_false) {
  return {std::move(t_true), std::move(t_false), "true", "false"};
}

/// A directory under the build tree, emptied on construction.
inline std::string scratch_dir(const std::string& name) {
  const std::string dir = std::string(DNA_TEST_TMP) + "/" + name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dna::test
