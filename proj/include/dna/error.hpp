// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dna {

enum class Errc {
  ZeroNorm,
  DimensionMismatch,
  InvalidTemperature,
  NegativeVariance,
  BadMagic,
  DimensionZero,
  TruncatedRecord,
  BadRole,
  NormDrift,
  DuplicateId,
  UnknownRecord,
  EmptyField,
  EmptySupport,
  InsufficientCandidates,
  InvalidLabel,
  ShapeMismatch,
  MissingLabel,
  InvalidConfig,
  ManifestFormat,
  Io,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dna
