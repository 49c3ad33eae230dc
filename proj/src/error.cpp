// SPDX-License-Identifier: Apache-2.0
#include "dna/error.hpp"

namespace dna {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroNorm: return "ZeroNorm";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidTemperature: return "InvalidTemperature";
    case Errc::NegativeVariance: return "NegativeVariance";
    case Errc::BadMagic: return "BadMagic";
    case Errc::DimensionZero: return "DimensionZero";
    case Errc::TruncatedRecord: return "TruncatedRecord";
    case Errc::BadRole: return "BadRole";
    case Errc::NormDrift: return "NormDrift";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownRecord: return "UnknownRecord";
    case Errc::EmptyField: return "EmptyField";
    case Errc::EmptySupport: return "EmptySupport";
    case Errc::InsufficientCandidates: return "InsufficientCandidates";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingLabel: return "MissingLabel";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ManifestFormat: return "ManifestFormat";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace dna
