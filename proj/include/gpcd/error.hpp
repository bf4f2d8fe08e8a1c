#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gpcd {

enum class Errc {
  IndexOutOfRange,
  SelfLoop,
  DuplicateEdge,
  InvalidConfig,
  EmptyGraph,
  IoError,
  FormatError,
  KTooLarge,
  NoPerfectAnnotator,
  InvalidRho,
  ShapeMismatch,
  NonFiniteInput,
  NotScalar,
  UninitializedGradient,
  DimMismatch,
  KExceedsPoints,
  InvalidDelta,
  InvalidProfile,
  MissingCausalMask,
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EmptyGraph: return "EmptyGraph";
    case Errc::IoError: return "IoError";
    case Errc::FormatError: return "FormatError";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::NoPerfectAnnotator: return "NoPerfectAnnotator";
    case Errc::InvalidRho: return "InvalidRho";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::NotScalar: return "NotScalar";
    case Errc::UninitializedGradient: return "UninitializedGradient";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::KExceedsPoints: return "KExceedsPoints";
    case Errc::InvalidDelta: return "InvalidDelta";
    case Errc::InvalidProfile: return "InvalidProfile";
    case Errc::MissingCausalMask: return "MissingCausalMask";
  }
  return "Unknown";
}

/// All library failures are reported through this exception; `code()` identifies the kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace gpcd
