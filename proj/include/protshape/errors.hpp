// Error types thrown across the library. Each maps to one failure mode of a
// public operation; catching protshape::Error covers all of them.

#pragma once

#include <stdexcept>
#include <string>

namespace protshape {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- ingestion ---
struct MalformedRecord : Error {
  explicit MalformedRecord(std::size_t line_number, const std::string& what)
      : Error("line " + std::to_string(line_number) + ": " + what),
        line(line_number) {}
  std::size_t line;
};
struct ChainNotFound : Error { using Error::Error; };
struct EmptyBackbone : Error { using Error::Error; };

// --- curves and SRVFs ---
struct DegenerateCurve : Error { using Error::Error; };
struct ZeroNorm : Error { using Error::Error; };
struct GridMismatch : Error { using Error::Error; };
struct NotUnitNorm : Error { using Error::Error; };
struct InvalidRotation : Error { using Error::Error; };
struct InvalidWarp : Error { using Error::Error; };

// --- registration ---
struct NoPath : Error { using Error::Error; };
struct AntipodalPair : Error { using Error::Error; };

// --- nn engine ---
struct ShapeMismatch : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct NonScalarLoss : Error { using Error::Error; };

// --- vMF sampling ---
struct NonConvergence : Error { using Error::Error; };
struct NotUnit : Error { using Error::Error; };

// --- generative model ---
struct AntipodalLatents : Error { using Error::Error; };
struct FullMask : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };

// --- serialization ---
struct BadCheckpoint : Error { using Error::Error; };
struct BadFormat : Error { using Error::Error; };

}  // namespace protshape
