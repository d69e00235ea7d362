#pragma once

#include <stdexcept>
#include <string>

namespace gbl {

/// Base class for every error raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flux evaluated at the degenerate corner u = phi = 0.
struct DegenerateState : Error { using Error::Error; };

/// A bracketing root search found no sign change.
struct NoRoot : Error { using Error::Error; };

/// Viscosity ratio outside the range an operation supports.
struct MobilityOutOfRange : Error { using Error::Error; };

/// Requested time step exceeds the stable CFL bound.
struct CFLViolation : Error { using Error::Error; };

/// The finite-difference solver only integrates the conservative form.
struct NonConservativeUnsupported : Error { using Error::Error; };

/// Gradient or parameter containers disagree in shape.
struct ShapeMismatch : Error { using Error::Error; };

/// A recorded forward pass was reused after its reverse sweep.
struct TapeConsumed : Error { using Error::Error; };

/// Two fields sampled on different coordinates were compared.
struct GridMismatch : Error { using Error::Error; };

/// An entropy context is internally inconsistent.
struct ContextMismatch : Error { using Error::Error; };

/// Training produced a non-finite loss.
struct DivergenceDetected : Error { using Error::Error; };

}  // namespace gbl
