#pragma once

#include <stdexcept>
#include <string>

namespace maxdisc {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// model
struct AlphaOutOfRange : Error { using Error::Error; };
struct NonSymmetricCross : Error { using Error::Error; };
struct NegativeDiagonal : Error { using Error::Error; };
struct HorizonTooSmall : Error { using Error::Error; };
struct UndecidableRegime : Error { using Error::Error; };

struct NonPSDLatent : Error {
    double min_eigenvalue;
    explicit NonPSDLatent(const std::string& msg, double min_eig)
        : Error(msg), min_eigenvalue(min_eig) {}
};

// sampler
struct EmbeddingNotPSD : Error {
    double most_negative;
    explicit EmbeddingNotPSD(const std::string& msg, double worst)
        : Error(msg), most_negative(worst) {}
};
struct InsufficientReplications : Error { using Error::Error; };

// extremes
struct MissingConstant : Error { using Error::Error; };
struct DeltaBelowMesh : Error { using Error::Error; };
struct RegimeMismatch : Error { using Error::Error; };

// limits
struct DimensionMismatch : Error { using Error::Error; };
struct NegativeExponent : Error { using Error::Error; };
struct QuadratureUnavailable : Error { using Error::Error; };

// pickands
struct MeshTooCoarse : Error { using Error::Error; };
struct DNotOnMesh : Error { using Error::Error; };

// verify
struct EmptySamples : Error { using Error::Error; };
struct LadderTooShort : Error { using Error::Error; };

// cli / config
struct ConfigError : Error { using Error::Error; };

}  // namespace maxdisc
