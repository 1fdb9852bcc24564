#pragma once

#include <stdexcept>
#include <string>

namespace cloudopf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// net-model
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct InvalidFactor : Error { using Error::Error; };

// shared numeric preconditions
struct DimensionMismatch : Error { using Error::Error; };
struct SingularJacobian : Error { using Error::Error; };
struct NotConverged : Error { using Error::Error; };
struct NotPSD : Error { using Error::Error; };

// uncertainty
struct TooFewSamples : Error { using Error::Error; };
struct ZeroDemandBus : Error { using Error::Error; };
struct PolicyInvariantViolated : Error { using Error::Error; };

// evaluation / reporting
struct UnknownGenerator : Error { using Error::Error; };
struct ConfigMismatch : Error { using Error::Error; };

}  // namespace cloudopf
