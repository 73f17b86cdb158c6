#pragma once

#include <stdexcept>
#include <string>

namespace wgf {

// Base class for all failures thrown by this library. CLI maps subclasses of
// ConfigError to exit code 2 and everything else here to exit code 3.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
    using Error::Error;
};
struct InvalidArgument : Error {
    using Error::Error;
};
struct NotSymmetric : Error {
    using Error::Error;
};
struct NotPositiveDefinite : Error {
    using Error::Error;
};
struct NonFiniteValue : Error {
    using Error::Error;
};

// Training / optimization
struct NonFiniteLoss : Error {
    using Error::Error;
};
struct PretrainDiverged : Error {
    using Error::Error;
};
struct MaxIterationsExceeded : Error {
    using Error::Error;
};
struct StageOutOfRange : Error {
    using Error::Error;
};

// Baselines
struct NonFinitePosition : Error {
    using Error::Error;
};
struct SingularBandwidth : Error {
    using Error::Error;
};
struct NegativeDensity : Error {
    using Error::Error;
};

// Metrics
struct NonFiniteLogRatio : Error {
    using Error::Error;
};

// MCMC
struct DegenerateAcceptance : Error {
    using Error::Error;
};

// IO / configuration
struct ConfigError : Error {
    using Error::Error;
};
struct MalformedLine : ConfigError {
    using ConfigError::ConfigError;
};
struct NonBinaryLabels : ConfigError {
    using ConfigError::ConfigError;
};
struct CorruptManifest : ConfigError {
    using ConfigError::ConfigError;
};
struct VersionMismatch : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace wgf
