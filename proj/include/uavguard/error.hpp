#pragma once

#include <stdexcept>
#include <string>

namespace uavguard {

// Every failure the library reports derives from Error. The category decides
// the CLI exit code: io -> 2, config -> 3, everything else -> 4.
enum class ErrorKind {
    Io,
    Config,
    Parse,
    Ordering,
    Imputation,
    Sizing,
    Dimension,
    Input,
    Divergence,
    Fit,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define UAVGUARD_DEFINE_ERROR(Name, Kind)                                   \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
    };

UAVGUARD_DEFINE_ERROR(IoError, Io)
UAVGUARD_DEFINE_ERROR(ConfigError, Config)
UAVGUARD_DEFINE_ERROR(ParseError, Parse)
UAVGUARD_DEFINE_ERROR(OrderingError, Ordering)
UAVGUARD_DEFINE_ERROR(ImputationError, Imputation)
UAVGUARD_DEFINE_ERROR(SizingError, Sizing)
UAVGUARD_DEFINE_ERROR(DimensionError, Dimension)
UAVGUARD_DEFINE_ERROR(InputError, Input)
UAVGUARD_DEFINE_ERROR(DivergenceError, Divergence)
UAVGUARD_DEFINE_ERROR(FitError, Fit)

#undef UAVGUARD_DEFINE_ERROR

} // namespace uavguard
