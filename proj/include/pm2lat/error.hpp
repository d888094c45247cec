#pragma once

#include <stdexcept>
#include <string>

namespace pm2lat {

// Coarse error category; the CLI maps each category onto an exit code.
enum class ErrorCategory {
    Usage,       // bad arguments
    Data,        // parse / schema / validation / merge conflicts / stale cache
    Prediction,  // nothing to predict with (unresolved layer, missing config)
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message),
          category_(category),
          kind_(std::move(kind)) {}

    ErrorCategory category() const noexcept { return category_; }
    // Short machine-readable name, e.g. "ValidationError".
    const std::string& kind() const noexcept { return kind_; }

private:
    ErrorCategory category_;
    std::string kind_;
};

#define PM2LAT_DEFINE_ERROR(Name, Category)                              \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& message)                        \
            : Error(ErrorCategory::Category, #Name, message) {}          \
    }

PM2LAT_DEFINE_ERROR(UsageError, Usage);
PM2LAT_DEFINE_ERROR(ParseError, Data);
PM2LAT_DEFINE_ERROR(SchemaError, Data);
PM2LAT_DEFINE_ERROR(ValidationError, Data);
PM2LAT_DEFINE_ERROR(DeviceMismatch, Data);
PM2LAT_DEFINE_ERROR(ConflictError, Data);
PM2LAT_DEFINE_ERROR(StaleCache, Data);
PM2LAT_DEFINE_ERROR(InsufficientData, Data);
PM2LAT_DEFINE_ERROR(SingularSystem, Data);
PM2LAT_DEFINE_ERROR(PoleInRange, Data);
PM2LAT_DEFINE_ERROR(EmptyInput, Data);
PM2LAT_DEFINE_ERROR(ZeroMeasured, Data);
PM2LAT_DEFINE_ERROR(NoConfigAvailable, Prediction);
PM2LAT_DEFINE_ERROR(InvalidTile, Prediction);
PM2LAT_DEFINE_ERROR(CurveMismatch, Prediction);
PM2LAT_DEFINE_ERROR(UnknownFamily, Prediction);
PM2LAT_DEFINE_ERROR(UnknownKernel, Prediction);
PM2LAT_DEFINE_ERROR(UnresolvedLayer, Prediction);
PM2LAT_DEFINE_ERROR(UnresolvedPoint, Prediction);
PM2LAT_DEFINE_ERROR(MissingEntry, Prediction);
PM2LAT_DEFINE_ERROR(IoError, Io);

#undef PM2LAT_DEFINE_ERROR

}  // namespace pm2lat
