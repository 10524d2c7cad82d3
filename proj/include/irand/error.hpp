#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace irand {

enum class ErrorKind {
    MissingColumn,
    DuplicateTimePoint,
    OrphanIndividual,
    NonBinaryTreatment,
    InvalidTime,
    NonNumericVariable,
    LengthMismatch,
    InvalidSummary,
    InvalidSchema,
    InvalidConfig,
    SingleClass,
    DimensionMismatch,
    ZeroVariance,
    EmptyGroup,
    EmptyData,
    PlanMismatch,
    Io,
};

// Coarse classification used by the CLI to pick an exit code.
enum class ErrorClass { usage, data, numeric };

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::MissingColumn: return "MissingColumn";
        case ErrorKind::DuplicateTimePoint: return "DuplicateTimePoint";
        case ErrorKind::OrphanIndividual: return "OrphanIndividual";
        case ErrorKind::NonBinaryTreatment: return "NonBinaryTreatment";
        case ErrorKind::InvalidTime: return "InvalidTime";
        case ErrorKind::NonNumericVariable: return "NonNumericVariable";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::InvalidSummary: return "InvalidSummary";
        case ErrorKind::InvalidSchema: return "InvalidSchema";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::SingleClass: return "SingleClass";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::ZeroVariance: return "ZeroVariance";
        case ErrorKind::EmptyGroup: return "EmptyGroup";
        case ErrorKind::EmptyData: return "EmptyData";
        case ErrorKind::PlanMismatch: return "PlanMismatch";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

[[nodiscard]] constexpr ErrorClass classify(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidConfig:
        case ErrorKind::InvalidSchema:
            return ErrorClass::usage;
        case ErrorKind::SingleClass:
        case ErrorKind::ZeroVariance:
        case ErrorKind::DimensionMismatch:
            return ErrorClass::numeric;
        default:
            return ErrorClass::data;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace irand
