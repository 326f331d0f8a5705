#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctvote {

enum class ErrorCode {
    // ingestion
    EmptyDirectory,
    MixedDimensions,
    UndecodableImage,
    NonPositiveWindow,
    MalformedRecord,
    InvariantViolation,
    IoFailure,
    // preprocessing
    EmptyForeground,
    TooNarrow,
    ZeroTarget,
    IndexOutOfRange,
    EmptyInput,
    // sampling
    ZeroLength,
    // predictors
    MissingPrediction,
    IncompleteSliceSet,
    // aggregation
    EmptyPredictions,
    // heads
    OutOfRange,
    InvalidDistribution,
    DegenerateLabels,
    NonFiniteLoss,
    DimensionMismatch,
    NonFiniteGradient,
    // evaluation
    KeyMismatch,
    EmptyEvaluation,
    TooFewSamples,
};

std::string_view to_string(ErrorCode code);

// True for errors caused by the caller's data rather than a broken internal
// invariant. The CLI maps these to exit code 2.
bool is_data_error(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ctvote
