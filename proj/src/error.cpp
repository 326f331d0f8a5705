#include "ctvote/error.hpp"

namespace ctvote {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyDirectory: return "EmptyDirectory";
        case ErrorCode::MixedDimensions: return "MixedDimensions";
        case ErrorCode::UndecodableImage: return "UndecodableImage";
        case ErrorCode::NonPositiveWindow: return "NonPositiveWindow";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::EmptyForeground: return "EmptyForeground";
        case ErrorCode::TooNarrow: return "TooNarrow";
        case ErrorCode::ZeroTarget: return "ZeroTarget";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::ZeroLength: return "ZeroLength";
        case ErrorCode::MissingPrediction: return "MissingPrediction";
        case ErrorCode::IncompleteSliceSet: return "IncompleteSliceSet";
        case ErrorCode::EmptyPredictions: return "EmptyPredictions";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::InvalidDistribution: return "InvalidDistribution";
        case ErrorCode::DegenerateLabels: return "DegenerateLabels";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::KeyMismatch: return "KeyMismatch";
        case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
    }
    return "UnknownError";
}

bool is_data_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvariantViolation:
        case ErrorCode::NonFiniteLoss:
        case ErrorCode::NonFiniteGradient:
            return false;
        default:
            return true;
    }
}

}  // namespace ctvote
