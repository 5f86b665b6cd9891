#include "igsearch/errors.hpp"

namespace igsearch {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedTag: return "MalformedTag";
        case ErrorCode::OrderViolation: return "OrderViolation";
        case ErrorCode::TooManySearches: return "TooManySearches";
        case ErrorCode::NoSuchStep: return "NoSuchStep";
        case ErrorCode::SpecInfeasible: return "SpecInfeasible";
        case ErrorCode::EmptyQuery: return "EmptyQuery";
        case ErrorCode::EmptyAnswer: return "EmptyAnswer";
        case ErrorCode::ContextTooLong: return "ContextTooLong";
        case ErrorCode::TooManyAliases: return "TooManyAliases";
        case ErrorCode::NotPolicyToken: return "NotPolicyToken";
        case ErrorCode::PoolExhausted: return "PoolExhausted";
        case ErrorCode::InvalidHyperparam: return "InvalidHyperparam";
        case ErrorCode::MisalignedRecords: return "MisalignedRecords";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::MissingMetrics: return "MissingMetrics";
        case ErrorCode::ScorerLookup: return "ScorerLookup";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

ContextTooLong::ContextTooLong(std::size_t index, std::size_t length, std::size_t limit)
    : Error(ErrorCode::ContextTooLong,
            "context " + std::to_string(index) + " has " + std::to_string(length) +
                " tokens, limit is " + std::to_string(limit)),
      index_(index) {}

}  // namespace igsearch
