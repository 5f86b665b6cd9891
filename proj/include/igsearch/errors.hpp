#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace igsearch {

enum class ErrorCode {
    MalformedTag,
    OrderViolation,
    TooManySearches,
    NoSuchStep,
    SpecInfeasible,
    EmptyQuery,
    EmptyAnswer,
    ContextTooLong,
    TooManyAliases,
    NotPolicyToken,
    PoolExhausted,
    InvalidHyperparam,
    MisalignedRecords,
    NonFiniteGradient,
    ConfigInvalid,
    MissingMetrics,
    ScorerLookup,
    Io,
};

const char* to_string(ErrorCode code);

// Base for every error raised by the library. The code lets callers (the CLI
// in particular) map failures onto exit statuses without RTTI games.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

template <ErrorCode C>
class TypedError : public Error {
public:
    explicit TypedError(const std::string& what) : Error(C, what) {}
};

using MalformedTag = TypedError<ErrorCode::MalformedTag>;
using OrderViolation = TypedError<ErrorCode::OrderViolation>;
using TooManySearches = TypedError<ErrorCode::TooManySearches>;
using NoSuchStep = TypedError<ErrorCode::NoSuchStep>;
using SpecInfeasible = TypedError<ErrorCode::SpecInfeasible>;
using EmptyQuery = TypedError<ErrorCode::EmptyQuery>;
using EmptyAnswer = TypedError<ErrorCode::EmptyAnswer>;
using TooManyAliases = TypedError<ErrorCode::TooManyAliases>;
using NotPolicyToken = TypedError<ErrorCode::NotPolicyToken>;
using PoolExhausted = TypedError<ErrorCode::PoolExhausted>;
using InvalidHyperparam = TypedError<ErrorCode::InvalidHyperparam>;
using MisalignedRecords = TypedError<ErrorCode::MisalignedRecords>;
using NonFiniteGradient = TypedError<ErrorCode::NonFiniteGradient>;
using ConfigInvalid = TypedError<ErrorCode::ConfigInvalid>;
using MissingMetrics = TypedError<ErrorCode::MissingMetrics>;
using ScorerLookup = TypedError<ErrorCode::ScorerLookup>;
using IoError = TypedError<ErrorCode::Io>;

// Carries the index of the offending context inside a batched scoring call.
class ContextTooLong : public Error {
public:
    ContextTooLong(std::size_t index, std::size_t length, std::size_t limit);

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace igsearch
