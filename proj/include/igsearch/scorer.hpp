#pragma once

#include "igsearch/tokenize.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace igsearch {

constexpr std::size_t kMaxContextTokens = 8192;
constexpr std::size_t kMaxAliases = 3;

enum class Provenance { Real, Counterfactual };

struct ScoringContext {
    Tokens tokens;
    Provenance provenance = Provenance::Real;
    std::size_t variant = 0;  // j for counterfactual contexts
};

struct AnswerLogProb {
    double value = 0.0;  // mean of per_token, nats per answer token
    std::vector<double> per_token;
};

// Scores log pi(a* | C). Implementations must be safe to call concurrently.
class AnswerScorer {
public:
    virtual ~AnswerScorer() = default;

    virtual AnswerLogProb answer_logprob(const ScoringContext& ctx, const Tokens& answer) const = 0;

    // Mean of answer_logprob over 1..3 aliases.
    virtual double alias_logprob(const ScoringContext& ctx, const std::vector<Tokens>& aliases) const;

    // One batched invocation over the real and counterfactual contexts.
    // Errors from context i are rethrown with that index.
    std::vector<double> score_variants(const std::vector<ScoringContext>& contexts,
                                       const std::vector<Tokens>& aliases) const;

    std::uint64_t batched_calls() const { return batched_calls_.load(); }
    std::uint64_t contexts_scored() const { return contexts_scored_.load(); }
    void reset_counters() {
        batched_calls_ = 0;
        contexts_scored_ = 0;
    }

protected:
    void check_length(const ScoringContext& ctx, std::size_t index) const;
    std::size_t max_context_ = kMaxContextTokens;

private:
    mutable std::atomic<std::uint64_t> batched_calls_{0};
    mutable std::atomic<std::uint64_t> contexts_scored_{0};
};

struct CopyModelParams {
    double mu = 0.9;
    std::size_t vocab_size = 1000;
    std::size_t max_context = kMaxContextTokens;
};

// Evidence-copy model: p(a_k) = mu * (count(a_k in ctx + a_<k) + 1) / (|ctx| + k - 1 + V)
//                                + (1 - mu) / V
class CopyScorer final : public AnswerScorer {
public:
    explicit CopyScorer(CopyModelParams params);
    AnswerLogProb answer_logprob(const ScoringContext& ctx, const Tokens& answer) const override;
    const CopyModelParams& params() const { return params_; }

private:
    CopyModelParams params_;
};

// Test scorer: alias-level values keyed by the joined context tokens.
class OracleTableScorer final : public AnswerScorer {
public:
    void set(const Tokens& context, double value) { table_[join(context)] = value; }
    AnswerLogProb answer_logprob(const ScoringContext& ctx, const Tokens& answer) const override;
    double alias_logprob(const ScoringContext& ctx, const std::vector<Tokens>& aliases) const override;

private:
    std::unordered_map<std::string, double> table_;
};

}  // namespace igsearch
