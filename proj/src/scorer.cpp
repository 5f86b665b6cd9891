#include "igsearch/scorer.hpp"

#include "igsearch/errors.hpp"

#include <cmath>

namespace igsearch {

void AnswerScorer::check_length(const ScoringContext& ctx, std::size_t index) const {
    if (ctx.tokens.size() > max_context_) throw ContextTooLong(index, ctx.tokens.size(), max_context_);
}

double AnswerScorer::alias_logprob(const ScoringContext& ctx, const std::vector<Tokens>& aliases) const {
    if (aliases.empty()) throw EmptyAnswer("no gold aliases");
    if (aliases.size() > kMaxAliases)
        throw TooManyAliases(std::to_string(aliases.size()) + " aliases, at most " + std::to_string(kMaxAliases));
    double sum = 0.0;
    for (const auto& a : aliases) sum += answer_logprob(ctx, a).value;
    return sum / static_cast<double>(aliases.size());
}

std::vector<double> AnswerScorer::score_variants(const std::vector<ScoringContext>& contexts,
                                                 const std::vector<Tokens>& aliases) const {
    batched_calls_.fetch_add(1, std::memory_order_relaxed);
    contexts_scored_.fetch_add(contexts.size(), std::memory_order_relaxed);
    std::vector<double> out;
    out.reserve(contexts.size());
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        check_length(contexts[i], i);
        out.push_back(alias_logprob(contexts[i], aliases));
    }
    return out;
}

CopyScorer::CopyScorer(CopyModelParams params) : params_(params) {
    if (!(params_.mu >= 0.0 && params_.mu <= 1.0)) throw InvalidHyperparam("copy weight mu must lie in [0, 1]");
    if (params_.vocab_size == 0) throw InvalidHyperparam("vocabulary size must be positive");
    max_context_ = params_.max_context;
}

AnswerLogProb CopyScorer::answer_logprob(const ScoringContext& ctx, const Tokens& answer) const {
    if (answer.empty()) throw EmptyAnswer("answer has no tokens");
    check_length(ctx, 0);
    const double mu = params_.mu;
    const double v = static_cast<double>(params_.vocab_size);
    AnswerLogProb out;
    out.per_token.reserve(answer.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < answer.size(); ++k) {
        std::size_t count = 0;
        for (const auto& t : ctx.tokens) count += (t == answer[k]);
        for (std::size_t i = 0; i < k; ++i) count += (answer[i] == answer[k]);
        const double len = static_cast<double>(ctx.tokens.size() + k);
        const double p = mu * (static_cast<double>(count) + 1.0) / (len + v) + (1.0 - mu) / v;
        const double lp = std::log(p);
        out.per_token.push_back(lp);
        sum += lp;
    }
    out.value = sum / static_cast<double>(answer.size());
    return out;
}

AnswerLogProb OracleTableScorer::answer_logprob(const ScoringContext& ctx, const Tokens& answer) const {
    if (answer.empty()) throw EmptyAnswer("answer has no tokens");
    auto it = table_.find(join(ctx.tokens));
    if (it == table_.end()) throw ScorerLookup("no table entry for context '" + join(ctx.tokens) + "'");
    return AnswerLogProb{it->second, {it->second}};
}

double OracleTableScorer::alias_logprob(const ScoringContext& ctx, const std::vector<Tokens>& aliases) const {
    if (aliases.empty()) throw EmptyAnswer("no gold aliases");
    if (aliases.size() > kMaxAliases) throw TooManyAliases(std::to_string(aliases.size()) + " aliases");
    return answer_logprob(ctx, aliases.front()).value;
}

}  // namespace igsearch
