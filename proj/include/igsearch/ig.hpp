#pragma once

#include "igsearch/scorer.hpp"
#include "igsearch/trajectory.hpp"
#include "igsearch/world.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace igsearch {

enum class BaselineMode { RandomDocsRefine, RandomDocsOnly, BottomK, Empty };

const char* to_string(BaselineMode mode);
BaselineMode baseline_from_string(const std::string& name);

struct PoolEntry {
    std::size_t question = 0;
    std::size_t step = 0;
    std::vector<Tokens> docs;
    Tokens refine;
};

// (documents, refine) pairs harvested from the search steps of a batch.
class CounterfactualPool {
public:
    void add(std::size_t question, const Trajectory& trajectory);
    void add(PoolEntry entry) { entries_.push_back(std::move(entry)); }
    const std::vector<PoolEntry>& entries() const { return entries_; }
    std::size_t eligible(std::size_t question) const;

private:
    std::vector<PoolEntry> entries_;
};

struct ContextSet {
    ScoringContext real;
    std::vector<ScoringContext> counterfactuals;
    std::vector<const PoolEntry*> provenance;  // pool entry per counterfactual, null for BottomK/Empty
};

struct ContextOptions {
    std::size_t n = 3;
    BaselineMode mode = BaselineMode::RandomDocsRefine;
    std::size_t k = 3;                // retrieval depth for BottomK
    bool allow_replacement = false;  // fallback when the pool is short
};

// Token sequence of a context: question tokens, then every segment as
// "<tag>" tokens "</tag>" (the canonical rendering, tokenized).
Tokens context_tokens(const Tokens& question, const std::vector<Segment>& segments);

// Real context (tau_<t, q_t, d_t, r_t) and its counterfactual replacements.
// Throws PoolExhausted when fewer than n eligible pairs exist (and
// replacement is not allowed), or none at all.
ContextSet build_contexts(const Trajectory& trajectory, std::size_t step, const Question& question,
                          const CounterfactualPool& pool, const World& world, const ContextOptions& options,
                          std::uint64_t seed);

struct RawIG {
    double ig = 0.0;
    double real_logprob = 0.0;
    std::vector<double> counterfactual_logprobs;
};

RawIG compute_raw_ig(const AnswerScorer& scorer, const ScoringContext& real,
                     const std::vector<ScoringContext>& counterfactuals, const std::vector<Tokens>& aliases);

struct StabilizeParams {
    double delta = 0.5;
    double lambda = 0.1;
    double eta = 3.0;
    bool dead_zone = true;
    bool clip = true;
};

struct StageTrace {
    double raw = 0.0;
    double after_deadzone = 0.0;
    double after_lambda = 0.0;
    double after_clip = 0.0;
};

void validate(const StabilizeParams& params);
StageTrace stabilize(double ig, const StabilizeParams& params);

struct IGRecord {
    std::size_t question = 0;
    std::size_t rollout = 0;
    std::size_t step = 0;
    double raw = 0.0;
    double after_deadzone = 0.0;
    double after_lambda = 0.0;
    double after_clip = 0.0;  // final stabilized value
    double real_logprob = 0.0;
    std::vector<double> counterfactual_logprobs;
    BaselineMode baseline = BaselineMode::RandomDocsRefine;
    std::vector<std::size_t> counterfactual_questions;
};

// Records for every search step of one trajectory, in step order.
std::vector<IGRecord> trajectory_ig(const AnswerScorer& scorer, const Trajectory& trajectory,
                                    const Question& question, std::size_t rollout,
                                    const CounterfactualPool& pool, const World& world,
                                    const ContextOptions& options, const StabilizeParams& stab,
                                    std::uint64_t seed);

}  // namespace igsearch
