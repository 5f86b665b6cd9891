#pragma once

#include "igsearch/config.hpp"
#include "igsearch/grpo.hpp"
#include "igsearch/ig.hpp"
#include "igsearch/rollout.hpp"
#include "igsearch/scorer.hpp"
#include "igsearch/world.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace igsearch {

using PositionMeans = std::array<std::optional<double>, kMaxHops>;

// Mean raw IG by step index 0..2; positions with no records stay empty.
PositionMeans per_position_ig(const std::vector<IGRecord>& records);

struct EvalMetrics {
    std::size_t questions = 0;
    double em = 0.0;
    std::array<std::optional<double>, kMaxHops> em_by_hop;
    double searches_per_rollout = 0.0;
    std::array<std::optional<double>, kMaxHops> searches_by_hop;
    double search_quality = 0.0;
    PositionMeans ig_position;
    std::array<PositionMeans, kMaxHops> ig_position_by_hop;
};

struct MetricsSnapshot {
    std::size_t iteration = 0;
    std::optional<EvalMetrics> eval;
    double reward_mean = 0.0;
    double train_em = 0.0;
    double search_quality = 0.0;
    std::size_t retrieval_calls = 0;
    std::optional<double> discriminative_gap;
    PositionMeans ig_position;
    double all_failure_fraction = 0.0;
    std::optional<double> all_failure_abs_modulation;  // mean |alpha * IG~| over all-failure steps
    double searches_per_rollout = 0.0;
    std::optional<double> searches_single_hop;
    std::optional<double> searches_multi_hop;
    std::optional<double> query_length;
    std::uint64_t scoring_calls = 0;  // cumulative batched scorer invocations
    std::size_t ig_skipped = 0;       // trajectories with no eligible counterfactual pairs
    std::size_t ig_fallbacks = 0;     // trajectories sampled with replacement
    double dead_zone_fraction = 0.0;
    UpdateStats update;
};

nlohmann::json to_json(const EvalMetrics& m);
nlohmann::json to_json(const MetricsSnapshot& m);

nlohmann::json params_to_json(const PolicyParams& params, std::size_t t_max);
PolicyParams params_from_json(const nlohmann::json& j);
void save_params(const std::string& path, const PolicyParams& params, std::size_t t_max);
PolicyParams load_params(const std::string& path);

std::unique_ptr<AnswerScorer> make_scorer(const RunConfig& config, const World& world);
RolloutConfig rollout_config(const RunConfig& config, bool greedy);

// Greedy rollouts on every question of the split. The counterfactual pool for
// each question comes from the other questions' rollouts.
EvalMetrics evaluate(const PolicyParams& params, const World& world, const RunConfig& config,
                     const AnswerScorer& scorer, Split split = Split::Eval, std::uint64_t seed = 0);

// What one iteration produced, before the update.
struct IterationView {
    std::size_t iteration = 0;
    const std::vector<GroupBatch>* groups = nullptr;
    const std::vector<std::vector<std::vector<IGRecord>>>* records = nullptr;  // [group][rollout][step]
    const MetricsSnapshot* metrics = nullptr;
};

struct TrainOptions {
    std::string run_dir;          // empty: keep everything in memory
    std::ostream* log = nullptr;  // warnings and progress
    bool keep_records = false;    // retain IG records of checkpoint iterations in the result
    std::function<void(const IterationView&)> observer;
};

struct TrainResult {
    PolicyParams params;
    std::vector<MetricsSnapshot> metrics;
    EvalMetrics initial_eval;
    EvalMetrics final_eval;
    std::vector<std::pair<std::size_t, std::vector<IGRecord>>> checkpoint_records;
};

// The training loop. Deterministic given the config (including train.seed).
// On NonFiniteGradient the last good parameters are written and the error is
// rethrown.
TrainResult train(const RunConfig& config, const World& world, const TrainOptions& options = {});

World world_for(const RunConfig& config);

}  // namespace igsearch
