#pragma once

#include "igsearch/trajectory.hpp"
#include "igsearch/world.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace igsearch {

// Tabular categorical policy: one logit row per state key. Actions outside a
// state's availability mask get probability zero.
class PolicyParams {
public:
    PolicyParams() = default;
    PolicyParams(std::size_t states, std::size_t actions) : states_(states), actions_(actions), logits_(states * actions, 0.0) {}

    std::size_t states() const { return states_; }
    std::size_t actions() const { return actions_; }
    double& logit(std::size_t state, std::size_t action) { return logits_[state * actions_ + action]; }
    double logit(std::size_t state, std::size_t action) const { return logits_[state * actions_ + action]; }
    std::vector<double>& raw() { return logits_; }
    const std::vector<double>& raw() const { return logits_; }

    // Masked softmax; entries outside the mask are exactly zero.
    std::vector<double> probs(std::size_t state, std::uint32_t mask) const;
    double logprob(std::size_t state, std::size_t action, std::uint32_t mask) const;

private:
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> logits_;
};

enum Action : std::size_t {
    QVague1 = 0,  // "best facts"
    QVague2,      // "information about things"
    QLong,        // head + next relation + filler words
    QBigram1,     // question entity + r_1
    QBigram2,
    QBigram3,
    QChain,  // refined head entity + next relation
    AQEnt,   // answer with the question entity
    AFirst,  // answer with the first name in the latest refine
    AHead,   // answer with the entity reached by the refined chain
    kNumActions
};

const char* action_name(std::size_t action);
inline bool is_query_action(std::size_t a) { return a < AQEnt; }

struct RolloutConfig {
    std::size_t t_max = 5;
    std::size_t k = 3;
    bool long_query = true;
    bool greedy = false;
};

// State key (hop depth, chain progress, searches so far).
struct StateKey {
    int hops = 1;
    int progress = 0;
    std::size_t searches = 0;
};

std::size_t num_states(std::size_t t_max);
std::size_t state_index(const StateKey& key, std::size_t t_max);
StateKey state_key(std::size_t index, std::size_t t_max);
std::uint32_t available_actions(const StateKey& key, const RolloutConfig& cfg);

PolicyParams initial_policy(std::size_t t_max);
// Probability-one policies used as degenerate references.
PolicyParams constant_policy(std::size_t t_max, std::size_t action);
// Scripted correct query chain followed by the correct answer.
PolicyParams oracle_policy(std::size_t t_max);

struct ActionRecord {
    std::size_t state = 0;
    std::size_t action = 0;
    std::uint32_t mask = 0;
    std::vector<std::size_t> positions;  // token positions emitted by this action
    double old_logprob = 0.0;            // frozen at sampling time
};

constexpr int kDeterministicToken = -1;  // think / refine: log-prob 0 under every policy
constexpr int kEnvironmentToken = -2;    // documents

struct Rollout {
    std::size_t question = 0;
    Trajectory trajectory;
    std::vector<ActionRecord> actions;
    std::vector<int> token_action;  // per token: action index or one of the markers above
    std::vector<std::size_t> step_actions;  // action record index of each search step
    int progress = 0;                       // hops resolved when the rollout ended
};

Rollout run_rollout(const PolicyParams& params, const Question& question, const World& world,
                    const RolloutConfig& cfg, std::uint64_t seed);

struct GroupBatch {
    std::size_t question = 0;
    std::vector<Tokens> aliases;
    std::vector<Rollout> rollouts;
    bool degenerate() const { return rollouts.size() < 2; }
};

GroupBatch sample_group(const PolicyParams& params, const Question& question, const World& world,
                        const RolloutConfig& cfg, std::size_t group_size, std::uint64_t seed);
// One explicit seed per slot.
GroupBatch sample_group(const PolicyParams& params, const Question& question, const World& world,
                        const RolloutConfig& cfg, const std::vector<std::uint64_t>& slot_seeds);

// Per-token share of the action log-prob; 0 for deterministic policy tokens.
double action_token_logprob(const PolicyParams& params, const Rollout& rollout, std::size_t position);

// Query tokens a template produces in a given situation.
Tokens query_template(std::size_t action, const Question& question, const World& world, std::size_t head,
                      int progress);
// Entity and relation tokens of a document, capped at 12.
Tokens refine_from(const World& world, const Tokens& doc);

}  // namespace igsearch
