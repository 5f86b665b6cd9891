#pragma once

#include "igsearch/ig.hpp"
#include "igsearch/rollout.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace igsearch {

// Population-std group normalization; all zeros when std < 1e-6.
std::vector<double> group_advantages(const std::vector<double>& rewards);

enum class ModulationScope { QueryOnly, ThinkPlusQuery, AllTokens };

const char* to_string(ModulationScope scope);
ModulationScope scope_from_string(const std::string& name);

struct AdvantageMap {
    double base = 0.0;
    ModulationScope scope = ModulationScope::QueryOnly;
    std::vector<double> values;       // per token position; documents positions hold 0
    std::vector<double> step_totals;  // modulation added on behalf of each step
};

struct ModulationParams {
    double alpha = 0.3;
    ModulationScope scope = ModulationScope::QueryOnly;
    bool length_norm = true;
};

// Adds alpha * IG~_t to the tokens of each step's scope. With length
// normalization the amount is divided by the scope size, so every step
// contributes alpha * IG~_t in total.
AdvantageMap modulate(double base, const std::vector<IGRecord>& records, const Trajectory& trajectory,
                      const ModulationParams& params);

struct SurrogateParams {
    double epsilon = 0.2;
    double beta = 0.001;
};

struct UpdateStats {
    double grad_norm = 0.0;
    double query_grad_norm = 0.0;  // norm restricted to query-action logits
    double mean_kl = 0.0;
    double clip_fraction = 0.0;
    double loss = 0.0;  // token mean
    std::size_t policy_tokens = 0;
};

struct SurrogateBatch {
    std::vector<const Rollout*> rollouts;
    std::vector<const AdvantageMap*> advantages;
};

// Token-mean clipped surrogate plus beta * KL(pi || pi_ref) over every policy
// token; environment tokens are excluded.
double surrogate_loss(const PolicyParams& params, const PolicyParams& reference, const SurrogateBatch& batch,
                      const SurrogateParams& sp);

struct SurrogateGradient {
    std::vector<double> grad;  // layout of PolicyParams::raw()
    UpdateStats stats;
};

SurrogateGradient surrogate_gradient(const PolicyParams& params, const PolicyParams& reference,
                                     const SurrogateBatch& batch, const SurrogateParams& sp);

// One gradient step with rate lr. Throws NonFiniteGradient and leaves params
// untouched when the gradient or the updated parameters are not finite.
UpdateStats surrogate_update(PolicyParams& params, const PolicyParams& reference, const SurrogateBatch& batch,
                             const SurrogateParams& sp, double lr);

}  // namespace igsearch
