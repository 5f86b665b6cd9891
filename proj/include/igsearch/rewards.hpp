#pragma once

#include "igsearch/trajectory.hpp"

#include <string_view>
#include <vector>

namespace igsearch {

// Lowercase, strip ASCII punctuation, drop the articles a/an/the.
Tokens normalize_answer(std::string_view text);

// Bag-of-tokens F1 against the best alias.
double f1_reward(std::string_view prediction, const std::vector<Tokens>& aliases);
// 1 iff the normalized prediction equals a normalized alias.
double exact_match(std::string_view prediction, const std::vector<Tokens>& aliases);
// 1 iff some normalized alias is a contiguous run inside a single refine block.
double retrieval_reward(const Trajectory& trajectory, const std::vector<Tokens>& aliases);

struct RewardBreakdown {
    double f1 = 0.0;
    double ret = 0.0;
    double total = 0.0;  // f1 + w_ret * ret
};

// Predicted answer text; empty when the trajectory never answered.
std::string prediction_of(const Trajectory& trajectory);
RewardBreakdown trajectory_reward(const Trajectory& trajectory, const std::vector<Tokens>& aliases,
                                  double w_ret = 1.0);

}  // namespace igsearch
