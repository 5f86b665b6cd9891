#include "igsearch/rewards.hpp"

#include "igsearch/errors.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace igsearch {

Tokens normalize_answer(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::ispunct(u)) continue;
        clean += u < 0x80 ? static_cast<char>(std::tolower(u)) : c;
    }
    Tokens out;
    for (auto& t : tokenize(clean))
        if (t != "a" && t != "an" && t != "the") out.push_back(std::move(t));
    return out;
}

namespace {

double token_f1(const Tokens& pred, const Tokens& gold) {
    if (pred.empty() || gold.empty()) return 0.0;
    std::map<Token, int> bag;
    for (const auto& t : gold) ++bag[t];
    int common = 0;
    for (const auto& t : pred) {
        auto it = bag.find(t);
        if (it != bag.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double p = static_cast<double>(common) / static_cast<double>(pred.size());
    const double r = static_cast<double>(common) / static_cast<double>(gold.size());
    return 2.0 * p * r / (p + r);
}

}  // namespace

double f1_reward(std::string_view prediction, const std::vector<Tokens>& aliases) {
    if (aliases.empty()) throw EmptyAnswer("no gold aliases");
    const Tokens pred = normalize_answer(prediction);
    double best = 0.0;
    for (const auto& a : aliases) best = std::max(best, token_f1(pred, normalize_answer(join(a))));
    return best;
}

double exact_match(std::string_view prediction, const std::vector<Tokens>& aliases) {
    if (aliases.empty()) throw EmptyAnswer("no gold aliases");
    const Tokens pred = normalize_answer(prediction);
    if (pred.empty()) return 0.0;
    for (const auto& a : aliases)
        if (pred == normalize_answer(join(a))) return 1.0;
    return 0.0;
}

double retrieval_reward(const Trajectory& trajectory, const std::vector<Tokens>& aliases) {
    std::vector<Tokens> golds;
    for (const auto& a : aliases) {
        Tokens g = normalize_answer(join(a));
        if (!g.empty()) golds.push_back(std::move(g));
    }
    for (const auto& step : trajectory.steps()) {
        const Tokens block = normalize_answer(join(step.refine));
        for (const auto& g : golds)
            if (std::search(block.begin(), block.end(), g.begin(), g.end()) != block.end()) return 1.0;
    }
    return 0.0;
}

std::string prediction_of(const Trajectory& trajectory) {
    return trajectory.answer() ? join(*trajectory.answer()) : std::string();
}

RewardBreakdown trajectory_reward(const Trajectory& trajectory, const std::vector<Tokens>& aliases, double w_ret) {
    RewardBreakdown r;
    r.f1 = f1_reward(prediction_of(trajectory), aliases);
    r.ret = retrieval_reward(trajectory, aliases);
    r.total = r.f1 + w_ret * r.ret;
    return r;
}

}  // namespace igsearch
