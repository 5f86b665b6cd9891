#include "igsearch/grpo.hpp"

#include "igsearch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace igsearch {

std::vector<double> group_advantages(const std::vector<double>& rewards) {
    const std::size_t g = rewards.size();
    std::vector<double> out(g, 0.0);
    if (g == 0) return out;
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(g);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / static_cast<double>(g));
    if (!(sd >= 1e-6)) return out;
    for (std::size_t i = 0; i < g; ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

const char* to_string(ModulationScope scope) {
    switch (scope) {
        case ModulationScope::QueryOnly: return "query";
        case ModulationScope::ThinkPlusQuery: return "think_query";
        case ModulationScope::AllTokens: return "all";
    }
    return "?";
}

ModulationScope scope_from_string(const std::string& name) {
    for (auto s : {ModulationScope::QueryOnly, ModulationScope::ThinkPlusQuery, ModulationScope::AllTokens})
        if (name == to_string(s)) return s;
    throw ConfigInvalid("unknown modulation scope '" + name + "'");
}

AdvantageMap modulate(double base, const std::vector<IGRecord>& records, const Trajectory& trajectory,
                      const ModulationParams& params) {
    const auto& steps = trajectory.steps();
    if (records.size() != steps.size())
        throw MisalignedRecords(std::to_string(records.size()) + " records for " + std::to_string(steps.size()) +
                                " search steps");
    for (std::size_t t = 0; t < records.size(); ++t)
        if (records[t].step != t) throw MisalignedRecords("record " + std::to_string(t) + " is for step " +
                                                          std::to_string(records[t].step));

    AdvantageMap m;
    m.base = base;
    m.scope = params.scope;
    const auto& roles = trajectory.token_roles();
    m.values.assign(roles.size(), 0.0);
    for (std::size_t p = 0; p < roles.size(); ++p)
        if (is_policy_role(roles[p])) m.values[p] = base;
    m.step_totals.assign(steps.size(), 0.0);

    auto spread = [&](const std::vector<std::size_t>& positions, double amount) {
        if (positions.empty()) return 0.0;
        const double each = params.length_norm ? amount / static_cast<double>(positions.size()) : amount;
        for (auto p : positions) m.values[p] += each;
        return each * static_cast<double>(positions.size());
    };

    switch (params.scope) {
        case ModulationScope::QueryOnly:
            for (std::size_t t = 0; t < steps.size(); ++t)
                m.step_totals[t] = spread(query_token_positions(trajectory, t), params.alpha * records[t].after_clip);
            break;
        case ModulationScope::ThinkPlusQuery:
            for (std::size_t t = 0; t < steps.size(); ++t) {
                std::set<std::size_t> uni;
                for (auto seg : trajectory.think_segments_of_step(t)) {
                    const std::size_t off = trajectory.segment_offset(seg);
                    for (std::size_t i = 0; i < trajectory.segments()[seg].tokens.size(); ++i) uni.insert(off + i);
                }
                for (auto p : query_token_positions(trajectory, t)) uni.insert(p);
                m.step_totals[t] = spread(std::vector<std::size_t>(uni.begin(), uni.end()), params.alpha * records[t].after_clip);
            }
            break;
        case ModulationScope::AllTokens: {
            std::vector<std::size_t> all;
            for (std::size_t p = 0; p < roles.size(); ++p)
                if (is_policy_role(roles[p])) all.push_back(p);
            double total = 0.0;
            for (const auto& r : records) total += params.alpha * r.after_clip;
            spread(all, total);
            for (std::size_t t = 0; t < steps.size(); ++t) m.step_totals[t] = params.alpha * records[t].after_clip;
            break;
        }
    }
    return m;
}

namespace {

// Per-record quantities shared by the loss and the gradient.
struct RecordEval {
    std::vector<double> probs;
    double logprob = 0.0;
    double kl = 0.0;
    std::vector<double> log_ratio_ref;  // log pi - log pi_ref per action in mask
};

RecordEval evaluate(const PolicyParams& params, const PolicyParams& reference, const ActionRecord& rec) {
    RecordEval e;
    e.probs = params.probs(rec.state, rec.mask);
    e.logprob = params.logprob(rec.state, rec.action, rec.mask);
    e.log_ratio_ref.assign(params.actions(), 0.0);
    for (std::size_t b = 0; b < params.actions(); ++b) {
        if (!(rec.mask >> b & 1u)) continue;
        const double d = params.logprob(rec.state, b, rec.mask) - reference.logprob(rec.state, b, rec.mask);
        e.log_ratio_ref[b] = d;
        e.kl += e.probs[b] * d;
    }
    return e;
}

void check_batch(const SurrogateBatch& batch) {
    if (batch.rollouts.size() != batch.advantages.size())
        throw MisalignedRecords("advantage maps do not match rollouts");
    for (std::size_t i = 0; i < batch.rollouts.size(); ++i)
        if (batch.advantages[i]->values.size() != batch.rollouts[i]->token_action.size())
            throw MisalignedRecords("advantage map length differs from trajectory length");
}

}  // namespace

double surrogate_loss(const PolicyParams& params, const PolicyParams& reference, const SurrogateBatch& batch,
                      const SurrogateParams& sp) {
    check_batch(batch);
    double total = 0.0;
    std::size_t tokens = 0;
    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
        const Rollout& r = *batch.rollouts[i];
        const auto& adv = batch.advantages[i]->values;
        std::vector<RecordEval> evals;
        for (const auto& rec : r.actions) evals.push_back(evaluate(params, reference, rec));
        for (std::size_t p = 0; p < r.token_action.size(); ++p) {
            const int who = r.token_action[p];
            if (who == kEnvironmentToken) continue;
            ++tokens;
            if (who == kDeterministicToken) {
                total -= adv[p];
                continue;
            }
            const ActionRecord& rec = r.actions[static_cast<std::size_t>(who)];
            const RecordEval& e = evals[static_cast<std::size_t>(who)];
            const double n = static_cast<double>(rec.positions.size());
            const double ratio = std::exp((e.logprob - rec.old_logprob) / n);
            const double clipped = std::clamp(ratio, 1.0 - sp.epsilon, 1.0 + sp.epsilon);
            total += -std::min(ratio * adv[p], clipped * adv[p]) + sp.beta * e.kl / n;
        }
    }
    return tokens ? total / static_cast<double>(tokens) : 0.0;
}

SurrogateGradient surrogate_gradient(const PolicyParams& params, const PolicyParams& reference,
                                     const SurrogateBatch& batch, const SurrogateParams& sp) {
    check_batch(batch);
    SurrogateGradient out;
    out.grad.assign(params.raw().size(), 0.0);
    std::vector<bool> query_row(params.states(), false);
    double loss = 0.0, kl_sum = 0.0;
    std::size_t tokens = 0, action_tokens = 0, clipped_tokens = 0;

    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
        const Rollout& r = *batch.rollouts[i];
        const auto& adv = batch.advantages[i]->values;
        const auto& roles = r.trajectory.token_roles();
        for (std::size_t p = 0; p < r.token_action.size(); ++p) {
            if (r.token_action[p] == kEnvironmentToken) continue;
            ++tokens;
            if (r.token_action[p] == kDeterministicToken) loss -= adv[p];
        }
        for (const auto& rec : r.actions) {
            const RecordEval e = evaluate(params, reference, rec);
            const double n = static_cast<double>(rec.positions.size());
            double coef = 0.0;  // d loss / d log pi(a|s), before the 1/T factor
            for (auto p : rec.positions) {
                const double ratio = std::exp((e.logprob - rec.old_logprob) / n);
                const double clipped = std::clamp(ratio, 1.0 - sp.epsilon, 1.0 + sp.epsilon);
                const double a = adv[p];
                ++action_tokens;
                loss += -std::min(ratio * a, clipped * a) + sp.beta * e.kl / n;
                kl_sum += e.kl / n;
                if (!(ratio * a > clipped * a)) coef += -a * ratio / n;
                else ++clipped_tokens;
            }
            if (!rec.positions.empty() && rec.positions.front() < roles.size() &&
                roles[rec.positions.front()] == TokenRole::Query)
                query_row[rec.state] = true;
            const std::size_t row = rec.state * params.actions();
            for (std::size_t b = 0; b < params.actions(); ++b) {
                if (!(rec.mask >> b & 1u)) continue;
                const double dlogp = (b == rec.action ? 1.0 : 0.0) - e.probs[b];
                const double dkl = e.probs[b] * (e.log_ratio_ref[b] - e.kl);
                out.grad[row + b] += coef * dlogp + (rec.positions.empty() ? 0.0 : sp.beta * dkl);
            }
        }
    }
    const double scale = tokens ? 1.0 / static_cast<double>(tokens) : 0.0;
    double sq = 0.0, qsq = 0.0;
    for (std::size_t j = 0; j < out.grad.size(); ++j) {
        out.grad[j] *= scale;
        sq += out.grad[j] * out.grad[j];
        if (query_row[j / params.actions()]) qsq += out.grad[j] * out.grad[j];
    }
    out.stats.grad_norm = std::sqrt(sq);
    out.stats.query_grad_norm = std::sqrt(qsq);
    out.stats.loss = loss * scale;
    out.stats.mean_kl = action_tokens ? kl_sum / static_cast<double>(action_tokens) : 0.0;
    out.stats.clip_fraction = action_tokens ? static_cast<double>(clipped_tokens) / static_cast<double>(action_tokens) : 0.0;
    out.stats.policy_tokens = tokens;
    return out;
}

UpdateStats surrogate_update(PolicyParams& params, const PolicyParams& reference, const SurrogateBatch& batch,
                             const SurrogateParams& sp, double lr) {
    const SurrogateGradient g = surrogate_gradient(params, reference, batch, sp);
    for (double v : g.grad)
        if (!std::isfinite(v)) throw NonFiniteGradient("surrogate gradient has a non-finite entry");
    std::vector<double> next = params.raw();
    for (std::size_t j = 0; j < next.size(); ++j) {
        next[j] -= lr * g.grad[j];
        if (!std::isfinite(next[j])) throw NonFiniteGradient("update step overflows the parameters");
    }
    params.raw() = std::move(next);
    return g.stats;
}

}  // namespace igsearch
