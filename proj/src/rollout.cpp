#include "igsearch/rollout.hpp"

#include "igsearch/errors.hpp"
#include "igsearch/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace igsearch {

std::vector<double> PolicyParams::probs(std::size_t state, std::uint32_t mask) const {
    std::vector<double> p(actions_, 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < actions_; ++a)
        if (mask >> a & 1u) mx = std::max(mx, logit(state, a));
    double z = 0.0;
    for (std::size_t a = 0; a < actions_; ++a)
        if (mask >> a & 1u) z += (p[a] = std::exp(logit(state, a) - mx));
    for (auto& v : p) v /= z;
    return p;
}

double PolicyParams::logprob(std::size_t state, std::size_t action, std::uint32_t mask) const {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < actions_; ++a)
        if (mask >> a & 1u) mx = std::max(mx, logit(state, a));
    double z = 0.0;
    for (std::size_t a = 0; a < actions_; ++a)
        if (mask >> a & 1u) z += std::exp(logit(state, a) - mx);
    return logit(state, action) - mx - std::log(z);
}

const char* action_name(std::size_t action) {
    static const char* names[] = {"q_vague_1", "q_vague_2", "q_long", "q_bigram_1", "q_bigram_2",
                                  "q_bigram_3", "q_chain",  "a_qent", "a_first",    "a_head"};
    return action < kNumActions ? names[action] : "?";
}

std::size_t num_states(std::size_t t_max) { return 9 * (t_max + 1); }

std::size_t state_index(const StateKey& key, std::size_t t_max) {
    std::size_t base = 0;
    for (int h = 1; h < key.hops; ++h) base += static_cast<std::size_t>(h + 1) * (t_max + 1);
    return base + static_cast<std::size_t>(key.progress) * (t_max + 1) + key.searches;
}

StateKey state_key(std::size_t index, std::size_t t_max) {
    for (int h = 1; h <= kMaxHops; ++h) {
        const std::size_t block = static_cast<std::size_t>(h + 1) * (t_max + 1);
        if (index < block)
            return StateKey{h, static_cast<int>(index / (t_max + 1)), index % (t_max + 1)};
        index -= block;
    }
    throw std::out_of_range("state index out of range");
}

std::uint32_t available_actions(const StateKey& key, const RolloutConfig& cfg) {
    std::uint32_t mask = (1u << AQEnt) | (1u << AFirst) | (1u << AHead);
    if (key.searches >= cfg.t_max) return mask;
    mask |= (1u << QVague1) | (1u << QVague2);
    if (cfg.long_query && key.progress < key.hops) mask |= 1u << QLong;
    for (int j = 1; j <= key.hops; ++j) mask |= 1u << (QBigram1 + static_cast<std::size_t>(j - 1));
    if (key.progress >= 1 && key.progress < key.hops) mask |= 1u << QChain;
    return mask;
}

PolicyParams initial_policy(std::size_t t_max) { return PolicyParams(num_states(t_max), kNumActions); }

PolicyParams constant_policy(std::size_t t_max, std::size_t action) {
    PolicyParams p = initial_policy(t_max);
    for (std::size_t s = 0; s < p.states(); ++s) p.logit(s, action) = 1000.0;
    return p;
}

PolicyParams oracle_policy(std::size_t t_max) {
    PolicyParams p = initial_policy(t_max);
    for (std::size_t s = 0; s < p.states(); ++s) {
        const StateKey k = state_key(s, t_max);
        std::size_t a = AHead;
        if (k.progress < k.hops) a = k.progress == 0 ? QBigram1 : QChain;
        p.logit(s, a) = 1000.0;
    }
    return p;
}

Tokens query_template(std::size_t action, const Question& q, const World& world, std::size_t head, int progress) {
    auto entity_relation = [&](const Tokens& name, const std::string& rel) {
        Tokens t = name;
        t.push_back(rel);
        return t;
    };
    const std::string& next = q.relations[std::min<std::size_t>(static_cast<std::size_t>(progress), q.relations.size() - 1)];
    switch (action) {
        case QVague1: return {"best", "facts"};
        case QVague2: return {"information", "about", "things"};
        case QLong: {
            Tokens t = entity_relation(world.name(head), next);
            t.insert(t.end(), filler_words().begin(), filler_words().end());
            return t;
        }
        case QBigram1:
        case QBigram2:
        case QBigram3: return entity_relation(world.name(q.subject), q.relations.at(action - QBigram1));
        case QChain: return entity_relation(world.name(head), next);
        default: throw std::invalid_argument("not a query action");
    }
}

Tokens refine_from(const World& world, const Tokens& doc) {
    Tokens out;
    for (const auto& t : doc) {
        if (out.size() >= 12) break;
        if (world.is_entity_token(t) || world.is_relation_token(t)) out.push_back(t);
    }
    return out;
}

namespace {

std::size_t choose(const PolicyParams& params, std::size_t state, std::uint32_t mask, bool greedy, Rng& rng) {
    const auto p = params.probs(state, mask);
    if (greedy) {
        std::size_t best = kNumActions;
        for (std::size_t a = 0; a < p.size(); ++a)
            if ((mask >> a & 1u) && (best == kNumActions || p[a] > p[best])) best = a;
        return best;
    }
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        if (!(mask >> a & 1u)) continue;
        last = a;
        acc += p[a];
        if (u < acc) return a;
    }
    return last;
}

Tokens first_name_in(const World& world, const Tokens& refine) {
    Tokens out;
    for (const auto& t : refine) {
        if (world.is_entity_token(t)) out.push_back(t);
        if (out.size() == 2) return out;
    }
    return {};
}

}  // namespace

Rollout run_rollout(const PolicyParams& params, const Question& question, const World& world,
                    const RolloutConfig& cfg, std::uint64_t seed) {
    if (cfg.t_max < 1) throw InvalidHyperparam("T_max must be >= 1");
    Rng rng(seed);
    Rollout r;
    r.question = question.id;
    TrajectoryBuilder builder;
    std::vector<int> owner;
    auto emit = [&](SegmentKind kind, const Tokens& tokens, int who) -> std::vector<std::size_t> {
        std::vector<std::size_t> pos;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            pos.push_back(owner.size());
            owner.push_back(who);
        }
        builder.add(kind, tokens);
        return pos;
    };

    StateKey key{question.hops, 0, 0};
    std::size_t head = question.subject;
    Tokens last_refine;
    while (true) {
        const std::size_t state = state_index(key, cfg.t_max);
        const std::uint32_t mask = available_actions(key, cfg);
        const std::size_t action = choose(params, state, mask, cfg.greedy, rng);
        ActionRecord rec{state, action, mask, {}, params.logprob(state, action, mask)};
        const int id = static_cast<int>(r.actions.size());

        if (is_query_action(action)) {
            const Tokens query = query_template(action, question, world, head, key.progress);
            emit(SegmentKind::Think, think_search_tokens(), kDeterministicToken);
            rec.positions = emit(SegmentKind::Search, query, id);
            const RetrievalResult res = retrieve(world, query, cfg.k);
            std::vector<Tokens> docs;
            for (auto d : res.docs) docs.push_back(world.corpus[d].tokens);
            emit(SegmentKind::Documents, render_documents(docs), kEnvironmentToken);
            last_refine = docs.empty() ? Tokens{} : refine_from(world, docs.front());
            emit(SegmentKind::Refine, last_refine, kDeterministicToken);
            if (!res.docs.empty() && key.progress < key.hops) {
                const auto& top = world.corpus[res.docs.front()];
                if (top.fact) {
                    const Fact& f = world.facts[*top.fact];
                    if (f.subject == head && f.relation == question.relations[static_cast<std::size_t>(key.progress)]) {
                        ++key.progress;
                        head = f.object;
                    }
                }
            }
            ++key.searches;
            r.step_actions.push_back(r.actions.size());
            r.actions.push_back(std::move(rec));
            continue;
        }

        Tokens answer;
        if (action == AQEnt) answer = world.name(question.subject);
        else if (action == AHead) answer = world.name(head);
        else {
            answer = first_name_in(world, last_refine);
            if (answer.empty()) answer = world.name(question.subject);
        }
        emit(SegmentKind::Think, think_answer_tokens(), kDeterministicToken);
        rec.positions = emit(SegmentKind::Answer, answer, id);
        r.actions.push_back(std::move(rec));
        break;
    }
    ParseOptions opts;
    opts.strict = true;
    opts.max_searches = cfg.t_max;
    r.trajectory = builder.build(opts);
    r.token_action = std::move(owner);
    r.progress = key.progress;
    return r;
}

GroupBatch sample_group(const PolicyParams& params, const Question& question, const World& world,
                        const RolloutConfig& cfg, const std::vector<std::uint64_t>& slot_seeds) {
    GroupBatch g;
    g.question = question.id;
    g.aliases = question.aliases;
    for (auto s : slot_seeds) g.rollouts.push_back(run_rollout(params, question, world, cfg, s));
    return g;
}

GroupBatch sample_group(const PolicyParams& params, const Question& question, const World& world,
                        const RolloutConfig& cfg, std::size_t group_size, std::uint64_t seed) {
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < group_size; ++i) seeds.push_back(derive_seed(seed, {i}));
    return sample_group(params, question, world, cfg, seeds);
}

double action_token_logprob(const PolicyParams& params, const Rollout& rollout, std::size_t position) {
    if (position >= rollout.token_action.size()) throw NotPolicyToken("position out of range");
    const int who = rollout.token_action[position];
    if (who == kEnvironmentToken) throw NotPolicyToken("position " + std::to_string(position) + " is a documents token");
    if (who == kDeterministicToken) return 0.0;
    const ActionRecord& a = rollout.actions[static_cast<std::size_t>(who)];
    return params.logprob(a.state, a.action, a.mask) / static_cast<double>(a.positions.size());
}

}  // namespace igsearch
