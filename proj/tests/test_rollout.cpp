#include <doctest.h>

#include "igsearch/errors.hpp"
#include "igsearch/random.hpp"
#include "igsearch/rewards.hpp"
#include "igsearch/rollout.hpp"

#include <cmath>

using namespace igsearch;

namespace {

const World& test_world() {
    static const World w = [] {
        WorldSpec s;
        s.train_counts = {10, 10, 10};
        s.eval_counts = {2, 2, 2};
        return generate_world(17, s);
    }();
    return w;
}

}  // namespace

TEST_CASE("answer-immediately policy never searches") {
    const World& w = test_world();
    const Rollout r = run_rollout(constant_policy(5, AQEnt), w.questions[0], w, {}, 1);
    CHECK(r.trajectory.steps().empty());
    REQUIRE(r.trajectory.answer());
    CHECK(*r.trajectory.answer() == w.name(w.questions[0].subject));
    REQUIRE(r.actions.size() == 1);
    CHECK(r.actions[0].old_logprob == 0.0);
}

TEST_CASE("always-search policy hits the budget and is forced to answer") {
    const World& w = test_world();
    RolloutConfig cfg;
    const Rollout r = run_rollout(constant_policy(5, QVague1), w.questions[3], w, cfg, 1);
    CHECK(r.trajectory.steps().size() == 5);
    CHECK(r.trajectory.answer().has_value());
    CHECK(r.actions.size() == 6);
    cfg.t_max = 2;
    const Rollout r2 = run_rollout(constant_policy(2, QVague1), w.questions[3], w, cfg, 1);
    CHECK(r2.trajectory.steps().size() == 2);
}

TEST_CASE("rollouts are deterministic under a fixed seed") {
    const World& w = test_world();
    const PolicyParams p = initial_policy(5);
    for (const auto& q : w.questions) {
        CHECK(serialize(run_rollout(p, q, w, {}, 42).trajectory) == serialize(run_rollout(p, q, w, {}, 42).trajectory));
    }
}

TEST_CASE("group sampling") {
    const World& w = test_world();
    const PolicyParams p = initial_policy(5);
    const GroupBatch g = sample_group(p, w.questions[25], w, {}, 5, 9);
    CHECK(g.rollouts.size() == 5);
    CHECK_FALSE(g.degenerate());
    CHECK(sample_group(p, w.questions[25], w, {}, 1, 9).degenerate());
    const GroupBatch same = sample_group(p, w.questions[25], w, {}, std::vector<std::uint64_t>(4, 77));
    for (const auto& r : same.rollouts) CHECK(serialize(r.trajectory) == serialize(same.rollouts[0].trajectory));
}

TEST_CASE("token log-prob is split uniformly over the action's tokens") {
    const World& w = test_world();
    PolicyParams p = initial_policy(5);
    Rng rng(3);
    for (auto& v : p.raw()) v = rng.uniform() * 4 - 2;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto& q = w.questions[seed % w.questions.size()];
        const Rollout r = run_rollout(p, q, w, {}, seed);
        REQUIRE(r.token_action.size() == r.trajectory.token_count());
        for (const auto& a : r.actions) {
            double sum = 0.0;
            for (auto pos : a.positions) sum += action_token_logprob(p, r, pos);
            REQUIRE(std::abs(sum - a.old_logprob) <= 1e-12);
        }
        for (std::size_t pos = 0; pos < r.token_action.size(); ++pos) {
            const TokenRole role = r.trajectory.token_roles()[pos];
            if (role == TokenRole::Documents) REQUIRE_THROWS_AS(action_token_logprob(p, r, pos), NotPolicyToken);
            if (role == TokenRole::Think || role == TokenRole::Refine) REQUIRE(action_token_logprob(p, r, pos) == 0.0);
        }
        // Query tokens of each step belong to that step's action.
        for (std::size_t t = 0; t < r.trajectory.steps().size(); ++t)
            REQUIRE(query_token_positions(r.trajectory, t) == r.actions[r.step_actions[t]].positions);
    }
}

TEST_CASE("uniform split arithmetic") {
    // Three query tokens from an action with log-prob -0.9, one answer token from -0.2.
    Rollout r;
    r.trajectory = TrajectoryBuilder()
                       .add(SegmentKind::Search, {"a", "b", "c"})
                       .add(SegmentKind::Documents, {"d"})
                       .add(SegmentKind::Refine, {})
                       .add(SegmentKind::Answer, {"x"})
                       .build();
    PolicyParams p(2, 2);
    // Logits chosen so that log softmax gives the target values.
    p.logit(0, 0) = std::log(std::exp(-0.9));
    p.logit(0, 1) = std::log(1 - std::exp(-0.9));
    p.logit(1, 0) = std::log(std::exp(-0.2));
    p.logit(1, 1) = std::log(1 - std::exp(-0.2));
    r.actions = {ActionRecord{0, 0, 3u, {0, 1, 2}, -0.9}, ActionRecord{1, 0, 3u, {4}, -0.2}};
    r.token_action = {0, 0, 0, kEnvironmentToken, 1};
    CHECK(action_token_logprob(p, r, 1) == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(action_token_logprob(p, r, 4) == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK_THROWS_AS(action_token_logprob(p, r, 3), NotPolicyToken);
}

TEST_CASE("property: masked probabilities sum to one") {
    Rng rng(5);
    PolicyParams p = initial_policy(5);
    for (auto& v : p.raw()) v = rng.uniform() * 40 - 20;
    for (std::size_t s = 0; s < p.states(); ++s) {
        for (bool lq : {true, false}) {
            RolloutConfig cfg;
            cfg.long_query = lq;
            const auto mask = available_actions(state_key(s, 5), cfg);
            const auto pr = p.probs(s, mask);
            double total = 0.0;
            for (std::size_t a = 0; a < pr.size(); ++a) {
                total += pr[a];
                if (!(mask >> a & 1u)) REQUIRE(pr[a] == 0.0);
                else REQUIRE(std::abs(std::exp(p.logprob(s, a, mask)) - pr[a]) <= 1e-12);
            }
            REQUIRE(std::abs(total - 1.0) <= 1e-9);
        }
    }
    for (std::size_t s = 0; s < num_states(5); ++s) CHECK(state_index(state_key(s, 5), 5) == s);
}

TEST_CASE("oracle policy answers every question") {
    const World& w = test_world();
    RolloutConfig cfg;
    cfg.greedy = true;
    const PolicyParams p = oracle_policy(5);
    for (const auto& q : w.questions) {
        const Rollout r = run_rollout(p, q, w, cfg, 0);
        CHECK(r.trajectory.steps().size() == static_cast<std::size_t>(q.hops));
        CHECK(exact_match(prediction_of(r.trajectory), q.aliases) == 1.0);
        CHECK(r.progress == q.hops);
    }
}

TEST_CASE("refine keeps entity and relation tokens, capped at 12") {
    const World& w = test_world();
    const Fact& f = w.facts[0];
    Tokens doc = {"the", f.relation, "of"};
    for (int i = 0; i < 8; ++i) doc.insert(doc.end(), w.name(f.subject).begin(), w.name(f.subject).end());
    const Tokens r = refine_from(w, doc);
    CHECK(r.size() == 12);
    CHECK(r[0] == f.relation);
}
