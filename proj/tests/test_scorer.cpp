#include <doctest.h>

#include "igsearch/errors.hpp"
#include "igsearch/random.hpp"
#include "igsearch/scorer.hpp"

#include <cmath>

using namespace igsearch;

namespace {

// Closed form of the copy model for one token, written out independently.
double copy_prob(double mu, double v, double count, double len) { return mu * (count + 1.0) / (len + v) + (1.0 - mu) / v; }

// Returns a fixed value per alias keyed by the alias's first token.
class FixedScorer final : public AnswerScorer {
public:
    AnswerLogProb answer_logprob(const ScoringContext&, const Tokens& answer) const override {
        if (answer.empty()) throw EmptyAnswer("empty");
        const double v = std::stod(answer[0]);
        return {v, {v}};
    }
};

Tokens random_tokens(Rng& rng, const Tokens& vocab, std::size_t n) {
    Tokens out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(vocab[rng.below(vocab.size())]);
    return out;
}

Tokens small_vocab(std::size_t v) {
    Tokens out;
    for (std::size_t i = 0; i < v; ++i) out.push_back("w" + std::to_string(i));
    return out;
}

}  // namespace

TEST_CASE("value is the mean of per-token log-probs") {
    const CopyScorer s({0.9, 50, kMaxContextTokens});
    const ScoringContext ctx{{"a", "b", "a", "c"}, Provenance::Real, 0};
    const auto lp = s.answer_logprob(ctx, {"a", "x"});
    REQUIRE(lp.per_token.size() == 2);
    CHECK(lp.per_token[0] == doctest::Approx(std::log(copy_prob(0.9, 50, 2, 4))).epsilon(1e-14));
    CHECK(lp.per_token[1] == doctest::Approx(std::log(copy_prob(0.9, 50, 0, 5))).epsilon(1e-14));
    CHECK(std::abs(lp.value - (lp.per_token[0] + lp.per_token[1]) / 2) <= 1e-12);
    CHECK(lp.value <= 0.0);

    const FixedScorer f;
    CHECK((f.answer_logprob(ctx, {"-1.0"}).value + f.answer_logprob(ctx, {"-2.0"}).value) / 2 == -1.5);
}

TEST_CASE("earlier gold tokens are teacher-forced into the context") {
    const CopyScorer s({0.9, 50, kMaxContextTokens});
    const ScoringContext ctx{{"q"}, Provenance::Real, 0};
    const auto lp = s.answer_logprob(ctx, {"a", "a"});
    CHECK(lp.per_token[1] == doctest::Approx(std::log(copy_prob(0.9, 50, 1, 2))).epsilon(1e-14));
}

TEST_CASE("answer evidence raises the score") {
    const CopyScorer s({0.9, 1000, kMaxContextTokens});
    Tokens with(95, "filler"), without(100, "filler");
    for (int i = 0; i < 5; ++i) with.push_back("Paris");
    const double a = s.answer_logprob({with}, {"Paris"}).value;
    const double b = s.answer_logprob({without}, {"Paris"}).value;
    CHECK(a > b);
    CHECK(a == doctest::Approx(std::log(copy_prob(0.9, 1000, 5, 100))));
    CHECK(b == doctest::Approx(std::log(copy_prob(0.9, 1000, 0, 100))));
    CHECK_THROWS_AS(s.answer_logprob({without}, {}), EmptyAnswer);
}

TEST_CASE("alias averaging") {
    const FixedScorer f;
    const ScoringContext ctx{{"x"}};
    CHECK(f.alias_logprob(ctx, {{"-0.7"}}) == f.answer_logprob(ctx, {"-0.7"}).value);
    CHECK(f.alias_logprob(ctx, {{"-1.0"}, {"-3.0"}}) == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK_THROWS_AS(f.alias_logprob(ctx, {{"-1"}, {"-1"}, {"-1"}, {"-1"}}), TooManyAliases);
    CHECK_THROWS_AS(f.alias_logprob(ctx, {}), EmptyAnswer);
    CHECK_THROWS_AS(f.alias_logprob(ctx, {Tokens{}}), EmptyAnswer);
}

TEST_CASE("batched scoring equals independent calls") {
    const CopyScorer s({0.9, 200, kMaxContextTokens});
    const Tokens vocab = small_vocab(200);
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = rng.below(6);
        std::vector<ScoringContext> ctxs;
        for (std::size_t j = 0; j <= n; ++j)
            ctxs.push_back({random_tokens(rng, vocab, 1 + rng.below(300)), j ? Provenance::Counterfactual : Provenance::Real, j});
        std::vector<Tokens> aliases;
        for (std::size_t a = 0, na = 1 + rng.below(3); a < na; ++a) aliases.push_back(random_tokens(rng, vocab, 1 + rng.below(3)));
        const auto before = s.batched_calls();
        const auto batch = s.score_variants(ctxs, aliases);
        CHECK(s.batched_calls() == before + 1);
        REQUIRE(batch.size() == n + 1);
        for (std::size_t j = 0; j <= n; ++j) REQUIRE(std::abs(batch[j] - s.alias_logprob(ctxs[j], aliases)) <= 1e-12);
    }
}

TEST_CASE("oversized context is reported with its index") {
    const CopyScorer s({0.9, 10, kMaxContextTokens});
    std::vector<ScoringContext> ctxs(3, ScoringContext{{"a"}});
    ctxs[2].tokens.assign(kMaxContextTokens + 1, "a");
    try {
        s.score_variants(ctxs, {{"a"}});
        FAIL("expected ContextTooLong");
    } catch (const ContextTooLong& e) {
        CHECK(e.index() == 2);
    }
    ctxs[2].tokens.assign(kMaxContextTokens, "a");
    CHECK(s.score_variants(ctxs, {{"a"}}).size() == 3);
}

TEST_CASE("property: copy distribution is normalized over the vocabulary") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t v = 2 + rng.below(30);
        const double mu = rng.uniform();
        const CopyScorer s({mu, v, kMaxContextTokens});
        const Tokens vocab = small_vocab(v);
        const Tokens ctx = random_tokens(rng, vocab, rng.below(40));
        const Tokens prefix = random_tokens(rng, vocab, rng.below(3));
        double total = 0.0;
        for (const auto& w : vocab) {
            Tokens answer = prefix;
            answer.push_back(w);
            total += std::exp(s.answer_logprob({ctx}, answer).per_token.back());
        }
        REQUIRE(std::abs(total - 1.0) <= 1e-9);
    }
}

TEST_CASE("property: adding an answer occurrence strictly increases the score") {
    Rng rng(9);
    const Tokens vocab = small_vocab(60);
    for (int trial = 0; trial < 500; ++trial) {
        const CopyScorer s({0.05 + 0.95 * rng.uniform(), 60 + rng.below(500), kMaxContextTokens});
        Tokens ctx = random_tokens(rng, vocab, rng.below(80));
        const Tokens answer = random_tokens(rng, vocab, 1 + rng.below(3));
        const double before = s.answer_logprob({ctx}, answer).value;
        ctx.insert(ctx.begin() + static_cast<std::ptrdiff_t>(rng.below(ctx.size() + 1)), answer[rng.below(answer.size())]);
        REQUIRE(s.answer_logprob({ctx}, answer).value > before);
    }
}

TEST_CASE("oracle table scorer") {
    OracleTableScorer s;
    s.set({"real"}, -2.07);
    CHECK(s.alias_logprob({{"real"}}, {{"x"}}) == -2.07);
    CHECK_THROWS_AS(s.alias_logprob({{"other"}}, {{"x"}}), ScorerLookup);
}
