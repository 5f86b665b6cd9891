// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "grpo_fixtures.hpp"
#include "igsearch/errors.hpp"
#include "igsearch/scorer.hpp"
#include "igsearch/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace igsearch;
using igsearch::testing::record;
using igsearch::testing::toy_rollout;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Outcome& o) {
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
}

void run(int id, const char* name, const std::function<Outcome()>& body) {
    try {
        report(id, name, body());
    } catch (const std::exception& e) {
        report(id, name, {false, std::string("exception: ") + e.what()});
    }
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Transcript with one search step whose query has n tokens.
Trajectory with_query(std::size_t n) {
    Tokens q;
    for (std::size_t i = 0; i < n; ++i) q.push_back("q" + std::to_string(i));
    return TrajectoryBuilder()
        .add(SegmentKind::Think, {"a", "b"})
        .add(SegmentKind::Search, q)
        .add(SegmentKind::Documents, {"d", "e"})
        .add(SegmentKind::Refine, {"r"})
        .add(SegmentKind::Answer, {"x"})
        .build();
}

SurrogateBatch batch_of(const std::vector<Rollout>& rs, const std::vector<AdvantageMap>& ms) {
    SurrogateBatch b;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        b.rollouts.push_back(&rs[i]);
        b.advantages.push_back(&ms[i]);
    }
    return b;
}

Outcome stabilization() {
    const StabilizeParams p{0.5, 0.1, 3.0, true, true};
    const double a = stabilize(0.13, p).after_clip, b = stabilize(-0.24, p).after_clip, c = stabilize(1.72, p).after_clip;
    const double d = stabilize(5.0, p).after_clip;
    const double expected = 3.0 + std::log(3.0);  // eta + ln(1 + (5 - eta))
    Outcome o;
    o.pass = a == 0.0 && b == 0.0 && std::abs(c - 1.72) <= 1e-12 && std::abs(d - expected) <= 1e-9;
    o.detail = "0.13->" + fmt("%g", a) + ", -0.24->" + fmt("%g", b) + ", 1.72->" + fmt("%g", c) + ", 5->" +
               fmt("%.12f", d) + " (want " + fmt("%.12f", expected) + ")";
    return o;
}

Outcome raw_ig() {
    OracleTableScorer s;
    s.set({"real1"}, -2.07);
    s.set({"cf1a"}, -3.50);
    s.set({"cf1b"}, -3.60);
    s.set({"cf1c"}, -3.67);  // counterfactual mean -3.59
    s.set({"real2"}, -0.41);
    s.set({"cf2"}, -1.15);
    const std::vector<Tokens> aliases = {{"x"}};
    const double a = compute_raw_ig(s, {{"real1"}}, {{{"cf1a"}}, {{"cf1b"}}, {{"cf1c"}}}, aliases).ig;
    const double b = compute_raw_ig(s, {{"real2"}}, {{{"cf2"}}, {{"cf2"}}, {{"cf2"}}}, aliases).ig;
    return {std::abs(a - 1.52) <= 1e-9 && std::abs(b - 0.74) <= 1e-9,
            "step 0 " + fmt("%.12f", a) + ", step 1 " + fmt("%.12f", b)};
}

Outcome advantages() {
    const auto a = group_advantages({1, 0, 0, 0, 0});
    bool ok = std::abs(a[0] - 2.0) <= 1e-9;
    for (int i = 1; i < 5; ++i) ok = ok && std::abs(a[i] + 0.5) <= 1e-9;
    bool zeros = true;
    for (const auto& r : {std::vector<double>{0, 0, 0, 0, 0}, {1, 1, 1, 1, 1}, {0.37, 0.37, 0.37}})
        for (double v : group_advantages(r)) zeros = zeros && v == 0.0;
    return {ok && zeros, "{1,0,0,0,0} -> {" + fmt("%g", a[0]) + ", " + fmt("%g", a[1]) + " x4}, equal rewards -> " +
                             (zeros ? "exact zeros" : "nonzero")};
}

Outcome length_invariance() {
    Rng rng(derive_seed(2024, {4}));
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + rng.below(32);
        const double ig = stabilize((rng.uniform() - 0.3) * 10, {}).after_clip;
        const double base = rng.uniform() * 4 - 2, alpha = rng.uniform();
        const Trajectory t = with_query(n);
        const auto m = modulate(base, {record(0, ig)}, t, {alpha, ModulationScope::QueryOnly, true});
        double sum = 0.0;
        for (auto p : query_token_positions(t, 0)) sum += m.values[p] - base;
        worst = std::max(worst, std::abs(sum - alpha * ig));
    }
    return {worst <= 1e-9, "1000 cases, max |sum - alpha*IG~| = " + fmt("%.3e", worst)};
}

Outcome all_failure_signal() {
    Rng rng(derive_seed(2024, {5}));
    const PolicyParams policy(4, 5);
    std::vector<Rollout> group;
    for (int i = 0; i < 5; ++i) group.push_back(toy_rollout(policy, rng, 2, 3, false));
    const auto adv = group_advantages({0, 0, 0, 0, 0});
    // Step 0 carries IG~ = 0.8, step 1 sits in the dead zone.
    const std::vector<IGRecord> recs = {record(0, stabilize(0.8, {}).after_clip), record(1, stabilize(0.2, {}).after_clip)};
    auto norm_with = [&](double alpha) {
        std::vector<AdvantageMap> maps;
        for (std::size_t i = 0; i < group.size(); ++i)
            maps.push_back(modulate(adv[i], recs, group[i].trajectory, {alpha, ModulationScope::QueryOnly, true}));
        return surrogate_gradient(policy, policy, batch_of(group, maps), {0.2, 0.001}).stats.query_grad_norm;
    };
    const double on = norm_with(0.3), off = norm_with(0.0);
    return {on > 1e-4 && off <= 1e-9, "query-logit grad norm " + fmt("%.3e", on) + " with alpha=0.3, " +
                                          fmt("%.3e", off) + " with alpha=0"};
}

Outcome gradient_check() {
    Rng rng(derive_seed(2024, {6}));
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        PolicyParams ref(3, 4), p(3, 4);
        for (auto& v : ref.raw()) v = rng.uniform() * 2 - 1;
        for (std::size_t j = 0; j < p.raw().size(); ++j) p.raw()[j] = ref.raw()[j] + (rng.uniform() - 0.5);
        std::vector<Rollout> rs;
        std::vector<AdvantageMap> ms;
        for (int i = 0; i < 4; ++i) {
            rs.push_back(toy_rollout(p, rng, 1 + rng.below(3), 1 + rng.below(4), true));
            AdvantageMap m;
            for (std::size_t k = 0; k < rs.back().token_action.size(); ++k) m.values.push_back(rng.uniform() * 4 - 2);
            ms.push_back(m);
        }
        const SurrogateBatch b = batch_of(rs, ms);
        const SurrogateParams sp{0.2, 0.05};
        const auto g = surrogate_gradient(p, ref, b, sp);
        double diff = 0.0, scale = 0.0;
        const double h = 1e-6;
        for (std::size_t j = 0; j < p.raw().size(); ++j) {
            PolicyParams up = p, dn = p;
            up.raw()[j] += h;
            dn.raw()[j] -= h;
            const double fd = (surrogate_loss(up, ref, b, sp) - surrogate_loss(dn, ref, b, sp)) / (2 * h);
            diff += (fd - g.grad[j]) * (fd - g.grad[j]);
            scale += fd * fd;
        }
        worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(scale), 1e-12));
    }
    return {worst <= 1e-5, "20 random 3x4 policies, max relative error " + fmt("%.3e", worst)};
}

Outcome batched_scoring() {
    const CopyScorer s({0.9, 200, kMaxContextTokens});
    Tokens vocab;
    for (int i = 0; i < 200; ++i) vocab.push_back("w" + std::to_string(i));
    auto pick = [&](Rng& rng, std::size_t n) {
        Tokens out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(vocab[rng.below(vocab.size())]);
        return out;
    };
    Rng rng(derive_seed(2024, {7}));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(5);
        std::vector<ScoringContext> ctxs;
        for (std::size_t j = 0; j <= n; ++j)
            ctxs.push_back({pick(rng, 1 + rng.below(400)), j ? Provenance::Counterfactual : Provenance::Real, j});
        std::vector<Tokens> aliases;
        for (std::size_t a = 0, na = 1 + rng.below(3); a < na; ++a) aliases.push_back(pick(rng, 1 + rng.below(3)));
        const auto batch = s.score_variants(ctxs, aliases);
        if (batch.size() != n + 1) return {false, "batch size mismatch"};
        for (std::size_t j = 0; j <= n; ++j) worst = std::max(worst, std::abs(batch[j] - s.alias_logprob(ctxs[j], aliases)));
    }
    return {worst <= 1e-12, "100 cases, max difference " + fmt("%.3e", worst)};
}

std::string random_transcript(Rng& rng) {
    static const char* words[] = {"alpha", "Beta", "of", "x", "caf\xc3\xa9", "[1]", "42", "the", "?", "a.b", "Zo\xc3\xab"};
    static const char* spaces[] = {"", " ", "  ", "\n", "\t", " \n "};
    auto ws = [&] { return std::string(spaces[rng.below(6)]); };
    auto content = [&](bool nonempty) {
        std::string s = ws();
        const std::size_t n = rng.below(6) + (nonempty ? 1 : 0);
        for (std::size_t i = 0; i < n; ++i) s += std::string(words[rng.below(11)]) + (i + 1 < n ? " " : "");
        return s + ws();
    };
    std::string out = ws();
    for (std::size_t t = 0, steps = rng.below(6); t < steps; ++t) {
        if (rng.bernoulli(0.5)) out += "<think>" + content(false) + "</think>" + ws();
        out += "<search>" + content(true) + "</search>" + ws();
        out += "<documents>" + content(false) + "</documents>" + ws();
        if (rng.bernoulli(0.3)) out += "<think>" + content(false) + "</think>" + ws();
        out += "<refine>" + content(false) + "</refine>" + ws();
    }
    if (rng.bernoulli(0.8)) out += "<answer>" + content(false) + "</answer>" + ws();
    return out;
}

Outcome parser_fuzz() {
    Rng rng(derive_seed(2024, {13}));
    std::size_t bad = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::string text = random_transcript(rng);
        try {
            if (serialize(parse_transcript(text)) != text) ++bad;
        } catch (const Error&) {
            ++bad;
        }
    }
    return {bad == 0, "10000 random transcripts, " + std::to_string(bad) + " failures"};
}

// Outcome of one training run, reduced to what the learning-shape criteria read.
struct RunSummary {
    double sq_initial = 0.0;  // search quality of the untrained policy's iteration-1 batch
    double sq_final = 0.0;    // mean over the last 10 iterations
    double searches_final = 0.0;
    double qlen_final = 0.0;
    double em = 0.0;
    double em_curve = 0.0;  // mean eval EM over all eval points, for context only
    double em_single = 0.0, em_multi = 0.0;
    std::optional<double> ig0_2hop, ig1_2hop;
};

constexpr std::size_t kTail = 10;

RunSummary summarize(const TrainResult& r, const World& w) {
    RunSummary s;
    s.sq_initial = r.metrics.front().search_quality;
    const std::size_t from = r.metrics.size() > kTail ? r.metrics.size() - kTail : 0;
    double sq = 0.0, calls = 0.0, ql = 0.0;
    std::size_t n = 0, nq = 0;
    for (std::size_t i = from; i < r.metrics.size(); ++i, ++n) {
        sq += r.metrics[i].search_quality;
        calls += r.metrics[i].searches_per_rollout;
        if (r.metrics[i].query_length) {
            ql += *r.metrics[i].query_length;
            ++nq;
        }
    }
    s.sq_final = sq / static_cast<double>(n);
    s.searches_final = calls / static_cast<double>(n);
    s.qlen_final = nq ? ql / static_cast<double>(nq) : 0.0;
    const EvalMetrics& e = r.final_eval;
    s.em = e.em;
    double curve = 0.0;
    std::size_t points = 0;
    for (const auto& m : r.metrics)
        if (m.eval) {
            curve += m.eval->em;
            ++points;
        }
    s.em_curve = points ? curve / static_cast<double>(points) : 0.0;
    std::array<double, kMaxHops> count{};
    for (auto id : w.questions_in(Split::Eval)) count[w.questions[id].hops - 1] += 1.0;
    s.em_single = e.em_by_hop[0].value_or(0.0);
    const double multi_n = count[1] + count[2];
    s.em_multi = multi_n ? (count[1] * e.em_by_hop[1].value_or(0.0) + count[2] * e.em_by_hop[2].value_or(0.0)) / multi_n : 0.0;
    s.ig0_2hop = e.ig_position_by_hop[1][0];
    s.ig1_2hop = e.ig_position_by_hop[1][1];
    return s;
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

std::vector<RunSummary> run_seeds(const std::function<void(RunConfig&)>& tweak, const World& w) {
    std::vector<RunSummary> out;
    for (auto seed : kSeeds) {
        RunConfig c;
        c.seed = seed;
        tweak(c);
        out.push_back(summarize(train(c, w), w));
    }
    return out;
}

double mean(const std::vector<RunSummary>& runs, double RunSummary::*field) {
    double s = 0.0;
    for (const auto& r : runs) s += r.*field;
    return s / static_cast<double>(runs.size());
}

std::string per_seed(const std::vector<RunSummary>& runs, double RunSummary::*field, const char* f = "%.3f") {
    std::string out = "[";
    for (std::size_t i = 0; i < runs.size(); ++i) out += (i ? " " : "") + fmt(f, runs[i].*field);
    return out + "]";
}

}  // namespace

int main() {
    run(1, "stabilization fidelity", stabilization);
    run(2, "IG arithmetic", raw_ig);
    run(3, "group advantages", advantages);
    run(4, "length invariance of query modulation", length_invariance);
    run(5, "all-failure signal", all_failure_signal);
    run(6, "gradient check", gradient_check);
    run(7, "batched scoring equivalence", batched_scoring);

    const World world = world_for(RunConfig{});
    const auto start = std::chrono::steady_clock::now();
    const auto full = run_seeds([](RunConfig&) {}, world);
    const auto no_ig = run_seeds([](RunConfig& c) { c.alpha = 0.0; }, world);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    run(8, "learning shape", [&] {
        const double gain = mean(full, &RunSummary::sq_final) - mean(full, &RunSummary::sq_initial);
        const double gap = mean(full, &RunSummary::em) - mean(no_ig, &RunSummary::em);
        Outcome o;
        o.pass = gain >= 0.15 && gap >= 0.02 && seconds <= 300.0;
        o.detail = "search quality " + fmt("%.3f", mean(full, &RunSummary::sq_initial)) + " -> " +
                   fmt("%.3f", mean(full, &RunSummary::sq_final)) + " (gain " + fmt("%.3f", gain) +
                   ", need 0.15); eval EM IG " + per_seed(full, &RunSummary::em) + " vs alpha=0 " +
                   per_seed(no_ig, &RunSummary::em) + ", gap " + fmt("%.3f", gap) + " (need 0.02); curve-mean EM " +
                   fmt("%.3f", mean(full, &RunSummary::em_curve)) + " vs " + fmt("%.3f", mean(no_ig, &RunSummary::em_curve)) + "; " +
                   fmt("%.1f", seconds) + " s for 6 runs";
        return o;
    });

    const auto lambda1 = run_seeds([](RunConfig& c) { c.lambda = 1.0; }, world);
    run(9, "search avoidance", [&] {
        const double a = mean(lambda1, &RunSummary::searches_final), b = mean(full, &RunSummary::searches_final);
        return Outcome{a <= 0.8 * b, "searches per rollout lambda=1 " + per_seed(lambda1, &RunSummary::searches_final) +
                                         " vs lambda=0.1 " + per_seed(full, &RunSummary::searches_final) + ", ratio " +
                                         fmt("%.3f", a / b) + " (need <= 0.8)"};
    });

    const auto no_norm = run_seeds([](RunConfig& c) { c.length_norm = false; }, world);
    run(10, "reward hacking without length normalization", [&] {
        const double a = mean(no_norm, &RunSummary::qlen_final), b = mean(full, &RunSummary::qlen_final);
        return Outcome{a >= 1.5 * b, "query length off " + per_seed(no_norm, &RunSummary::qlen_final, "%.2f") + " vs on " +
                                         per_seed(full, &RunSummary::qlen_final, "%.2f") + ", ratio " +
                                         fmt("%.3f", a / b) + " (need >= 1.5)"};
    });

    run(11, "position ordering on 2-hop eval", [&] {
        Outcome o;
        std::string parts;
        for (std::size_t i = 0; i < full.size(); ++i) {
            const auto& r = full[i];
            const bool ok = r.ig0_2hop && r.ig1_2hop && *r.ig0_2hop > *r.ig1_2hop;
            o.pass = o.pass && ok;
            parts += (i ? ", " : "") + std::string("seed ") + std::to_string(kSeeds[i]) + " " +
                     (r.ig0_2hop ? fmt("%.3f", *r.ig0_2hop) : "NA") + " > " + (r.ig1_2hop ? fmt("%.3f", *r.ig1_2hop) : "NA");
        }
        o.detail = "IG(0) > IG(1): " + parts;
        return o;
    });

    const auto empty = run_seeds([](RunConfig& c) { c.baseline = BaselineMode::Empty; }, world);
    run(12, "counterfactual-baseline ordering", [&] {
        const double rdr = mean(full, &RunSummary::em), emp = mean(empty, &RunSummary::em);
        const double single_gap = mean(full, &RunSummary::em_single) - mean(empty, &RunSummary::em_single);
        const double multi_gap = mean(full, &RunSummary::em_multi) - mean(empty, &RunSummary::em_multi);
        return Outcome{rdr >= emp && multi_gap >= single_gap,
                       "EM random_docs_refine " + fmt("%.3f", rdr) + " vs empty " + fmt("%.3f", emp) +
                           "; multi-hop gap " + fmt("%.3f", multi_gap) + " vs single-hop gap " + fmt("%.3f", single_gap)};
    });

    run(13, "parser round-trip fuzz", parser_fuzz);

    std::printf("%d of 13 criteria failed\n", failures);
    return failures ? 1 : 0;
}
