#include "igsearch/ig.hpp"

#include "igsearch/errors.hpp"
#include "igsearch/random.hpp"
#include "igsearch/rollout.hpp"

#include <cmath>

namespace igsearch {

const char* to_string(BaselineMode mode) {
    switch (mode) {
        case BaselineMode::RandomDocsRefine: return "random_docs_refine";
        case BaselineMode::RandomDocsOnly: return "random_docs_only";
        case BaselineMode::BottomK: return "bottom_k";
        case BaselineMode::Empty: return "empty";
    }
    return "?";
}

BaselineMode baseline_from_string(const std::string& name) {
    for (auto m : {BaselineMode::RandomDocsRefine, BaselineMode::RandomDocsOnly, BaselineMode::BottomK, BaselineMode::Empty})
        if (name == to_string(m)) return m;
    throw ConfigInvalid("unknown baseline mode '" + name + "'");
}

void CounterfactualPool::add(std::size_t question, const Trajectory& trajectory) {
    for (const auto& s : trajectory.steps()) entries_.push_back(PoolEntry{question, s.index, s.docs, s.refine});
}

std::size_t CounterfactualPool::eligible(std::size_t question) const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.question != question;
    return n;
}

Tokens context_tokens(const Tokens& question, const std::vector<Segment>& segments) {
    Tokens out = question;
    for (const auto& s : segments) {
        out.push_back(std::string("<") + tag_name(s.kind) + ">");
        out.insert(out.end(), s.tokens.begin(), s.tokens.end());
        out.push_back(std::string("</") + tag_name(s.kind) + ">");
    }
    return out;
}

ContextSet build_contexts(const Trajectory& trajectory, std::size_t step, const Question& question,
                          const CounterfactualPool& pool, const World& world, const ContextOptions& options,
                          std::uint64_t seed) {
    if (step >= trajectory.steps().size()) throw NoSuchStep("step " + std::to_string(step));
    const SearchStep& st = trajectory.steps()[step];
    const std::vector<Segment> prefix(trajectory.segments().begin(),
                                      trajectory.segments().begin() + static_cast<std::ptrdiff_t>(st.refine_segment + 1));
    ContextSet out;
    out.real = ScoringContext{context_tokens(question.tokens, prefix), Provenance::Real, 0};

    auto add = [&](std::vector<Segment> segs, const PoolEntry* from) {
        out.counterfactuals.push_back(
            ScoringContext{context_tokens(question.tokens, segs), Provenance::Counterfactual, out.counterfactuals.size() + 1});
        out.provenance.push_back(from);
    };

    switch (options.mode) {
        case BaselineMode::Empty: {
            std::vector<Segment> segs;
            for (std::size_t i = 0; i < prefix.size(); ++i)
                if (i != st.documents_segment && i != st.refine_segment) segs.push_back(prefix[i]);
            add(std::move(segs), nullptr);
            return out;
        }
        case BaselineMode::BottomK: {
            const RetrievalResult res = retrieve(world, st.query, options.k, RetrievalMode::BottomK);
            std::vector<Tokens> docs;
            for (auto d : res.docs) docs.push_back(world.corpus[d].tokens);
            std::vector<Segment> segs = prefix;
            segs[st.documents_segment].tokens = render_documents(docs);
            segs[st.refine_segment].tokens = docs.empty() ? Tokens{} : refine_from(world, docs.front());
            add(std::move(segs), nullptr);
            return out;
        }
        case BaselineMode::RandomDocsRefine:
        case BaselineMode::RandomDocsOnly: break;
    }

    if (options.n == 0) throw InvalidHyperparam("number of counterfactuals N must be >= 1");
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pool.entries().size(); ++i)
        if (pool.entries()[i].question != question.id) eligible.push_back(i);
    if (eligible.empty() || (eligible.size() < options.n && !options.allow_replacement))
        throw PoolExhausted(std::to_string(eligible.size()) + " eligible pairs for question " +
                            std::to_string(question.id) + ", need " + std::to_string(options.n));

    Rng rng(seed);
    std::vector<std::size_t> chosen;
    if (eligible.size() >= options.n) {
        for (std::size_t i = 0; i < options.n; ++i) {
            std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
            chosen.push_back(eligible[i]);
        }
    } else {
        for (std::size_t i = 0; i < options.n; ++i) chosen.push_back(eligible[rng.below(eligible.size())]);
    }
    for (auto idx : chosen) {
        const PoolEntry& e = pool.entries()[idx];
        std::vector<Segment> segs = prefix;
        segs[st.documents_segment].tokens = render_documents(e.docs);
        if (options.mode == BaselineMode::RandomDocsRefine) segs[st.refine_segment].tokens = e.refine;
        add(std::move(segs), &e);
    }
    return out;
}

RawIG compute_raw_ig(const AnswerScorer& scorer, const ScoringContext& real,
                     const std::vector<ScoringContext>& counterfactuals, const std::vector<Tokens>& aliases) {
    if (counterfactuals.empty()) throw InvalidHyperparam("at least one counterfactual context is required");
    std::vector<ScoringContext> all;
    all.reserve(counterfactuals.size() + 1);
    all.push_back(real);
    all.insert(all.end(), counterfactuals.begin(), counterfactuals.end());
    const auto values = scorer.score_variants(all, aliases);
    RawIG r;
    r.real_logprob = values[0];
    double sum = 0.0;
    for (std::size_t j = 1; j < values.size(); ++j) {
        r.counterfactual_logprobs.push_back(values[j]);
        sum += values[j];
    }
    r.ig = r.real_logprob - sum / static_cast<double>(counterfactuals.size());
    return r;
}

void validate(const StabilizeParams& p) {
    if (!(p.delta >= 0.0) || !std::isfinite(p.delta)) throw InvalidHyperparam("delta must be >= 0");
    if (!(p.lambda >= 0.0 && p.lambda <= 1.0)) throw InvalidHyperparam("lambda must lie in [0, 1]");
    if (!(p.eta > 0.0) || !std::isfinite(p.eta)) throw InvalidHyperparam("eta must be > 0");
}

StageTrace stabilize(double ig, const StabilizeParams& p) {
    validate(p);
    StageTrace s;
    s.raw = ig;
    s.after_deadzone = (p.dead_zone && std::abs(ig) < p.delta) ? 0.0 : ig;
    s.after_lambda = s.after_deadzone < 0.0 ? p.lambda * s.after_deadzone : s.after_deadzone;
    const double v = s.after_lambda;
    if (p.clip && std::abs(v) > p.eta) s.after_clip = std::copysign(p.eta + std::log1p(std::abs(v) - p.eta), v);
    else s.after_clip = v;
    return s;
}

std::vector<IGRecord> trajectory_ig(const AnswerScorer& scorer, const Trajectory& trajectory, const Question& question,
                                    std::size_t rollout, const CounterfactualPool& pool, const World& world,
                                    const ContextOptions& options, const StabilizeParams& stab, std::uint64_t seed) {
    std::vector<IGRecord> out;
    for (std::size_t t = 0; t < trajectory.steps().size(); ++t) {
        const ContextSet ctx = build_contexts(trajectory, t, question, pool, world, options, derive_seed(seed, {t}));
        const RawIG raw = compute_raw_ig(scorer, ctx.real, ctx.counterfactuals, question.aliases);
        const StageTrace s = stabilize(raw.ig, stab);
        IGRecord r;
        r.question = question.id;
        r.rollout = rollout;
        r.step = t;
        r.raw = s.raw;
        r.after_deadzone = s.after_deadzone;
        r.after_lambda = s.after_lambda;
        r.after_clip = s.after_clip;
        r.real_logprob = raw.real_logprob;
        r.counterfactual_logprobs = raw.counterfactual_logprobs;
        r.baseline = options.mode;
        for (const auto* e : ctx.provenance)
            if (e) r.counterfactual_questions.push_back(e->question);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace igsearch
