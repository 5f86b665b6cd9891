#include "igsearch/trainer.hpp"

#include "igsearch/errors.hpp"
#include "igsearch/random.hpp"
#include "igsearch/rewards.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace igsearch {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Mean {
    double sum = 0.0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    std::optional<double> get() const { return n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt; }
    double or_zero() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

bool contains_run(const Tokens& haystack, const Tokens& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i)
        if (std::equal(needle.begin(), needle.end(), haystack.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    return false;
}

// True when any returned document contains a gold alias.
bool retrieval_hit(const SearchStep& step, const std::vector<Tokens>& aliases) {
    for (const auto& doc : step.docs)
        for (const auto& a : aliases)
            if (contains_run(doc, a)) return true;
    return false;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json opt_array(const PositionMeans& m) {
    json a = json::array();
    for (const auto& v : m) a.push_back(opt(v));
    return a;
}

const Question& question_at(const World& world, std::size_t id) { return world.questions.at(id); }

// IG records for one rollout, degrading gracefully when the pool is short.
struct IGOutcome {
    std::vector<IGRecord> records;
    bool skipped = false;
    bool fallback = false;
};

IGOutcome rollout_ig(const AnswerScorer& scorer, const Rollout& r, const Question& q, std::size_t rollout_index,
                     const CounterfactualPool& pool, const World& world, const RunConfig& c, std::uint64_t seed) {
    IGOutcome out;
    const std::size_t steps = r.trajectory.steps().size();
    if (steps == 0) return out;
    ContextOptions opts{c.n_counterfactual, c.baseline, c.k, false};
    const bool needs_pool = c.baseline == BaselineMode::RandomDocsRefine || c.baseline == BaselineMode::RandomDocsOnly;
    if (needs_pool) {
        const std::size_t eligible = pool.eligible(q.id);
        if (eligible == 0) {
            out.skipped = true;
            for (std::size_t t = 0; t < steps; ++t) {
                IGRecord rec;
                rec.question = q.id;
                rec.rollout = rollout_index;
                rec.step = t;
                rec.baseline = c.baseline;
                out.records.push_back(rec);
            }
            return out;
        }
        if (eligible < opts.n) {
            opts.allow_replacement = true;
            out.fallback = true;
        }
    }
    out.records = trajectory_ig(scorer, r.trajectory, q, rollout_index, pool, world, opts, c.stabilize_params(), seed);
    return out;
}

std::string iter_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "params_iter_%04zu.json", i);
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
}

json record_json(const IGRecord& r, std::size_t iteration) {
    return {{"iteration", iteration},
            {"question", r.question},
            {"rollout", r.rollout},
            {"step", r.step},
            {"raw", r.raw},
            {"after_deadzone", r.after_deadzone},
            {"after_lambda", r.after_lambda},
            {"after_clip", r.after_clip},
            {"real_logprob", r.real_logprob},
            {"counterfactual_logprobs", r.counterfactual_logprobs},
            {"baseline", to_string(r.baseline)},
            {"counterfactual_questions", r.counterfactual_questions}};
}

}  // namespace

PositionMeans per_position_ig(const std::vector<IGRecord>& records) {
    std::array<Mean, kMaxHops> m;
    for (const auto& r : records)
        if (r.step < m.size()) m[r.step].add(r.raw);
    PositionMeans out;
    for (std::size_t k = 0; k < m.size(); ++k) out[k] = m[k].get();
    return out;
}

json to_json(const EvalMetrics& m) {
    json em_hop = json::array(), s_hop = json::array(), ig_hop = json::array();
    for (int h = 0; h < kMaxHops; ++h) {
        em_hop.push_back(opt(m.em_by_hop[h]));
        s_hop.push_back(opt(m.searches_by_hop[h]));
        ig_hop.push_back(opt_array(m.ig_position_by_hop[h]));
    }
    return {{"questions", m.questions},
            {"em", m.em},
            {"em_by_hop", em_hop},
            {"searches_per_rollout", m.searches_per_rollout},
            {"searches_by_hop", s_hop},
            {"search_quality", m.search_quality},
            {"ig_position", opt_array(m.ig_position)},
            {"ig_position_by_hop", ig_hop}};
}

json to_json(const MetricsSnapshot& m) {
    return {{"iteration", m.iteration},
            {"eval", m.eval ? to_json(*m.eval) : json(nullptr)},
            {"eval_em", m.eval ? json(m.eval->em) : json(nullptr)},
            {"reward_mean", m.reward_mean},
            {"train_em", m.train_em},
            {"search_quality", m.search_quality},
            {"retrieval_calls", m.retrieval_calls},
            {"discriminative_gap", opt(m.discriminative_gap)},
            {"ig_position", opt_array(m.ig_position)},
            {"all_failure_fraction", m.all_failure_fraction},
            {"all_failure_abs_modulation", opt(m.all_failure_abs_modulation)},
            {"searches_per_rollout", m.searches_per_rollout},
            {"searches_single_hop", opt(m.searches_single_hop)},
            {"searches_multi_hop", opt(m.searches_multi_hop)},
            {"query_length", opt(m.query_length)},
            {"scoring_calls", m.scoring_calls},
            {"ig_skipped", m.ig_skipped},
            {"ig_fallbacks", m.ig_fallbacks},
            {"dead_zone_fraction", m.dead_zone_fraction},
            {"grad_norm", m.update.grad_norm},
            {"query_grad_norm", m.update.query_grad_norm},
            {"mean_kl", m.update.mean_kl},
            {"clip_fraction", m.update.clip_fraction},
            {"loss", m.update.loss}};
}

json params_to_json(const PolicyParams& params, std::size_t t_max) {
    return {{"format", "igsearch-params/1"},
            {"t_max", t_max},
            {"states", params.states()},
            {"actions", params.actions()},
            {"logits", params.raw()}};
}

PolicyParams params_from_json(const json& j) {
    try {
        if (j.at("format") != "igsearch-params/1") throw IoError("unknown params format");
        PolicyParams p(j.at("states").get<std::size_t>(), j.at("actions").get<std::size_t>());
        const auto logits = j.at("logits").get<std::vector<double>>();
        if (logits.size() != p.raw().size()) throw IoError("params: logits size mismatch");
        p.raw() = logits;
        return p;
    } catch (const json::exception& e) {
        throw IoError(std::string("params: ") + e.what());
    }
}

void save_params(const std::string& path, const PolicyParams& params, std::size_t t_max) {
    write_file(path, params_to_json(params, t_max).dump() + "\n");
}

PolicyParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("'" + path + "': " + e.what());
    }
    return params_from_json(j);
}

std::unique_ptr<AnswerScorer> make_scorer(const RunConfig& c, const World& world) {
    if (c.scorer == "copy") {
        const std::size_t v = c.vocab_size ? c.vocab_size : world.vocabulary().size();
        return std::make_unique<CopyScorer>(CopyModelParams{c.mu, v, c.max_context});
    }
    std::ifstream in(c.scorer_table);
    if (!in) throw ConfigInvalid("key 'scorer.table': cannot read '" + c.scorer_table + "'");
    auto table = std::make_unique<OracleTableScorer>();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ConfigInvalid("key 'scorer.table': expected 'value<TAB>context'");
        double v = 0.0;
        try {
            v = std::stod(line.substr(0, tab));
        } catch (const std::logic_error&) {
            throw ConfigInvalid("key 'scorer.table': bad value '" + line.substr(0, tab) + "'");
        }
        table->set(tokenize(line.substr(tab + 1)), v);
    }
    return table;
}

RolloutConfig rollout_config(const RunConfig& c, bool greedy) { return {c.t_max, c.k, c.long_query, greedy}; }

World world_for(const RunConfig& config) { return generate_world(config.world_seed, config.world_spec()); }

EvalMetrics evaluate(const PolicyParams& params, const World& world, const RunConfig& c, const AnswerScorer& scorer,
                     Split split, std::uint64_t seed) {
    EvalMetrics m;
    const auto ids = world.questions_in(split);
    m.questions = ids.size();
    if (ids.empty()) return m;
    const RolloutConfig rc = rollout_config(c, true);

    std::vector<Rollout> rollouts;
    CounterfactualPool pool;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        rollouts.push_back(run_rollout(params, question_at(world, ids[i]), world, rc, derive_seed(seed, {i})));
        pool.add(ids[i], rollouts.back().trajectory);
    }

    Mean em, searches, quality;
    std::array<Mean, kMaxHops> em_h, s_h;
    std::array<std::array<Mean, kMaxHops>, kMaxHops> ig_h;
    std::array<Mean, kMaxHops> ig_all;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Question& q = question_at(world, ids[i]);
        const Rollout& r = rollouts[i];
        const double e = exact_match(prediction_of(r.trajectory), q.aliases);
        const auto h = static_cast<std::size_t>(q.hops - 1);
        const double s = static_cast<double>(r.trajectory.steps().size());
        em.add(e);
        em_h[h].add(e);
        searches.add(s);
        s_h[h].add(s);
        for (const auto& step : r.trajectory.steps()) quality.add(retrieval_hit(step, q.aliases) ? 1.0 : 0.0);
        const IGOutcome ig = rollout_ig(scorer, r, q, 0, pool, world, c, derive_seed(seed, {1, i}));
        if (ig.skipped) continue;
        for (const auto& rec : ig.records)
            if (rec.step < kMaxHops) {
                ig_h[h][rec.step].add(rec.raw);
                ig_all[rec.step].add(rec.raw);
            }
    }
    m.em = em.or_zero();
    m.searches_per_rollout = searches.or_zero();
    m.search_quality = quality.or_zero();
    for (int h = 0; h < kMaxHops; ++h) {
        m.em_by_hop[h] = em_h[h].get();
        m.searches_by_hop[h] = s_h[h].get();
        for (int k = 0; k < kMaxHops; ++k) m.ig_position_by_hop[h][k] = ig_h[h][k].get();
        m.ig_position[h] = ig_all[h].get();
    }
    return m;
}

TrainResult train(const RunConfig& c, const World& world, const TrainOptions& options) {
    validate(c);
    const auto train_ids = world.questions_in(Split::Train);
    if (train_ids.empty()) throw ConfigInvalid("world has no training questions");
    const auto scorer = make_scorer(c, world);
    const RolloutConfig rc = rollout_config(c, false);

    const bool to_disk = !options.run_dir.empty();
    const fs::path dir(options.run_dir);
    std::ofstream metrics_out, records_out;
    if (to_disk) {
        fs::create_directories(dir / "checkpoints");
        write_file(dir / "config.txt", render_config(c));
        std::ofstream wf(dir / "world.jsonl", std::ios::binary);
        write_world(wf, world);
        metrics_out.open(dir / "metrics.jsonl", std::ios::binary);
        records_out.open(dir / "ig_records.jsonl", std::ios::binary);
        if (!metrics_out || !records_out) throw IoError("cannot open metrics files in '" + dir.string() + "'");
    }

    TrainResult result;
    PolicyParams params = initial_policy(c.t_max);
    const PolicyParams reference = params;
    result.initial_eval = evaluate(params, world, c, *scorer, Split::Eval, derive_seed(c.seed, {4, 0}));

    const double alpha = c.effective_alpha();
    for (std::size_t iter = 1; iter <= c.iterations; ++iter) {
        // Question batch: a seeded partial shuffle of the training split.
        std::vector<std::size_t> order = train_ids;
        Rng pick(derive_seed(c.seed, {1, iter}));
        const std::size_t b_size = std::min(c.batch_size, order.size());
        for (std::size_t i = 0; i < b_size; ++i) std::swap(order[i], order[i + pick.below(order.size() - i)]);
        order.resize(b_size);

        std::vector<GroupBatch> groups;
        CounterfactualPool pool;
        for (std::size_t b = 0; b < b_size; ++b) {
            groups.push_back(sample_group(params, question_at(world, order[b]), world, rc, c.group_size,
                                          derive_seed(c.seed, {2, iter, b})));
            for (const auto& r : groups.back().rollouts) pool.add(order[b], r.trajectory);
        }

        MetricsSnapshot snap;
        snap.iteration = iter;
        Mean reward, em, quality, searches, single, multi, qlen, correct_ig, wrong_ig, af_mod, dead;
        std::size_t all_failure = 0;
        std::vector<IGRecord> iter_records;
        std::vector<std::vector<std::vector<IGRecord>>> group_records(b_size);
        std::vector<const Rollout*> batch_rollouts;
        std::vector<AdvantageMap> maps;
        maps.reserve(b_size * c.group_size);

        for (std::size_t b = 0; b < b_size; ++b) {
            const Question& q = question_at(world, order[b]);
            const GroupBatch& g = groups[b];
            std::vector<double> rewards;
            bool failed = true;
            for (const auto& r : g.rollouts) {
                const RewardBreakdown rb = trajectory_reward(r.trajectory, q.aliases, c.w_ret);
                rewards.push_back(rb.total);
                if (rb.f1 > 0.0) failed = false;
            }
            if (failed) ++all_failure;
            const std::vector<double> adv = group_advantages(rewards);

            for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
                const Rollout& r = g.rollouts[i];
                const IGOutcome ig =
                    rollout_ig(*scorer, r, q, i, pool, world, c, derive_seed(c.seed, {3, iter, b, i}));
                snap.ig_skipped += ig.skipped;
                snap.ig_fallbacks += ig.fallback;
                maps.push_back(modulate(adv[i], ig.records, r.trajectory, c.modulation_params()));
                group_records[b].push_back(ig.records);
                batch_rollouts.push_back(&r);

                const double correct = exact_match(prediction_of(r.trajectory), q.aliases);
                const auto& steps = r.trajectory.steps();
                reward.add(rewards[i]);
                em.add(correct);
                searches.add(static_cast<double>(steps.size()));
                (q.hops == 1 ? single : multi).add(static_cast<double>(steps.size()));
                for (const auto& s : steps) {
                    quality.add(retrieval_hit(s, q.aliases) ? 1.0 : 0.0);
                    qlen.add(static_cast<double>(s.query.size()));
                }
                if (!ig.skipped)
                    for (const auto& rec : ig.records) {
                        (correct > 0.0 ? correct_ig : wrong_ig).add(rec.raw);
                        dead.add(rec.after_deadzone == 0.0 ? 1.0 : 0.0);
                        if (failed) af_mod.add(std::abs(alpha * rec.after_clip));
                        iter_records.push_back(rec);
                    }
            }
        }

        SurrogateBatch batch;
        batch.rollouts = batch_rollouts;
        for (const auto& m : maps) batch.advantages.push_back(&m);
        try {
            snap.update = surrogate_update(params, reference, batch, {c.epsilon, c.beta}, c.lr);
        } catch (const NonFiniteGradient&) {
            if (to_disk) save_params((dir / "checkpoints" / "params_last_good.json").string(), params, c.t_max);
            if (options.log) *options.log << "error: non-finite gradient at iteration " << iter << "\n";
            throw;
        }

        snap.reward_mean = reward.or_zero();
        snap.train_em = em.or_zero();
        snap.search_quality = quality.or_zero();
        snap.retrieval_calls = quality.n;
        if (correct_ig.n && wrong_ig.n) snap.discriminative_gap = *correct_ig.get() - *wrong_ig.get();
        snap.ig_position = per_position_ig(iter_records);
        snap.all_failure_fraction = static_cast<double>(all_failure) / static_cast<double>(b_size);
        snap.all_failure_abs_modulation = af_mod.get();
        snap.searches_per_rollout = searches.or_zero();
        snap.searches_single_hop = single.get();
        snap.searches_multi_hop = multi.get();
        snap.query_length = qlen.get();
        snap.dead_zone_fraction = dead.or_zero();

        if (options.observer) options.observer({iter, &groups, &group_records, &snap});

        const bool last = iter == c.iterations;
        if (iter % c.eval_every == 0 || last)
            snap.eval = evaluate(params, world, c, *scorer, Split::Eval, derive_seed(c.seed, {4, iter}));
        snap.scoring_calls = scorer->batched_calls();

        const bool checkpoint = iter % c.checkpoint_every == 0 || last;
        if (checkpoint && options.keep_records) result.checkpoint_records.emplace_back(iter, iter_records);
        if (to_disk) {
            metrics_out << to_json(snap).dump() << "\n" << std::flush;
            if (checkpoint) {
                for (const auto& r : iter_records) records_out << record_json(r, iter).dump() << "\n";
                records_out.flush();
                if (iter % c.checkpoint_every == 0)
                    save_params((dir / "checkpoints" / iter_name(iter)).string(), params, c.t_max);
            }
        }
        if (options.log && snap.ig_fallbacks && iter == 1)
            *options.log << "warning: counterfactual pool short, sampling with replacement\n";
        result.metrics.push_back(std::move(snap));
    }

    result.final_eval = result.metrics.empty() || !result.metrics.back().eval
                            ? evaluate(params, world, c, *scorer, Split::Eval, derive_seed(c.seed, {4, 0}))
                            : *result.metrics.back().eval;
    if (to_disk) {
        save_params((dir / "checkpoints" / "params_final.json").string(), params, c.t_max);
        json summary = {{"iterations", c.iterations},
                        {"seed", c.seed},
                        {"initial_eval", to_json(result.initial_eval)},
                        {"final_eval", to_json(result.final_eval)}};
        write_file(dir / "summary.json", summary.dump(2) + "\n");
    }
    result.params = std::move(params);
    return result;
}

}  // namespace igsearch
