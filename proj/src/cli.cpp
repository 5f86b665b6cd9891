#include "igsearch/cli.hpp"

#include "igsearch/config.hpp"
#include "igsearch/errors.hpp"
#include "igsearch/plots.hpp"
#include "igsearch/random.hpp"
#include "igsearch/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace igsearch {

namespace fs = std::filesystem;

const std::vector<AblationVariant>& ablation_matrix() {
    static const std::vector<AblationVariant> m = {
        {"full", {}},
        {"no_ig", {{"ig.enabled", "false"}}},
        {"lambda_1", {{"ig.lambda", "1.0"}}},
        {"no_deadzone", {{"ig.dead_zone", "false"}}},
        {"no_clip", {{"ig.clip", "false"}}},
        {"no_lennorm", {{"ig.length_norm", "false"}}},
        {"scope_think_query", {{"ig.scope", "think_query"}}},
        {"scope_all", {{"ig.scope", "all"}}},
        {"baseline_random_docs_refine", {{"ig.baseline", "random_docs_refine"}}},
        {"baseline_random_docs_only", {{"ig.baseline", "random_docs_only"}}},
        {"baseline_bottom_k", {{"ig.baseline", "bottom_k"}}},
        {"baseline_empty", {{"ig.baseline", "empty"}}},
    };
    return m;
}

namespace {

struct Common {
    std::string config = "default";
    std::vector<std::string> sets;
    std::string out;
    std::string world_file;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_out) {
    c.out = default_out;
    cmd->add_option("--config", c.config, "flat key = value config file, or 'default'");
    cmd->add_option("--set", c.sets, "override key=value (repeatable)")->allow_extra_args(false);
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    cmd->add_option("--world-file", c.world_file, "world JSONL to use instead of generating one");
}

// Defaults, then IGSEARCH_SEED, then the config file, then overrides.
RunConfig resolve(const Common& c) {
    RunConfig cfg;
    if (const char* env = std::getenv("IGSEARCH_SEED")) {
        try {
            set_config_value(cfg, "train.seed", env);
        } catch (const ConfigInvalid&) {
            throw ConfigInvalid(std::string("IGSEARCH_SEED: '") + env + "' is not a non-negative integer (train.seed)");
        }
    }
    if (!c.config.empty() && c.config != "default") {
        std::ifstream in(c.config);
        if (!in) throw ConfigInvalid("cannot read config file '" + c.config + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        apply_config_text(cfg, ss.str(), c.config);
    }
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigInvalid("override '" + s + "' is not key=value");
        set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    validate(cfg);
    return cfg;
}

World load_world(const Common& c, const RunConfig& cfg) {
    if (c.world_file.empty()) return world_for(cfg);
    std::ifstream in(c.world_file);
    if (!in) throw ConfigInvalid("--world-file: cannot read '" + c.world_file + "'");
    return read_world(in);
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

int gen_world(const Common& c, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    const World w = world_for(cfg);
    fs::create_directories(c.out);
    const fs::path path = fs::path(c.out) / "world.jsonl";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    write_world(f, w);
    out << path.string() << ": " << w.questions.size() << " questions, " << w.corpus.size() << " documents\n";
    return kExitOk;
}

int train_verb(const Common& c, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = resolve(c);
    const World w = load_world(c, cfg);
    TrainOptions opts;
    opts.run_dir = c.out;
    opts.log = &err;
    const TrainResult r = train(cfg, w, opts);
    out << c.out << ": " << r.metrics.size() << " iterations, eval EM " << fixed(r.initial_eval.em) << " -> "
        << fixed(r.final_eval.em) << "\n";
    return kExitOk;
}

int eval_verb(Common c, const std::string& run_dir, std::string params_path, const std::string& policy,
              std::ostream& out) {
    if (!run_dir.empty()) {
        if (c.config == "default") c.config = (fs::path(run_dir) / "config.txt").string();
        if (c.world_file.empty()) c.world_file = (fs::path(run_dir) / "world.jsonl").string();
        if (params_path.empty()) params_path = (fs::path(run_dir) / "checkpoints" / "params_final.json").string();
    }
    const RunConfig cfg = resolve(c);
    const World w = load_world(c, cfg);
    PolicyParams params;
    if (!params_path.empty()) params = load_params(params_path);
    else if (policy == "oracle") params = oracle_policy(cfg.t_max);
    else params = initial_policy(cfg.t_max);
    const auto scorer = make_scorer(cfg, w);
    const EvalMetrics m = evaluate(params, w, cfg, *scorer, Split::Eval, derive_seed(cfg.seed, {4, 0}));
    const std::string text = to_json(m).dump(2) + "\n";
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        std::ofstream f(fs::path(c.out) / "eval.json", std::ios::binary);
        f << text;
    }
    out << text;
    return kExitOk;
}

int ablate_verb(const Common& c, std::size_t seeds, std::size_t jobs, std::ostream& out, std::ostream& err) {
    if (seeds == 0) throw ConfigInvalid("--seeds must be >= 1");
    const RunConfig base = resolve(c);
    const World w = load_world(c, base);

    struct Job {
        std::string variant;
        std::uint64_t seed;
        RunConfig config;
        fs::path dir;
    };
    std::vector<Job> work;
    const auto& matrix = ablation_matrix();
    for (const auto& v : matrix)
        for (std::size_t s = 0; s < seeds; ++s) {
            Job j{v.name, base.seed + s, base, fs::path(c.out) / v.name / ("seed_" + std::to_string(base.seed + s))};
            for (const auto& [k, val] : v.overrides) set_config_value(j.config, k, val);
            j.config.seed = j.seed;
            validate(j.config);
            work.push_back(std::move(j));
        }

    std::vector<EvalMetrics> results(work.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            try {
                TrainOptions opts;
                opts.run_dir = work[i].dir.string();
                const TrainResult r = train(work[i].config, w, opts);
                results[i] = r.final_eval;
                std::lock_guard lock(log_mutex);
                err << work[i].variant << " seed " << work[i].seed << ": eval EM " << fixed(r.final_eval.em) << "\n";
            } catch (...) {
                std::lock_guard lock(log_mutex);
                if (!failure) failure = std::current_exception();
                next = work.size();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, work.size());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::string table = "variant\tmean_em";
    for (std::size_t s = 0; s < seeds; ++s) table += "\tem_seed_" + std::to_string(base.seed + s);
    table += "\tmean_search_quality\tmean_searches\n";
    for (std::size_t v = 0; v < matrix.size(); ++v) {
        double em = 0.0, sq = 0.0, calls = 0.0;
        std::string per_seed;
        for (std::size_t s = 0; s < seeds; ++s) {
            const EvalMetrics& m = results[v * seeds + s];
            em += m.em;
            sq += m.search_quality;
            calls += m.searches_per_rollout;
            per_seed += "\t" + fixed(m.em);
        }
        const double n = static_cast<double>(seeds);
        table += matrix[v].name + "\t" + fixed(em / n) + per_seed + "\t" + fixed(sq / n) + "\t" + fixed(calls / n) + "\n";
    }
    const fs::path summary = fs::path(c.out) / "summary.tsv";
    std::ofstream f(summary, std::ios::binary);
    if (!f) throw IoError("cannot write '" + summary.string() + "'");
    f << table;
    out << table;
    return kExitOk;
}

int export_verb(const std::vector<std::string>& runs, const std::string& out_dir, std::ostream& out) {
    for (const auto& p : export_plots(runs, out_dir)) out << p << "\n";
    return kExitOk;
}

bool is_config_error(ErrorCode code) { return code == ErrorCode::ConfigInvalid || code == ErrorCode::InvalidHyperparam; }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app("Information-gain credit assignment for search-augmented policies on synthetic multi-hop worlds",
                 "igsearch");
    app.require_subcommand(1);

    Common gen, tr, ev, ab;
    auto* gen_cmd = app.add_subcommand("gen-world", "generate a world and write world.jsonl");
    add_common(gen_cmd, gen, "runs/world");

    auto* train_cmd = app.add_subcommand("train", "train one policy into a run directory");
    add_common(train_cmd, tr, "runs/train");

    std::string eval_run, eval_params, eval_policy = "initial";
    auto* eval_cmd = app.add_subcommand("eval", "greedy evaluation on the eval split");
    add_common(eval_cmd, ev, "");
    eval_cmd->add_option("run", eval_run, "run directory (config, world and final params)");
    eval_cmd->add_option("--params", eval_params, "params JSON to evaluate");
    eval_cmd->add_option("--policy", eval_policy, "built-in policy when no params are given")
        ->check(CLI::IsMember({"initial", "oracle"}))
        ->capture_default_str();

    std::size_t seeds = 3, jobs = 1;
    auto* ablate_cmd = app.add_subcommand("ablate", "train the ablation matrix over several seeds");
    add_common(ablate_cmd, ab, "runs/ablate");
    ablate_cmd->add_option("--seeds", seeds, "seeds per variant, counting up from train.seed")->capture_default_str();
    ablate_cmd->add_option("--jobs", jobs, "runs trained concurrently")->capture_default_str();

    std::vector<std::string> plot_runs;
    std::string plot_out = "runs/plots";
    auto* plots_cmd = app.add_subcommand("export-plots", "write plot tables for completed runs");
    plots_cmd->add_option("runs", plot_runs, "run directories")->required();
    plots_cmd->add_option("--out", plot_out, "output directory")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (*gen_cmd) return gen_world(gen, out);
        if (*train_cmd) return train_verb(tr, out, err);
        if (*eval_cmd) return eval_verb(ev, eval_run, eval_params, eval_policy, out);
        if (*ablate_cmd) return ablate_verb(ab, seeds, jobs, out, err);
        if (*plots_cmd) return export_verb(plot_runs, plot_out, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return is_config_error(e.code()) ? kExitConfig : kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace igsearch
