#include "igsearch/config.hpp"

#include "igsearch/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace igsearch {

WorldSpec RunConfig::world_spec() const {
    WorldSpec s;
    s.train_counts = train_counts;
    s.eval_counts = eval_counts;
    s.distractor_ratio = distractor_ratio;
    s.generic_docs = generic_docs;
    s.generic_length = generic_length;
    s.first_names = first_names;
    s.last_names = last_names;
    return s;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
    throw ConfigInvalid("key '" + key + "': cannot parse '" + value + "' as " + want);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) bad(key, v, "a finite number");
        return d;
    } catch (const std::logic_error&) {
        bad(key, v, "a number");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad(key, v, "a non-negative integer");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    bad(key, v, "a boolean");
}

std::array<std::size_t, kMaxHops> parse_counts(const std::string& key, const std::string& v) {
    std::array<std::size_t, kMaxHops> out{};
    std::stringstream ss(v);
    std::string part;
    std::size_t i = 0;
    while (std::getline(ss, part, ',')) {
        if (i >= kMaxHops) bad(key, v, "three comma-separated counts");
        out[i++] = parse_u64(key, trim(part));
    }
    if (i != kMaxHops) bad(key, v, "three comma-separated counts");
    return out;
}

std::string fmt_double(double d) {
    std::ostringstream o;
    o << std::setprecision(17) << d;
    return o.str();
}

struct KeyDef {
    std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
KeyDef number(T RunConfig::*field) {
    return {[field](RunConfig& c, const std::string& k, const std::string& v) {
                if constexpr (std::is_floating_point_v<T>) c.*field = parse_double(k, v);
                else c.*field = static_cast<T>(parse_u64(k, v));
            },
            [field](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) return fmt_double(c.*field);
                else return std::to_string(c.*field);
            }};
}

KeyDef boolean(bool RunConfig::*field) {
    return {[field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_bool(k, v); },
            [field](const RunConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

KeyDef counts(std::array<std::size_t, kMaxHops> RunConfig::*field) {
    return {[field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_counts(k, v); },
            [field](const RunConfig& c) {
                const auto& a = c.*field;
                return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]);
            }};
}

const std::vector<std::pair<std::string, KeyDef>>& key_table() {
    static const std::vector<std::pair<std::string, KeyDef>> t = {
        {"ig.enabled", boolean(&RunConfig::ig_enabled)},
        {"ig.alpha", number(&RunConfig::alpha)},
        {"ig.delta", number(&RunConfig::delta)},
        {"ig.lambda", number(&RunConfig::lambda)},
        {"ig.eta", number(&RunConfig::eta)},
        {"ig.n", number(&RunConfig::n_counterfactual)},
        {"ig.baseline",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.baseline = baseline_from_string(v); },
          [](const RunConfig& c) { return std::string(to_string(c.baseline)); }}},
        {"ig.scope",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.scope = scope_from_string(v); },
          [](const RunConfig& c) { return std::string(to_string(c.scope)); }}},
        {"ig.length_norm", boolean(&RunConfig::length_norm)},
        {"ig.dead_zone", boolean(&RunConfig::dead_zone)},
        {"ig.clip", boolean(&RunConfig::clip)},
        {"grpo.group_size", number(&RunConfig::group_size)},
        {"grpo.epsilon", number(&RunConfig::epsilon)},
        {"grpo.beta", number(&RunConfig::beta)},
        {"grpo.lr", number(&RunConfig::lr)},
        {"env.k", number(&RunConfig::k)},
        {"env.t_max", number(&RunConfig::t_max)},
        {"env.train_counts", counts(&RunConfig::train_counts)},
        {"env.eval_counts", counts(&RunConfig::eval_counts)},
        {"env.distractor_ratio", number(&RunConfig::distractor_ratio)},
        {"env.generic_docs", number(&RunConfig::generic_docs)},
        {"env.generic_length", number(&RunConfig::generic_length)},
        {"env.first_names", number(&RunConfig::first_names)},
        {"env.last_names", number(&RunConfig::last_names)},
        {"env.seed", number(&RunConfig::world_seed)},
        {"policy.long_query", boolean(&RunConfig::long_query)},
        {"scorer.kind",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              if (v != "copy" && v != "oracle-table") bad(k, v, "'copy' or 'oracle-table'");
              c.scorer = v;
          },
          [](const RunConfig& c) { return c.scorer; }}},
        {"scorer.table",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.scorer_table = v; },
          [](const RunConfig& c) { return c.scorer_table; }}},
        {"scorer.mu", number(&RunConfig::mu)},
        {"scorer.vocab", number(&RunConfig::vocab_size)},
        {"scorer.max_context", number(&RunConfig::max_context)},
        {"train.iterations", number(&RunConfig::iterations)},
        {"train.batch_size", number(&RunConfig::batch_size)},
        {"train.eval_every", number(&RunConfig::eval_every)},
        {"train.checkpoint_every", number(&RunConfig::checkpoint_every)},
        {"train.w_ret", number(&RunConfig::w_ret)},
        {"train.seed", number(&RunConfig::seed)},
    };
    return t;
}

const KeyDef& lookup(const std::string& key) {
    for (const auto& [k, def] : key_table())
        if (k == key) return def;
    throw ConfigInvalid("unknown key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [k, def] : key_table()) out.push_back(k);
        return out;
    }();
    return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    lookup(key).set(config, key, trim(value));
}

std::string get_config_value(const RunConfig& config, const std::string& key) { return lookup(key).get(config); }

void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigInvalid(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

RunConfig load_config(const std::string& path) {
    RunConfig c;
    if (path.empty() || path == "default") return c;
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(c, ss.str(), path);
    return c;
}

std::string render_config(const RunConfig& config) {
    std::string out;
    for (const auto& [k, def] : key_table()) out += k + " = " + def.get(config) + "\n";
    return out;
}

void validate(const RunConfig& c) {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw InvalidHyperparam(msg);
    };
    need(c.delta >= 0.0, "ig.delta must be >= 0");
    need(c.lambda >= 0.0 && c.lambda <= 1.0, "ig.lambda must lie in [0, 1]");
    need(c.eta > 0.0, "ig.eta must be > 0");
    validate(c.stabilize_params());
    need(c.alpha >= 0.0, "ig.alpha must be >= 0");
    need(c.n_counterfactual >= 1, "ig.n must be >= 1");
    need(c.group_size >= 1, "grpo.group_size must be >= 1");
    need(c.epsilon > 0.0 && c.epsilon < 1.0, "grpo.epsilon must lie in (0, 1)");
    need(c.beta >= 0.0, "grpo.beta must be >= 0");
    need(c.lr > 0.0, "grpo.lr must be > 0");
    need(c.k >= 1 && c.k <= kMaxRetrievalDepth, "env.k must lie in [1, 10]");
    need(c.t_max >= 1, "env.t_max must be >= 1");
    need(c.distractor_ratio >= 0.0, "env.distractor_ratio must be >= 0");
    need(c.first_names >= 1 && c.first_names <= first_name_pool().size(), "env.first_names out of range");
    need(c.last_names >= 1 && c.last_names <= last_name_pool().size(), "env.last_names out of range");
    need(c.mu >= 0.0 && c.mu <= 1.0, "scorer.mu must lie in [0, 1]");
    need(c.max_context >= 1 && c.max_context <= kMaxContextTokens, "scorer.max_context must lie in [1, 8192]");
    need(c.batch_size >= 1, "train.batch_size must be >= 1");
    need(c.eval_every >= 1, "train.eval_every must be >= 1");
    need(c.checkpoint_every >= 1, "train.checkpoint_every must be >= 1");
    need(c.w_ret >= 0.0, "train.w_ret must be >= 0");
    std::size_t train = 0;
    for (auto n : c.train_counts) train += n;
    need(train >= 1, "env.train_counts must request at least one question");
    if (c.scorer == "oracle-table" && c.scorer_table.empty())
        throw ConfigInvalid("key 'scorer.table': required when scorer.kind is oracle-table");
}

}  // namespace igsearch
