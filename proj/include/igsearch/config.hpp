#pragma once

#include "igsearch/grpo.hpp"
#include "igsearch/ig.hpp"
#include "igsearch/world.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace igsearch {

struct RunConfig {
    // ig.*
    bool ig_enabled = true;
    double alpha = 0.3;
    double delta = 0.5;
    double lambda = 0.1;
    double eta = 3.0;
    std::size_t n_counterfactual = 3;
    BaselineMode baseline = BaselineMode::RandomDocsRefine;
    ModulationScope scope = ModulationScope::QueryOnly;
    bool length_norm = true;
    bool dead_zone = true;
    bool clip = true;

    // grpo.*
    std::size_t group_size = 5;
    double epsilon = 0.2;
    double beta = 0.001;
    double lr = 20.0;

    // env.*
    std::size_t k = 3;
    std::size_t t_max = 5;
    std::array<std::size_t, kMaxHops> train_counts{50, 50, 20};
    std::array<std::size_t, kMaxHops> eval_counts{17, 17, 6};
    double distractor_ratio = 2.0;
    std::size_t generic_docs = 24;
    std::size_t generic_length = 200;
    std::size_t first_names = 30;
    std::size_t last_names = 30;
    std::uint64_t world_seed = 7;

    // policy.*
    bool long_query = true;

    // scorer.*
    std::string scorer = "copy";  // copy | oracle-table
    std::string scorer_table;     // path for oracle-table: "value<TAB>context" lines
    double mu = 0.9;
    std::size_t vocab_size = 0;  // 0: world vocabulary size
    std::size_t max_context = kMaxContextTokens;

    // train.*
    std::size_t iterations = 300;
    std::size_t batch_size = 16;
    std::size_t eval_every = 25;
    std::size_t checkpoint_every = 50;
    double w_ret = 1.0;
    std::uint64_t seed = 1;

    double effective_alpha() const { return ig_enabled ? alpha : 0.0; }
    WorldSpec world_spec() const;
    StabilizeParams stabilize_params() const { return {delta, lambda, eta, dead_zone, clip}; }
    ModulationParams modulation_params() const { return {effective_alpha(), scope, length_norm}; }
};

// Every recognised key, in a stable order.
const std::vector<std::string>& config_keys();

// Sets one dotted key from text. Unknown keys and malformed values raise
// ConfigInvalid naming the key.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

// Flat "key = value" lines; '#' starts a comment.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin = "config");
RunConfig load_config(const std::string& path);  // "default" gives the built-in defaults
std::string render_config(const RunConfig& config);

// Range checks; raises InvalidHyperparam or ConfigInvalid.
void validate(const RunConfig& config);

}  // namespace igsearch
