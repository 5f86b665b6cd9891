#pragma once

#include "igsearch/tokenize.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace igsearch {

constexpr int kMaxHops = 3;

struct Entity {
    std::size_t id = 0;
    Tokens name;  // "First Last"
};

struct Fact {
    std::size_t id = 0;
    std::size_t subject = 0;
    std::string relation;
    std::size_t object = 0;
};

enum class DocKind { Fact, Distractor, Generic };

struct Document {
    std::size_t id = 0;
    Tokens tokens;
    DocKind kind = DocKind::Distractor;
    std::optional<std::size_t> fact;  // source fact for DocKind::Fact
};

enum class Split { Train, Eval };

struct Question {
    std::size_t id = 0;
    Tokens tokens;
    int hops = 1;
    std::size_t subject = 0;             // entity the chain starts from
    std::vector<std::string> relations;  // r_1 .. r_h, innermost first
    std::vector<std::size_t> chain;      // supporting fact ids, hop order
    std::size_t answer = 0;              // answer entity id
    std::vector<Tokens> aliases;         // 1..3 surface forms, aliases[0] is the plain name
    Split split = Split::Train;
};

struct WorldSpec {
    std::array<std::size_t, kMaxHops> train_counts{50, 50, 20};
    std::array<std::size_t, kMaxHops> eval_counts{0, 0, 0};
    double distractor_ratio = 2.0;
    std::size_t generic_docs = 24;
    std::size_t generic_length = 200;  // filler tokens per generic doc
    std::size_t first_names = 30;
    std::size_t last_names = 30;
    std::size_t max_entities = 0;  // 0: first_names * last_names
};

class World {
public:
    std::uint64_t seed = 0;
    WorldSpec spec;
    std::vector<Entity> entities;
    std::vector<Fact> facts;
    std::vector<Document> corpus;
    std::vector<Question> questions;

    const Tokens& name(std::size_t entity) const { return entities.at(entity).name; }
    std::vector<std::size_t> questions_in(Split split) const;

    // Every token that can appear in a scoring context: corpus, questions,
    // aliases, policy templates, tags and document markers.
    const std::vector<Token>& vocabulary() const;
    bool is_entity_token(const Token& t) const;
    bool is_relation_token(const Token& t) const;
    // Entity whose name starts at tokens[i], if any.
    std::optional<std::size_t> entity_at(const Tokens& tokens, std::size_t i) const;

    // Inverted index: token -> ascending doc ids containing it.
    const std::vector<std::size_t>& postings(const Token& t) const;
    // Number of distinct tokens per document.
    std::size_t doc_distinct(std::size_t doc) const { return distinct_.at(doc); }

    // Rebuilds lookup tables; called by the generator and the reader.
    void index();

private:
    std::unordered_map<Token, std::vector<std::size_t>> postings_;
    std::unordered_map<std::string, std::size_t> name_lookup_;  // "First Last" -> entity
    std::unordered_map<Token, int> token_class_;                // 1 entity, 2 relation
    std::vector<std::size_t> distinct_;
    std::vector<Token> vocabulary_;
};

// Fixed word lists shared by the generator and the policy templates.
const std::vector<std::string>& relation_words();
const std::vector<std::string>& first_name_pool();
const std::vector<std::string>& last_name_pool();
const std::vector<std::string>& vague_words();
const std::vector<std::string>& generic_words();
const std::vector<std::string>& filler_words();
const std::vector<std::string>& honorifics();
const Tokens& think_search_tokens();
const Tokens& think_answer_tokens();
constexpr std::size_t kMaxRetrievalDepth = 10;

World generate_world(std::uint64_t seed, const WorldSpec& spec);

void write_world(std::ostream& out, const World& world);
World read_world(std::istream& in);
void save_world(const std::string& path, const World& world);
World load_world(const std::string& path);

enum class RetrievalMode { TopK, BottomK };

struct RetrievalResult {
    std::vector<std::size_t> docs;
    std::vector<double> scores;
    std::size_t k = 0;
};

// Normalized overlap: |distinct(query) ∩ doc| / |distinct(query)|.
double overlap_score(const World& world, const Tokens& query, std::size_t doc);

RetrievalResult retrieve(const World& world, const Tokens& query, std::size_t k,
                         RetrievalMode mode = RetrievalMode::TopK);

}  // namespace igsearch
