#include "igsearch/world.hpp"

#include "igsearch/errors.hpp"
#include "igsearch/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

namespace igsearch {

using nlohmann::json;

const std::vector<std::string>& relation_words() {
    static const std::vector<std::string> w = {"father",  "mother",   "mentor",  "founder", "spouse",
                                               "employer", "teacher", "rival",   "sibling", "partner",
                                               "advisor",  "successor"};
    return w;
}

const std::vector<std::string>& first_name_pool() {
    static const std::vector<std::string> w = {
        "Anna",  "Bruno", "Clara", "Dmitri", "Elena",  "Felix", "Greta", "Hugo",  "Ines",   "Jonas",
        "Karin", "Lukas", "Marta", "Nils",   "Olga",   "Pavel", "Rosa",  "Simon", "Tilda",  "Urban",
        "Vera",  "Walter", "Xenia", "Yannick", "Zora", "Anton", "Berta", "Carl",  "Dora",   "Emil",
        "Frida", "Gustav", "Helga", "Ivo",   "Julia",  "Kurt",  "Lena",  "Max",   "Nora",   "Otto"};
    return w;
}

const std::vector<std::string>& last_name_pool() {
    static const std::vector<std::string> w = {
        "Kowal",  "Berg",    "Lindqvist", "Moreau", "Novak",   "Ortega", "Petrov", "Quist",  "Rossi",
        "Schulz", "Tanaka",  "Ulrich",    "Varga",  "Weber",   "Yilmaz", "Zeller", "Albers", "Brandt",
        "Costa",  "Dahl",    "Engel",     "Fischer", "Gruber", "Haas",   "Iversen", "Jansen", "Keller",
        "Lorenz", "Meyer",   "Nagy",      "Olsen",  "Pohl",    "Richter", "Sauer", "Thiel",  "Vogel",
        "Winter", "Zimmer",  "Hahn",      "Roth"};
    return w;
}

const std::vector<std::string>& vague_words() {
    static const std::vector<std::string> w = {"best", "facts", "information", "about", "things"};
    return w;
}

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> w = {"please", "kindly",    "find",   "out",       "exactly",
                                               "precisely", "really", "truly", "definitely"};
    return w;
}

const std::vector<std::string>& generic_words() {
    static const std::vector<std::string> w = {"general", "knowledge", "topics", "various", "notes",  "common",
                                               "trivia",  "records",   "lists",  "items",   "misc",   "assorted",
                                               "digest",  "overview",  "summary", "archive", "entries", "miscellany"};
    return w;
}

const std::vector<std::string>& honorifics() {
    static const std::vector<std::string> w = {"Dr", "Prof"};
    return w;
}

const Tokens& think_search_tokens() {
    static const Tokens t = {"let", "me", "look", "it", "up"};
    return t;
}

const Tokens& think_answer_tokens() {
    static const Tokens t = {"i", "will", "answer", "now"};
    return t;
}

namespace {

std::string name_key(const Tokens& name) { return join(name); }

Tokens fact_doc_tokens(const Tokens& s, const std::string& r, const Tokens& o, const Tokens* mention) {
    Tokens d = {"the", r, "of"};
    d.insert(d.end(), s.begin(), s.end());
    d.push_back("is");
    d.insert(d.end(), o.begin(), o.end());
    d.push_back(".");
    if (mention) {
        d.insert(d.end(), o.begin(), o.end());
        d.insert(d.end(), {"is", "linked", "to"});
        d.insert(d.end(), mention->begin(), mention->end());
        d.push_back(".");
    }
    return d;
}

Tokens question_tokens(const Tokens& subject, const std::vector<std::string>& relations) {
    Tokens q = {"who", "is"};
    for (auto it = relations.rbegin(); it != relations.rend(); ++it) q.insert(q.end(), {"the", *it, "of"});
    q.insert(q.end(), subject.begin(), subject.end());
    q.push_back("?");
    return q;
}

// Keys "first|last|relation" for every first/last/relation combination a doc contains.
std::vector<std::string> doc_triples(const Tokens& doc, const std::unordered_set<std::string>& firsts,
                                     const std::unordered_set<std::string>& lasts,
                                     const std::unordered_set<std::string>& relations) {
    std::set<std::string> f, l, r;
    for (const auto& t : doc) {
        if (firsts.count(t)) f.insert(t);
        else if (lasts.count(t)) l.insert(t);
        else if (relations.count(t)) r.insert(t);
    }
    std::vector<std::string> out;
    for (const auto& a : f)
        for (const auto& b : l)
            for (const auto& c : r) out.push_back(a + "|" + b + "|" + c);
    return out;
}

std::uint64_t fnv1a(const Tokens& tokens, std::uint64_t salt) {
    std::uint64_t h = 1469598103934665603ULL ^ salt;
    for (const auto& t : tokens) {
        for (unsigned char c : t) h = (h ^ c) * 1099511628211ULL;
        h = (h ^ 0x1f) * 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::vector<std::size_t> World::questions_in(Split split) const {
    std::vector<std::size_t> out;
    for (const auto& q : questions)
        if (q.split == split) out.push_back(q.id);
    return out;
}

const std::vector<Token>& World::vocabulary() const { return vocabulary_; }

bool World::is_entity_token(const Token& t) const {
    auto it = token_class_.find(t);
    return it != token_class_.end() && it->second == 1;
}

bool World::is_relation_token(const Token& t) const {
    auto it = token_class_.find(t);
    return it != token_class_.end() && it->second == 2;
}

std::optional<std::size_t> World::entity_at(const Tokens& tokens, std::size_t i) const {
    if (i + 1 >= tokens.size()) return std::nullopt;
    auto it = name_lookup_.find(tokens[i] + " " + tokens[i + 1]);
    if (it == name_lookup_.end()) return std::nullopt;
    return it->second;
}

const std::vector<std::size_t>& World::postings(const Token& t) const {
    static const std::vector<std::size_t> empty;
    auto it = postings_.find(t);
    return it == postings_.end() ? empty : it->second;
}

void World::index() {
    postings_.clear();
    name_lookup_.clear();
    token_class_.clear();
    distinct_.assign(corpus.size(), 0);
    std::set<Token> vocab;
    for (const auto& d : corpus) {
        std::set<Token> uniq(d.tokens.begin(), d.tokens.end());
        distinct_[d.id] = uniq.size();
        for (const auto& t : uniq) postings_[t].push_back(d.id);
        vocab.insert(uniq.begin(), uniq.end());
    }
    for (const auto& e : entities) name_lookup_[name_key(e.name)] = e.id;
    for (const auto& w : first_name_pool()) token_class_[w] = 1;
    for (const auto& w : last_name_pool()) token_class_[w] = 1;
    for (const auto& w : relation_words()) token_class_[w] = 2;

    for (const auto& q : questions) {
        vocab.insert(q.tokens.begin(), q.tokens.end());
        for (const auto& a : q.aliases) vocab.insert(a.begin(), a.end());
    }
    for (const auto* list : {&relation_words(), &first_name_pool(), &last_name_pool(), &vague_words(),
                             &filler_words(), &generic_words(), &honorifics()})
        vocab.insert(list->begin(), list->end());
    vocab.insert(think_search_tokens().begin(), think_search_tokens().end());
    vocab.insert(think_answer_tokens().begin(), think_answer_tokens().end());
    for (const char* tag : {"think", "search", "documents", "refine", "answer"}) {
        vocab.insert(std::string("<") + tag + ">");
        vocab.insert(std::string("</") + tag + ">");
    }
    for (std::size_t i = 1; i <= kMaxRetrievalDepth; ++i) vocab.insert("[" + std::to_string(i) + "]");
    vocabulary_.assign(vocab.begin(), vocab.end());
}

World generate_world(std::uint64_t seed, const WorldSpec& spec) {
    if (spec.distractor_ratio < 0 || !std::isfinite(spec.distractor_ratio))
        throw SpecInfeasible("distractor ratio must be a finite value >= 0");
    if (spec.first_names < 1 || spec.first_names > first_name_pool().size() || spec.last_names < 1 ||
        spec.last_names > last_name_pool().size())
        throw SpecInfeasible("name pool sizes out of range");
    std::size_t total_questions = 0, needed = 0;
    for (int h = 0; h < kMaxHops; ++h) {
        const std::size_t n = spec.train_counts[h] + spec.eval_counts[h];
        total_questions += n;
        needed += n * static_cast<std::size_t>(h + 2);
    }
    if (total_questions == 0) throw SpecInfeasible("world needs at least one question");
    const std::size_t pool = spec.first_names * spec.last_names;
    const std::size_t cap = spec.max_entities == 0 ? pool : std::min(pool, spec.max_entities);
    for (int h = 0; h < kMaxHops; ++h)
        if (spec.train_counts[h] + spec.eval_counts[h] > 0 && static_cast<std::size_t>(h + 2) > cap)
            throw SpecInfeasible(std::to_string(h + 1) + "-hop chains need " + std::to_string(h + 2) +
                                 " entities, pool has " + std::to_string(cap));
    // Chains use fresh entities; distractors need at least two spare names.
    if (needed > cap || (spec.distractor_ratio > 0 && needed + 2 > pool))
        throw SpecInfeasible("requested chains need " + std::to_string(needed) + " entities, pool allows " +
                             std::to_string(cap));
    if (relation_words().size() < static_cast<std::size_t>(kMaxHops))
        throw SpecInfeasible("not enough relations");

    World w;
    w.seed = seed;
    w.spec = spec;
    Rng rng(derive_seed(seed, {0x776f726c64ULL}));

    const std::vector<std::string> firsts(first_name_pool().begin(), first_name_pool().begin() + spec.first_names);
    const std::vector<std::string> lasts(last_name_pool().begin(), last_name_pool().begin() + spec.last_names);
    const std::unordered_set<std::string> first_set(firsts.begin(), firsts.end());
    const std::unordered_set<std::string> last_set(lasts.begin(), lasts.end());
    const std::unordered_set<std::string> rel_set(relation_words().begin(), relation_words().end());

    std::unordered_set<std::string> used_names;
    std::unordered_set<std::string> oracle_triples;   // query keys of every fact
    std::unordered_set<std::string> present_triples;  // keys contained in some doc
    const auto& rels = relation_words();

    auto random_name = [&] { return Tokens{firsts[rng.below(firsts.size())], lasts[rng.below(lasts.size())]}; };

    struct PendingDoc {
        Tokens tokens;
        std::optional<std::size_t> fact;
        DocKind kind;
    };
    std::vector<PendingDoc> docs;

    for (int split = 0; split < 2; ++split) {
        const auto& counts = split == 0 ? spec.train_counts : spec.eval_counts;
        for (int h = 1; h <= kMaxHops; ++h) {
            for (std::size_t qi = 0; qi < counts[h - 1]; ++qi) {
                bool placed = false;
                for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
                    // Fresh, distinct entity names for the chain.
                    std::vector<Tokens> names;
                    std::unordered_set<std::string> local;
                    bool ok = true;
                    for (int j = 0; j <= h && ok; ++j) {
                        Tokens n;
                        int tries = 0;
                        do {
                            n = random_name();
                        } while ((used_names.count(name_key(n)) || local.count(name_key(n))) && ++tries < 200);
                        if (tries >= 200) ok = false;
                        local.insert(name_key(n));
                        names.push_back(n);
                    }
                    if (!ok) continue;
                    // Distinct relations within a chain.
                    std::vector<std::string> chain_rels;
                    while (chain_rels.size() < static_cast<std::size_t>(h)) {
                        const auto& r = rels[rng.below(rels.size())];
                        if (std::find(chain_rels.begin(), chain_rels.end(), r) == chain_rels.end())
                            chain_rels.push_back(r);
                    }
                    std::vector<Tokens> chain_docs;
                    std::vector<std::string> chain_oracles;
                    for (int j = 0; j < h; ++j) {
                        const Tokens* mention = j + 1 < h ? &names[j + 2] : nullptr;
                        chain_docs.push_back(fact_doc_tokens(names[j], chain_rels[j], names[j + 1], mention));
                        chain_oracles.push_back(names[j][0] + "|" + names[j][1] + "|" + chain_rels[j]);
                    }
                    // No other document may contain every token of a fact's oracle query.
                    for (int j = 0; j < h && ok; ++j) {
                        if (present_triples.count(chain_oracles[j]) || oracle_triples.count(chain_oracles[j])) ok = false;
                        for (const auto& key : doc_triples(chain_docs[j], first_set, last_set, rel_set)) {
                            if (oracle_triples.count(key)) ok = false;
                            for (int jj = 0; jj < h; ++jj)
                                if (jj != j && key == chain_oracles[jj]) ok = false;
                        }
                    }
                    if (!ok) continue;

                    std::vector<std::size_t> ids;
                    for (const auto& n : names) {
                        Entity e{w.entities.size(), n};
                        used_names.insert(name_key(n));
                        ids.push_back(e.id);
                        w.entities.push_back(std::move(e));
                    }
                    Question q;
                    q.id = w.questions.size();
                    q.hops = h;
                    q.subject = ids[0];
                    q.relations = chain_rels;
                    q.answer = ids[h];
                    q.split = split == 0 ? Split::Train : Split::Eval;
                    for (int j = 0; j < h; ++j) {
                        Fact f{w.facts.size(), ids[j], chain_rels[j], ids[j + 1]};
                        q.chain.push_back(f.id);
                        w.facts.push_back(f);
                        docs.push_back({chain_docs[j], f.id, DocKind::Fact});
                        oracle_triples.insert(chain_oracles[j]);
                        for (const auto& key : doc_triples(chain_docs[j], first_set, last_set, rel_set))
                            present_triples.insert(key);
                    }
                    q.tokens = question_tokens(names[0], chain_rels);
                    const std::size_t n_alias = 1 + rng.below(3);
                    q.aliases.push_back(names[h]);
                    for (std::size_t a = 1; a < n_alias; ++a) {
                        Tokens alias = {honorifics()[a - 1]};
                        alias.insert(alias.end(), names[h].begin(), names[h].end());
                        q.aliases.push_back(alias);
                    }
                    w.questions.push_back(std::move(q));
                    placed = true;
                }
                if (!placed) throw SpecInfeasible("could not place a non-ambiguous chain; enlarge the name pools");
            }
        }
    }

    // Distractors: relation statements between names that are not chain entities.
    const std::size_t n_fact_docs = docs.size();
    const auto n_distractors = static_cast<std::size_t>(std::ceil(spec.distractor_ratio * static_cast<double>(n_fact_docs)));
    for (std::size_t i = 0; i < n_distractors; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
            const Tokens a = random_name(), b = random_name();
            if (name_key(a) == name_key(b) || used_names.count(name_key(a)) || used_names.count(name_key(b))) continue;
            const Tokens d = fact_doc_tokens(a, rels[rng.below(rels.size())], b, nullptr);
            bool ok = true;
            for (const auto& key : doc_triples(d, first_set, last_set, rel_set))
                if (oracle_triples.count(key)) ok = false;
            if (!ok) continue;
            docs.push_back({d, std::nullopt, DocKind::Distractor});
            placed = true;
        }
        if (!placed) throw SpecInfeasible("could not place a distractor; enlarge the name pools");
    }

    // Generic documents answer the vague templates: long, on no topic, and
    // free of names.
    for (std::size_t i = 0; i < spec.generic_docs; ++i) {
        Tokens d = {"the", "best", "facts", "and", "information", "about", "things", ":"};
        for (std::size_t j = 0; j < spec.generic_length; ++j) d.push_back(generic_words()[rng.below(generic_words().size())]);
        d.push_back(".");
        docs.push_back({d, std::nullopt, DocKind::Generic});
    }

    // Shuffle so document ids carry no information about their kind.
    for (std::size_t i = docs.size(); i > 1; --i) std::swap(docs[i - 1], docs[rng.below(i)]);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        w.corpus.push_back(Document{i, std::move(docs[i].tokens), docs[i].kind, docs[i].fact});
    }
    w.index();
    return w;
}

double overlap_score(const World& world, const Tokens& query, std::size_t doc) {
    if (query.empty()) throw EmptyQuery("query has no tokens");
    const std::set<Token> q(query.begin(), query.end());
    const auto& d = world.corpus.at(doc).tokens;
    const std::set<Token> dset(d.begin(), d.end());
    std::size_t hit = 0;
    for (const auto& t : q) hit += dset.count(t);
    return static_cast<double>(hit) / static_cast<double>(q.size());
}

RetrievalResult retrieve(const World& world, const Tokens& query, std::size_t k, RetrievalMode mode) {
    if (query.empty()) throw EmptyQuery("query has no tokens");
    if (k == 0) throw InvalidHyperparam("retrieval depth k must be >= 1");
    std::vector<Token> q(query.begin(), query.end());
    std::sort(q.begin(), q.end());
    q.erase(std::unique(q.begin(), q.end()), q.end());

    std::unordered_map<std::size_t, std::size_t> hits;
    for (const auto& t : q)
        for (auto d : world.postings(t)) ++hits[d];
    std::vector<std::pair<std::size_t, std::size_t>> scored(hits.begin(), hits.end());  // (doc, hits)

    const double denom = static_cast<double>(q.size());
    const std::size_t n = world.corpus.size();
    RetrievalResult r;
    r.k = k;
    const std::size_t want = std::min(k, n);
    std::vector<bool> taken;

    if (mode == RetrievalMode::TopK) {
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        for (std::size_t i = 0; i < scored.size() && r.docs.size() < want; ++i) {
            r.docs.push_back(scored[i].first);
            r.scores.push_back(static_cast<double>(scored[i].second) / denom);
        }
        // Zero-score docs in ascending id order when fewer than k share a token.
        for (std::size_t d = 0; d < n && r.docs.size() < want; ++d) {
            if (hits.count(d)) continue;
            r.docs.push_back(d);
            r.scores.push_back(0.0);
        }
        return r;
    }

    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    for (std::size_t i = 0; i < scored.size() && r.docs.size() < want; ++i) {
        r.docs.push_back(scored[i].first);
        r.scores.push_back(static_cast<double>(scored[i].second) / denom);
    }
    if (r.docs.size() < want) {
        std::vector<std::size_t> zero;
        for (std::size_t d = 0; d < n; ++d)
            if (!hits.count(d)) zero.push_back(d);
        Rng rng(mix_seed(fnv1a(q, k)));
        for (std::size_t i = 0; i < zero.size() && r.docs.size() < want; ++i) {
            std::swap(zero[i], zero[i + rng.below(zero.size() - i)]);
            r.docs.push_back(zero[i]);
            r.scores.push_back(0.0);
        }
    }
    return r;
}

namespace {

const char* kind_name(DocKind k) {
    switch (k) {
        case DocKind::Fact: return "fact";
        case DocKind::Distractor: return "distractor";
        case DocKind::Generic: return "generic";
    }
    return "?";
}

DocKind kind_from(const std::string& s) {
    if (s == "fact") return DocKind::Fact;
    if (s == "distractor") return DocKind::Distractor;
    if (s == "generic") return DocKind::Generic;
    throw IoError("unknown document kind '" + s + "'");
}

}  // namespace

void write_world(std::ostream& out, const World& w) {
    const auto& s = w.spec;
    out << json{{"section", "header"},
                {"format", "igsearch-world/1"},
                {"seed", w.seed},
                {"train_counts", s.train_counts},
                {"eval_counts", s.eval_counts},
                {"distractor_ratio", s.distractor_ratio},
                {"generic_docs", s.generic_docs},
                {"generic_length", s.generic_length},
                {"first_names", s.first_names},
                {"last_names", s.last_names},
                {"max_entities", s.max_entities}}
               .dump()
        << '\n';
    for (const auto& e : w.entities) out << json{{"section", "entity"}, {"id", e.id}, {"name", e.name}}.dump() << '\n';
    for (const auto& f : w.facts)
        out << json{{"section", "fact"}, {"id", f.id}, {"s", f.subject}, {"r", f.relation}, {"o", f.object}}.dump()
            << '\n';
    for (const auto& d : w.corpus) {
        json j{{"section", "doc"}, {"id", d.id}, {"kind", kind_name(d.kind)}, {"text", join(d.tokens)}};
        if (d.fact) j["fact"] = *d.fact;
        out << j.dump() << '\n';
    }
    for (const auto& q : w.questions) {
        json aliases = json::array();
        for (const auto& a : q.aliases) aliases.push_back(join(a));
        out << json{{"section", "question"},
                    {"id", q.id},
                    {"text", join(q.tokens)},
                    {"hops", q.hops},
                    {"subject", q.subject},
                    {"relations", q.relations},
                    {"chain", q.chain},
                    {"answer", q.answer},
                    {"aliases", aliases},
                    {"split", q.split == Split::Train ? "train" : "eval"}}
                   .dump()
            << '\n';
    }
}

World read_world(std::istream& in) {
    World w;
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const json j = json::parse(line);
            const std::string section = j.at("section");
            if (section == "header") {
                if (j.at("format") != "igsearch-world/1") throw IoError("unsupported world format");
                w.seed = j.at("seed");
                w.spec.train_counts = j.at("train_counts");
                w.spec.eval_counts = j.at("eval_counts");
                w.spec.distractor_ratio = j.at("distractor_ratio");
                w.spec.generic_docs = j.at("generic_docs");
                w.spec.generic_length = j.at("generic_length");
                w.spec.first_names = j.at("first_names");
                w.spec.last_names = j.at("last_names");
                w.spec.max_entities = j.at("max_entities");
                header = true;
            } else if (section == "entity") {
                w.entities.push_back(Entity{j.at("id"), j.at("name").get<Tokens>()});
            } else if (section == "fact") {
                w.facts.push_back(Fact{j.at("id"), j.at("s"), j.at("r"), j.at("o")});
            } else if (section == "doc") {
                Document d{j.at("id"), tokenize(j.at("text").get<std::string>()), kind_from(j.at("kind")), std::nullopt};
                if (j.contains("fact")) d.fact = j.at("fact").get<std::size_t>();
                w.corpus.push_back(std::move(d));
            } else if (section == "question") {
                Question q;
                q.id = j.at("id");
                q.tokens = tokenize(j.at("text").get<std::string>());
                q.hops = j.at("hops");
                q.subject = j.at("subject");
                q.relations = j.at("relations").get<std::vector<std::string>>();
                q.chain = j.at("chain").get<std::vector<std::size_t>>();
                q.answer = j.at("answer");
                for (const auto& a : j.at("aliases")) q.aliases.push_back(tokenize(a.get<std::string>()));
                q.split = j.at("split") == "train" ? Split::Train : Split::Eval;
                w.questions.push_back(std::move(q));
            } else {
                throw IoError("unknown section '" + section + "'");
            }
        }
    } catch (const json::exception& e) {
        throw IoError("world file line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!header) throw IoError("world file has no header");
    for (std::size_t i = 0; i < w.corpus.size(); ++i)
        if (w.corpus[i].id != i) throw IoError("document ids are not contiguous");
    for (std::size_t i = 0; i < w.questions.size(); ++i)
        if (w.questions[i].id != i) throw IoError("question ids are not contiguous");
    w.index();
    return w;
}

void save_world(const std::string& path, const World& world) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_world(out, world);
}

World load_world(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    return read_world(in);
}

}  // namespace igsearch
