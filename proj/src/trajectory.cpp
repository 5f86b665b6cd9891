#include "igsearch/trajectory.hpp"

#include "igsearch/errors.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <ostream>

namespace igsearch {

namespace {

constexpr std::array<SegmentKind, 5> kAllKinds = {SegmentKind::Think, SegmentKind::Search,
                                                  SegmentKind::Documents, SegmentKind::Refine,
                                                  SegmentKind::Answer};

std::string open_tag(SegmentKind kind) { return std::string("<") + tag_name(kind) + ">"; }
std::string close_tag(SegmentKind kind) { return std::string("</") + tag_name(kind) + ">"; }

bool all_space(std::string_view s) { return std::all_of(s.begin(), s.end(), is_space); }

bool contains_tag(std::string_view s) {
    if (s.find('<') == std::string_view::npos) return false;
    for (auto kind : kAllKinds) {
        if (s.find(open_tag(kind)) != std::string_view::npos) return true;
        if (s.find(close_tag(kind)) != std::string_view::npos) return true;
    }
    return false;
}

bool is_doc_marker(const Token& t) {
    if (t.size() < 3 || t.front() != '[' || t.back() != ']') return false;
    return std::all_of(t.begin() + 1, t.end() - 1, [](char c) { return c >= '0' && c <= '9'; });
}

// Grammar states for the segment sequence.
enum class Expect { Free, Documents, Refine, Done };

}  // namespace

const char* tag_name(SegmentKind kind) {
    switch (kind) {
        case SegmentKind::Think: return "think";
        case SegmentKind::Search: return "search";
        case SegmentKind::Documents: return "documents";
        case SegmentKind::Refine: return "refine";
        case SegmentKind::Answer: return "answer";
    }
    return "?";
}

TokenRole role_of(SegmentKind kind) {
    switch (kind) {
        case SegmentKind::Think: return TokenRole::Think;
        case SegmentKind::Search: return TokenRole::Query;
        case SegmentKind::Documents: return TokenRole::Documents;
        case SegmentKind::Refine: return TokenRole::Refine;
        case SegmentKind::Answer: return TokenRole::Answer;
    }
    return TokenRole::Think;
}

Trajectory Trajectory::assemble(std::vector<Segment> segments, std::string trailing,
                                const ParseOptions& options) {
    Trajectory t;
    t.trailing_ = std::move(trailing);
    if (!all_space(t.trailing_)) throw MalformedTag("non-whitespace text after the last segment");

    Expect expect = Expect::Free;
    SearchStep pending;
    std::size_t position = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        Segment& seg = segments[i];
        if (!all_space(seg.leading)) throw MalformedTag("non-whitespace text between segments");
        if (contains_tag(seg.raw)) throw MalformedTag(std::string("nested tag inside <") + tag_name(seg.kind) + ">");
        seg.tokens = tokenize(seg.raw);

        switch (seg.kind) {
            case SegmentKind::Think:
                if (expect == Expect::Documents) throw OrderViolation("<think> between <search> and <documents>");
                if (expect == Expect::Done) throw OrderViolation("segment after <answer>");
                break;
            case SegmentKind::Search:
                if (expect == Expect::Documents || expect == Expect::Refine)
                    throw OrderViolation("<search> before the previous step's documents and refine");
                if (expect == Expect::Done) throw OrderViolation("segment after <answer>");
                if (seg.tokens.empty()) throw MalformedTag("empty <search> query");
                if (options.strict && t.steps_.size() >= options.max_searches)
                    throw TooManySearches("more than " + std::to_string(options.max_searches) + " searches");
                pending = SearchStep{};
                pending.index = t.steps_.size();
                pending.search_segment = i;
                pending.query = seg.tokens;
                expect = Expect::Documents;
                break;
            case SegmentKind::Documents:
                if (expect != Expect::Documents) throw OrderViolation("<documents> without a preceding <search>");
                pending.documents_segment = i;
                pending.docs = split_documents(seg.tokens);
                expect = Expect::Refine;
                break;
            case SegmentKind::Refine:
                if (expect != Expect::Refine) throw OrderViolation("<refine> without preceding <documents>");
                pending.refine_segment = i;
                pending.refine = seg.tokens;
                t.steps_.push_back(std::move(pending));
                expect = Expect::Free;
                break;
            case SegmentKind::Answer:
                if (expect == Expect::Done) throw OrderViolation("second <answer>");
                if (expect != Expect::Free) throw OrderViolation("<answer> inside an unfinished search step");
                t.answer_ = seg.tokens;
                expect = Expect::Done;
                break;
        }

        t.offsets_.push_back(position);
        position += seg.tokens.size();
        t.roles_.insert(t.roles_.end(), seg.tokens.size(), role_of(seg.kind));
    }
    if (expect == Expect::Documents || expect == Expect::Refine)
        throw OrderViolation("transcript ends inside an unfinished search step");

    t.segments_ = std::move(segments);
    return t;
}

std::size_t Trajectory::segment_of(std::size_t position) const {
    if (position >= roles_.size()) throw std::out_of_range("token position out of range");
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), position);
    std::size_t seg = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    // Skip empty segments sharing the same offset.
    while (segments_[seg].tokens.empty() && seg + 1 < segments_.size()) ++seg;
    return seg;
}

const Token& Trajectory::token_at(std::size_t position) const {
    const std::size_t seg = segment_of(position);
    return segments_[seg].tokens[position - offsets_[seg]];
}

std::vector<std::size_t> Trajectory::think_segments_of_step(std::size_t step) const {
    if (step >= steps_.size()) throw NoSuchStep("step " + std::to_string(step));
    const std::size_t begin = step == 0 ? 0 : steps_[step - 1].refine_segment + 1;
    std::vector<std::size_t> out;
    for (std::size_t i = begin; i < steps_[step].search_segment; ++i)
        if (segments_[i].kind == SegmentKind::Think) out.push_back(i);
    return out;
}

Trajectory parse_transcript(std::string_view text, const ParseOptions& options) {
    std::vector<Segment> segments;
    std::size_t pos = 0;
    while (true) {
        const std::size_t lt = text.find('<', pos);
        if (lt == std::string_view::npos) {
            return Trajectory::assemble(std::move(segments), std::string(text.substr(pos)), options);
        }
        const std::string_view gap = text.substr(pos, lt - pos);
        if (!all_space(gap)) throw MalformedTag("text outside of tags at offset " + std::to_string(pos));

        std::optional<SegmentKind> kind;
        for (auto k : kAllKinds) {
            if (text.substr(lt).starts_with(open_tag(k))) {
                kind = k;
                break;
            }
        }
        if (!kind) {
            for (auto k : kAllKinds)
                if (text.substr(lt).starts_with(close_tag(k)))
                    throw MalformedTag(std::string("unexpected closing tag </") + tag_name(k) + ">");
            throw MalformedTag("unknown tag at offset " + std::to_string(lt));
        }

        const std::size_t content = lt + open_tag(*kind).size();
        const std::string close = close_tag(*kind);
        const std::size_t end = text.find(close, content);
        if (end == std::string_view::npos) throw MalformedTag(std::string("unclosed <") + tag_name(*kind) + ">");

        Segment seg;
        seg.kind = *kind;
        seg.leading = std::string(gap);
        seg.raw = std::string(text.substr(content, end - content));
        seg.span = {content, end};
        segments.push_back(std::move(seg));
        pos = end + close.size();
    }
}

std::string serialize(const Trajectory& trajectory) {
    std::string out;
    for (const auto& seg : trajectory.segments()) {
        out += seg.leading;
        out += open_tag(seg.kind);
        out += seg.raw;
        out += close_tag(seg.kind);
    }
    out += trajectory.trailing();
    return out;
}

std::vector<std::size_t> query_token_positions(const Trajectory& trajectory, std::size_t step) {
    if (step >= trajectory.steps().size())
        throw NoSuchStep("step " + std::to_string(step) + " of " + std::to_string(trajectory.steps().size()));
    const std::size_t seg = trajectory.steps()[step].search_segment;
    const std::size_t begin = trajectory.segment_offset(seg);
    std::vector<std::size_t> out(trajectory.segments()[seg].tokens.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = begin + i;
    return out;
}

Tokens render_documents(const std::vector<Tokens>& docs) {
    Tokens out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        out.push_back("[" + std::to_string(i + 1) + "]");
        out.insert(out.end(), docs[i].begin(), docs[i].end());
    }
    return out;
}

std::vector<Tokens> split_documents(const Tokens& tokens) {
    std::vector<Tokens> docs;
    for (const auto& tok : tokens) {
        if (is_doc_marker(tok)) {
            docs.emplace_back();
        } else {
            if (docs.empty()) docs.emplace_back();
            docs.back().push_back(tok);
        }
    }
    return docs;
}

TrajectoryBuilder& TrajectoryBuilder::add(SegmentKind kind, const Tokens& tokens) {
    Segment seg;
    seg.kind = kind;
    seg.leading = segments_.empty() ? "" : "\n";
    seg.raw = tokens.empty() ? std::string() : " " + join(tokens) + " ";
    const std::size_t content = cursor_ + seg.leading.size() + std::string_view(tag_name(kind)).size() + 2;
    seg.span = {content, content + seg.raw.size()};
    cursor_ = seg.span.end + std::string_view(tag_name(kind)).size() + 3;
    segments_.push_back(std::move(seg));
    return *this;
}

Trajectory TrajectoryBuilder::build(const ParseOptions& options) const {
    return Trajectory::assemble(segments_, std::string(), options);
}

std::string escape_line(std::string_view transcript) {
    std::string out;
    out.reserve(transcript.size());
    for (char c : transcript) {
        if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    return out;
}

std::string unescape_line(std::string_view line) {
    std::string out;
    out.reserve(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && i + 1 < line.size()) {
            const char next = line[++i];
            if (next == 'n') out += '\n';
            else if (next == '\\') out += '\\';
            else throw MalformedTag(std::string("bad escape \\") + next + " in archive line");
        } else {
            out += line[i];
        }
    }
    return out;
}

void write_archive(std::ostream& out, const std::vector<Trajectory>& trajectories) {
    for (const auto& t : trajectories) out << escape_line(serialize(t)) << '\n';
}

std::vector<Trajectory> read_archive(std::istream& in, const ParseOptions& options) {
    std::vector<Trajectory> out;
    std::string line;
    while (std::getline(in, line)) out.push_back(parse_transcript(unescape_line(line), options));
    return out;
}

}  // namespace igsearch
