#pragma once

#include "igsearch/tokenize.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace igsearch {

enum class SegmentKind { Think, Search, Documents, Refine, Answer };
enum class TokenRole { Think, Query, Documents, Refine, Answer };

const char* tag_name(SegmentKind kind);
TokenRole role_of(SegmentKind kind);
inline bool is_policy_role(TokenRole role) { return role != TokenRole::Documents; }

// Half-open byte offsets into the transcript.
struct CharSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct Segment {
    SegmentKind kind = SegmentKind::Think;
    std::string leading;  // whitespace before the opening tag, kept for round-trip
    std::string raw;      // exact bytes between the opening and closing tag
    Tokens tokens;        // tokenize(raw)
    CharSpan span;        // location of raw inside the transcript
};

struct SearchStep {
    std::size_t index = 0;
    std::size_t search_segment = 0;
    std::size_t documents_segment = 0;
    std::size_t refine_segment = 0;
    Tokens query;
    std::vector<Tokens> docs;
    Tokens refine;
};

struct ParseOptions {
    // Reject more than max_searches Search segments (training mode).
    bool strict = false;
    std::size_t max_searches = 5;
};

// An immutable structured rollout. Built either by parse_transcript or by
// TrajectoryBuilder; both go through the same grammar check.
class Trajectory {
public:
    Trajectory() = default;

    // Validates the segment grammar and derives steps, roles and offsets.
    static Trajectory assemble(std::vector<Segment> segments, std::string trailing,
                               const ParseOptions& options = {});

    const std::vector<Segment>& segments() const { return segments_; }
    const std::vector<SearchStep>& steps() const { return steps_; }
    const std::optional<Tokens>& answer() const { return answer_; }
    const std::vector<TokenRole>& token_roles() const { return roles_; }
    const std::string& trailing() const { return trailing_; }

    std::size_t token_count() const { return roles_.size(); }
    // First global token position of segment i.
    std::size_t segment_offset(std::size_t i) const { return offsets_[i]; }
    // Segment that owns global token position p.
    std::size_t segment_of(std::size_t position) const;
    const Token& token_at(std::size_t position) const;

    // Think segments that belong to step t: those after the previous step's
    // refine (or the start) and before the step's search.
    std::vector<std::size_t> think_segments_of_step(std::size_t step) const;

private:
    std::vector<Segment> segments_;
    std::string trailing_;
    std::vector<SearchStep> steps_;
    std::optional<Tokens> answer_;
    std::vector<TokenRole> roles_;
    std::vector<std::size_t> offsets_;
};

Trajectory parse_transcript(std::string_view text, const ParseOptions& options = {});
std::string serialize(const Trajectory& trajectory);

// Global token positions of the query of `step` (Q_t).
std::vector<std::size_t> query_token_positions(const Trajectory& trajectory, std::size_t step);

// Documents are rendered as "[1] tokens [2] tokens ..." inside one segment.
Tokens render_documents(const std::vector<Tokens>& docs);
std::vector<Tokens> split_documents(const Tokens& tokens);

// Appends segments in canonical form: "<tag> tok tok </tag>", one per line.
class TrajectoryBuilder {
public:
    TrajectoryBuilder& add(SegmentKind kind, const Tokens& tokens);
    Trajectory build(const ParseOptions& options = {}) const;

private:
    std::vector<Segment> segments_;
    std::size_t cursor_ = 0;
};

// Line-delimited archive, one transcript per line; backslash and newline are
// escaped as "\\" and "\n".
std::string escape_line(std::string_view transcript);
std::string unescape_line(std::string_view line);
void write_archive(std::ostream& out, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_archive(std::istream& in, const ParseOptions& options = {});

}  // namespace igsearch
