#include "igsearch/plots.hpp"

#include "igsearch/config.hpp"
#include "igsearch/errors.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace igsearch {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunData {
    std::string label;
    RunConfig config;
    std::vector<json> metrics;
    std::map<std::size_t, std::vector<double>> raw_ig;  // iteration -> raw IG values
};

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingMetrics("cannot read '" + path.string() + "'");
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw MissingMetrics(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

RunData load_run(const fs::path& dir) {
    RunData r;
    if (!fs::exists(dir / "config.txt")) throw MissingMetrics("no config.txt in '" + dir.string() + "'");
    r.config = load_config((dir / "config.txt").string());
    r.metrics = read_jsonl(dir / "metrics.jsonl");
    if (r.metrics.empty()) throw MissingMetrics("empty metrics.jsonl in '" + dir.string() + "'");
    for (const auto& rec : read_jsonl(dir / "ig_records.jsonl"))
        r.raw_ig[rec.at("iteration").get<std::size_t>()].push_back(rec.at("raw").get<double>());
    return r;
}

// Shortest path suffix that tells the runs apart.
void assign_labels(std::vector<RunData>& runs, const std::vector<std::string>& dirs) {
    for (std::size_t depth = 1; depth <= 8; ++depth) {
        std::set<std::string> seen;
        bool unique = true;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            fs::path p = fs::path(dirs[i]).lexically_normal();
            if (p.filename().empty()) p = p.parent_path();
            std::vector<std::string> parts;
            for (const auto& part : p) parts.push_back(part.string());
            std::string label;
            for (std::size_t k = parts.size() > depth ? parts.size() - depth : 0; k < parts.size(); ++k)
                label += (label.empty() ? "" : "/") + parts[k];
            runs[i].label = label;
            unique = seen.insert(label).second && unique;
        }
        if (unique) return;
    }
    for (std::size_t i = 0; i < runs.size(); ++i) runs[i].label = std::to_string(i) + ":" + runs[i].label;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string cell(const json& v) { return v.is_number() ? num(v.get<double>()) : "NA"; }

// One row per iteration seen in any run; runs without a value get NA.
std::string curve(const std::vector<RunData>& runs, const std::vector<std::string>& headers,
                  const std::function<std::vector<std::string>(const json&)>& extract, bool eval_only) {
    std::set<std::size_t> iterations;
    std::vector<std::map<std::size_t, std::vector<std::string>>> by_run(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (const auto& m : runs[i].metrics) {
            if (eval_only && m.at("eval").is_null()) continue;
            const auto it = m.at("iteration").get<std::size_t>();
            iterations.insert(it);
            by_run[i][it] = extract(m);
        }
    std::string out = "iteration";
    for (const auto& r : runs)
        for (const auto& h : headers) out += "\t" + r.label + (h.empty() ? "" : ":" + h);
    out += "\n";
    for (auto it : iterations) {
        out += std::to_string(it);
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto f = by_run[i].find(it);
            for (std::size_t h = 0; h < headers.size(); ++h) out += "\t" + (f == by_run[i].end() ? "NA" : f->second[h]);
        }
        out += "\n";
    }
    return out;
}

std::size_t nearest(const std::map<std::size_t, std::vector<double>>& recorded, std::size_t target) {
    std::size_t best = recorded.begin()->first;
    for (const auto& [it, v] : recorded) {
        const auto d = [&](std::size_t x) { return x > target ? x - target : target - x; };
        if (d(it) < d(best)) best = it;
    }
    return best;
}

// Bins of width delta/2 over [-2 eta, 2 eta] plus two overflow rows. Columns
// flag the dead-zone band and the bins holding -eta and +eta.
std::string histogram(const std::vector<RunData>& runs) {
    const RunConfig& ref = runs.front().config;
    const double width = ref.delta > 0.0 ? ref.delta / 2.0 : 0.25;
    const double lo = -2.0 * ref.eta, hi = 2.0 * ref.eta;
    const auto bins = static_cast<std::size_t>(std::ceil((hi - lo) / width - 1e-9));

    struct Column {
        std::string header;
        std::vector<std::size_t> counts;
    };
    std::vector<Column> cols;
    for (const auto& r : runs) {
        if (r.raw_ig.empty()) throw MissingMetrics("run '" + r.label + "' has no IG records");
        std::set<std::size_t> used;
        for (auto target : kHistogramTargets) {
            const std::size_t it = nearest(r.raw_ig, target);
            if (!used.insert(it).second) continue;
            Column c{r.label + ":iter" + std::to_string(it), std::vector<std::size_t>(bins + 2, 0)};
            for (double v : r.raw_ig.at(it)) {
                if (v < lo) ++c.counts[0];
                else if (v >= hi) ++c.counts[bins + 1];
                else ++c.counts[1 + std::min(bins - 1, static_cast<std::size_t>((v - lo) / width))];
            }
            cols.push_back(std::move(c));
        }
    }

    std::string out = "bin_lo\tbin_hi\tdead_zone\tminus_eta\tplus_eta";
    for (const auto& c : cols) out += "\t" + c.header;
    out += "\n";
    for (std::size_t b = 0; b < bins + 2; ++b) {
        const double a = b == 0 ? -INFINITY : lo + static_cast<double>(b - 1) * width;
        const double z = b == bins + 1 ? INFINITY : lo + static_cast<double>(b) * width;
        const bool dead = ref.dead_zone && a >= -ref.delta && z <= ref.delta;
        const bool minus = a <= -ref.eta && -ref.eta < z;
        const bool plus = a <= ref.eta && ref.eta < z;
        out += (std::isinf(a) ? std::string("-inf") : num(a)) + "\t" + (std::isinf(z) ? std::string("inf") : num(z));
        out += std::string("\t") + (dead ? "1" : "0") + "\t" + (minus ? "1" : "0") + "\t" + (plus ? "1" : "0");
        for (const auto& c : cols) out += "\t" + std::to_string(c.counts[b]);
        out += "\n";
    }
    return out;
}

}  // namespace

std::map<std::string, std::string> plot_tables(const std::vector<std::string>& run_dirs) {
    if (run_dirs.empty()) throw MissingMetrics("no run directories given");
    std::vector<RunData> runs;
    for (const auto& d : run_dirs) runs.push_back(load_run(d));
    assign_labels(runs, run_dirs);

    std::map<std::string, std::string> t;
    t["em_curve.tsv"] = curve(runs, {""}, [](const json& m) { return std::vector<std::string>{cell(m.at("eval_em"))}; }, true);
    t["search_quality_curve.tsv"] =
        curve(runs, {"train", "eval"},
              [](const json& m) {
                  return std::vector<std::string>{
                      cell(m.at("search_quality")),
                      m.at("eval").is_null() ? "NA" : cell(m.at("eval").at("search_quality"))};
              },
              false);
    t["ig_position_curve.tsv"] = curve(runs, {"ig0", "ig1", "ig2"},
                                       [](const json& m) {
                                           std::vector<std::string> out;
                                           for (const auto& v : m.at("ig_position")) out.push_back(cell(v));
                                           return out;
                                       },
                                       false);
    t["ig_histogram.tsv"] = histogram(runs);

    // Search frequency per lambda: the run label carries its lambda.
    std::vector<RunData> tagged = runs;
    for (auto& r : tagged) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", r.config.lambda);
        r.label += std::string(":lambda=") + buf;
    }
    t["search_frequency.tsv"] = curve(tagged, {"all", "single_hop", "multi_hop"},
                                      [](const json& m) {
                                          return std::vector<std::string>{cell(m.at("searches_per_rollout")),
                                                                          cell(m.at("searches_single_hop")),
                                                                          cell(m.at("searches_multi_hop"))};
                                      },
                                      false);
    return t;
}

std::vector<std::string> export_plots(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    const auto tables = plot_tables(run_dirs);
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    for (const auto& [name, text] : tables) {
        const fs::path p = fs::path(out_dir) / name;
        std::ofstream out(p, std::ios::binary);
        if (!out) throw IoError("cannot write '" + p.string() + "'");
        out << text;
        written.push_back(p.string());
    }
    return written;
}

}  // namespace igsearch
