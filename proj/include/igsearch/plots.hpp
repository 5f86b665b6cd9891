#pragma once

#include <map>
#include <string>
#include <vector>

namespace igsearch {

// Histogram checkpoints; each maps to the nearest iteration with saved records.
inline constexpr std::size_t kHistogramTargets[] = {50, 100, 200};

// File name -> tab-separated table. Every table has one column group per run,
// labelled by the run directory's name. Fails with MissingMetrics when a run
// lacks metrics.jsonl, ig_records.jsonl or config.txt.
std::map<std::string, std::string> plot_tables(const std::vector<std::string>& run_dirs);

// Writes the tables under out_dir and returns the written paths.
std::vector<std::string> export_plots(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace igsearch
