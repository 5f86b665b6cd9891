#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace igsearch {

// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

struct AblationVariant {
    std::string name;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// The twelve-row ablation matrix, in output order.
const std::vector<AblationVariant>& ablation_matrix();

// Entry point: verbs gen-world, train, eval, ablate, export-plots.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace igsearch
