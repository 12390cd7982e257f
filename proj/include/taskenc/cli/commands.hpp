#pragma once

#include "taskenc/cli/run_config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace taskenc::cli {

struct RunOverrides {
    std::optional<std::filesystem::path> out;
    std::size_t threads = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<HypothesisKind>> hypotheses;
    std::optional<std::vector<std::size_t>> learning_curve;
};

struct RunOutcome {
    std::filesystem::path out_dir;
    std::vector<std::pair<HypothesisKind, double>> ranking;  // best first
};

/// Writes the dataset described by a synth config. Returns the output directory.
std::filesystem::path cmd_synth(const std::filesystem::path& config, const std::filesystem::path& out,
                                std::optional<std::uint64_t> seed = std::nullopt);

RunOutcome cmd_run(const std::filesystem::path& config, const RunOverrides& overrides);
RunOutcome run_pipeline(const RunConfig& config, const std::filesystem::path& out_dir, std::size_t threads);

/// Paired t tests per window between every two result directories, one BH
/// family per pair. FoldMismatch when fold manifests differ.
void cmd_compare(const std::vector<std::filesystem::path>& result_dirs, const std::filesystem::path& out,
                 double fdr_q = 0.05);

/// Top-k attended features per task for each model and the attention
/// similarity of every model pair. KindError for models without attention.
void cmd_attention(const std::vector<std::filesystem::path>& model_dirs,
                   const std::optional<std::filesystem::path>& aux_questions, std::size_t k,
                   const std::filesystem::path& out);

/// Loads and aligns all configured data; returns a short human-readable report.
std::string cmd_ingest_check(const RunConfig& config);

/// Command-line entry point. Returns the process exit code.
int main_entry(int argc, char** argv);

} // namespace taskenc::cli
