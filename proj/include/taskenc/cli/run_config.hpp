#pragma once

#include "taskenc/crossval.hpp"
#include "taskenc/hypotheses.hpp"
#include "taskenc/metrics.hpp"
#include "taskenc/synth.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace taskenc::cli {

struct DataPaths {
    std::filesystem::path design;
    std::filesystem::path stimulus;
    std::filesystem::path task;
    std::optional<std::filesystem::path> aux_questions;
    std::vector<std::filesystem::path> brain;  // one directory per subject
};

struct FoldSettings {
    std::size_t k_words = 2;
    std::size_t k_questions = 2;
    std::optional<std::size_t> n_folds;
    std::uint64_t seed = 0;
    std::size_t inner_k_words = 2;
    std::size_t inner_k_questions = 2;
    std::optional<std::size_t> inner_n_folds;
    std::uint64_t inner_seed = 1;
};

struct EvaluationSettings {
    std::vector<PairFilter> filters{PairFilter::All, PairFilter::SameWord, PairFilter::SameQuestion};
    std::size_t grid_window_group = 2;
    ValidationMetric validation_metric = ValidationMetric::TwoVsTwo;
    double fdr_q = 0.05;
    double tie_credit = 0.5;
};

struct RunConfig {
    DataPaths data;
    std::vector<HypothesisKind> hypotheses = all_hypotheses();
    FoldSettings folds;
    HyperGrid grid = HyperGrid::standard();
    SolverConfig solver;
    EvaluationSettings evaluation;
    std::size_t downsample = 1;
    std::optional<std::filesystem::path> output;
    bool save_models = true;
    std::vector<std::size_t> learning_curve;
    std::uint64_t learning_curve_seed = 0;

    void validate() const;
};

/// Strict parse: unknown keys and wrong types raise ConfigError. Relative
/// paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fills the data paths from a dataset directory written by `synth`.
DataPaths dataset_paths(const std::filesystem::path& dir);

GenerativeConfig parse_synth_config(const nlohmann::json& j);
GenerativeConfig load_synth_config(const std::filesystem::path& path);

/// Parses "a,b,c" into non-negative integers. ConfigError on junk.
std::vector<std::size_t> parse_size_list(const std::string& text);
std::vector<HypothesisKind> parse_hypothesis_list(const std::string& text);

} // namespace taskenc::cli
