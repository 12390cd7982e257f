#pragma once

// Synthetic datasets drawn from the forward model of a chosen hypothesis,
// for model-recovery checks.

#include "taskenc/core_data.hpp"
#include "taskenc/crossval.hpp"
#include "taskenc/hypotheses.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace taskenc {

struct GenerativeConfig {
    HypothesisKind kind = HypothesisKind::H1;
    std::size_t n_words = 20;
    std::size_t n_questions = 10;
    std::size_t f_s = 30;
    std::size_t f_t = 15;
    std::size_t n_sensors = 10;
    std::size_t n_windows = 8;
    double noise_sigma = 0.0;
    /// When set, noise_sigma is a multiple of the noise-free signal's std.
    bool noise_relative = false;
    std::uint64_t seed = 0;
    double signal_scale = 1.0;
    /// Round features to integers clamped to [1, 5].
    bool ordinal = false;
    std::size_t n_subjects = 1;
    int window_ms = 25;
    double feature_offset = 3.0;
    double aux_offset = 0.0;  // auxiliary question bank

    /// ConfigError on zero dimensions or negative noise.
    void validate() const;
};

struct GenerativeTruth {
    Matrix W_s;  // f_s x (L*T)
    Matrix W_t;  // f_t x (L*T)
    Matrix A;    // f_t x f_s
};

struct SynthDataset {
    GenerativeConfig config;
    ExperimentDesign design;
    FeatureMatrix stimulus;
    FeatureMatrix task;
    FeatureMatrix aux_questions;  // one row per stimulus feature
    GenerativeTruth truth;
    Matrix signal;                // noise-free responses, R x (L*T)
    double noise_sd = 0.0;        // absolute noise std actually used
    std::vector<BrainRecordings> subjects;
};

/// Every parameter block is drawn regardless of kind, so editing one block
/// and regenerating leaves all other draws unchanged.
GenerativeTruth draw_truth(const GenerativeConfig& config);

SynthDataset generate_dataset(const GenerativeConfig& config);
SynthDataset generate_dataset(const GenerativeConfig& config, const GenerativeTruth& truth);

/// Noise-free response of one trial under `kind`.
Vector forward_response(HypothesisKind kind, const GenerativeTruth& truth, const Vector& stimulus, const Vector& task,
                        const Matrix& aux_questions);

/// design.csv, stimulus.csv, task.csv, aux_questions.csv, truth.json and the
/// recordings (in `dir` for one subject, in `dir/sub-XX` otherwise).
void save_dataset(const std::filesystem::path& dir, const SynthDataset& dataset);

std::string subject_dir_name(std::size_t index);

struct RecoverySettings {
    std::size_t k_words = 2;
    std::size_t k_questions = 2;
    std::optional<std::size_t> n_folds;
    std::uint64_t fold_seed = 0;
    CVConfig cv;            // cv.threads is spread over hypotheses
    double tie_credit = 0.5;
};

struct RecoveryResult {
    std::vector<std::pair<HypothesisKind, double>> accuracy;  // input order, mean over subjects
    std::vector<std::pair<HypothesisKind, double>> ranking;   // best first
};

/// Cross-validates every listed hypothesis on the dataset and ranks them by
/// mean 2v2 accuracy over windows (all admissible pairs).
RecoveryResult model_recovery(const SynthDataset& dataset, const std::vector<HypothesisKind>& hypotheses,
                              const RecoverySettings& settings);

} // namespace taskenc
