#pragma once

// Zero-shot leave-k-words/k-questions-out folds, nested hyperparameter search
// and cross-validated prediction.

#include "taskenc/core_data.hpp"
#include "taskenc/hypotheses.hpp"
#include "taskenc/metrics.hpp"
#include "taskenc/solvers.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace taskenc {

/// Row sets refer to design rows. A trial touching a held word or a held
/// question is never trained on; it is tested only when it touches both.
struct Fold {
    std::size_t id = 0;
    std::vector<std::string> held_words;
    std::vector<std::string> held_questions;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    std::vector<std::size_t> excluded_rows;  // held out but not tested
};

/// Without n_folds: words and questions are shuffled and cut into groups of
/// k (the last group topped up from the front of the shuffle), and fold i
/// holds word group i mod #word-groups and question group i mod
/// #question-groups, giving max(#word-groups, #question-groups) folds.
/// With n_folds, further reshuffled rounds are appended (or the list is
/// truncated) until exactly n_folds folds exist.
std::vector<Fold> generate_folds(const ExperimentDesign& design, std::size_t k_words, std::size_t k_questions,
                                 std::uint64_t seed, std::optional<std::size_t> n_folds = std::nullopt);

/// Zero-shot folds over the training rows of `outer` only.
std::vector<Fold> nested_split(const ExperimentDesign& design, const Fold& outer, std::size_t k_words,
                               std::size_t k_questions, std::uint64_t seed,
                               std::optional<std::size_t> n_folds = std::nullopt);

/// folds.json content: held entities and trial ids per fold.
std::string folds_to_json(const ExperimentDesign& design, const std::vector<Fold>& folds);
/// Fingerprint of folds_to_json(), used to check that result sets are comparable.
std::string fold_manifest_hash(const ExperimentDesign& design, const std::vector<Fold>& folds);

struct HyperGrid {
    std::vector<double> lambda_values;
    std::vector<double> lambda_A_values;  // learned attention only

    /// {1e-5, 1e-4, ..., 1e7} for both.
    static HyperGrid standard();
    /// Nonempty, strictly positive and strictly ascending; ConfigError otherwise.
    void validate() const;
};

enum class ValidationMetric { TwoVsTwo, NegCosine, NegEuclidean, R2 };

std::string_view to_string(ValidationMetric metric);
ValidationMetric parse_validation_metric(std::string_view name);

struct CVConfig {
    HyperGrid grid = HyperGrid::standard();
    SolverConfig solver;
    ValidationMetric metric = ValidationMetric::TwoVsTwo;
    std::size_t inner_k_words = 2;
    std::size_t inner_k_questions = 2;
    std::optional<std::size_t> inner_n_folds;
    std::uint64_t inner_seed = 1;
    std::size_t threads = 1;
};

/// Everything a hypothesis needs, over all design rows.
struct HypothesisData {
    HypothesisKind kind = HypothesisKind::H1;
    const ExperimentDesign* design = nullptr;
    Matrix inputs;     // R x F_in
    Matrix task_rows;  // R x F_t, learned attention only
    Matrix targets;    // R x (L*T)
    std::size_t n_sensors = 0;
    std::size_t n_windows = 0;
};

/// `brain` rows must follow design order (see align_to_design).
HypothesisData prepare_data(const HypothesisSpec& spec, const FeatureMatrix& stimulus, const FeatureMatrix& task,
                            const ExperimentDesign& design, const BrainRecordings& brain);

struct CandidateScore {
    double lambda = 0.0;
    double lambda_A = 0.0;
    double score = 0.0;
    bool diverged = false;
};

struct GridChoice {
    double lambda = 0.0;
    double lambda_A = 0.0;
    std::vector<CandidateScore> scores;  // empty when the grid has one candidate
    std::size_t n_fits = 0;
};

/// Picks the candidate with the best mean inner-fold score, trained and
/// scored only on `train_rows`. Ties go to the larger lambda, then the
/// larger lambda_A. Throws SearchFailed when every candidate diverges.
GridChoice grid_search(const HypothesisData& data, const std::vector<Fold>& inner_folds, const CVConfig& config);

struct FoldResult {
    std::size_t fold_id = 0;
    std::vector<std::size_t> test_rows;
    Matrix predicted;  // test rows x (L*T), in the fold's z-scored target space
    Matrix truth;      // same space
    ZScoreStats target_stats;
    GridChoice choice;
    bool converged = true;  // learned attention refit
    int epochs = 0;
};

struct CVResult {
    HypothesisKind kind = HypothesisKind::H1;
    ExperimentDesign design;
    std::size_t n_sensors = 0;
    std::size_t n_windows = 0;
    std::vector<FoldResult> folds;
};

/// Per fold: nested split of the training rows, grid search, refit on all
/// training rows with train-only z-scoring, prediction of the test rows.
CVResult run_cv(const HypothesisData& data, const std::vector<Fold>& folds, const CVConfig& config);

/// Predictions mapped back to recorded units using each fold's target stats.
Matrix unzscored_predictions(const FoldResult& fold);

struct LearningCurvePoint {
    std::size_t size = 0;
    double accuracy = 0.0;  // mean 2v2 over windows, all pairs
};

/// Subsamples each fold's training rows to every requested size (seeded)
/// and reruns the pipeline. RangeError when a size is 0 or exceeds the
/// smallest training set.
std::vector<LearningCurvePoint> learning_curve(const HypothesisData& data, const std::vector<Fold>& folds,
                                               const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                               const CVConfig& config, double tie_credit = 0.5);

} // namespace taskenc
