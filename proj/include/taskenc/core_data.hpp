#pragma once

// Data model for trial-level encoding experiments: the (word, question)
// design table, named feature matrices, the R x L x T response tensor, and
// train-only z-scoring.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace taskenc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Trial {
    std::int64_t id = 0;
    std::string word;
    std::string question;
};

/// Maps each recorded trial to its (word, question) pair.
class ExperimentDesign {
public:
    ExperimentDesign() = default;

    /// Vocabularies default to order of first appearance when left empty.
    explicit ExperimentDesign(std::vector<Trial> trials,
                              std::vector<std::string> words = {},
                              std::vector<std::string> questions = {});

    /// Full word x question grid, question-major, trial ids 0..R-1.
    static ExperimentDesign full_grid(std::vector<std::string> words,
                                      std::vector<std::string> questions);

    const std::vector<Trial>& trials() const { return trials_; }
    const std::vector<std::string>& words() const { return words_; }
    const std::vector<std::string>& questions() const { return questions_; }
    std::size_t size() const { return trials_.size(); }

    std::size_t word_index(std::string_view word) const;
    std::size_t question_index(std::string_view question) const;
    std::size_t trial_word(std::size_t row) const { return trial_word_[row]; }
    std::size_t trial_question(std::size_t row) const { return trial_question_[row]; }
    std::optional<std::size_t> row_of_trial(std::int64_t trial_id) const;

    /// Design restricted to the given rows; vocabularies are kept unchanged.
    ExperimentDesign subset(std::span<const std::size_t> rows) const;

private:
    std::vector<Trial> trials_;
    std::vector<std::string> words_;
    std::vector<std::string> questions_;
    std::vector<std::size_t> trial_word_;
    std::vector<std::size_t> trial_question_;
    std::unordered_map<std::string, std::size_t> word_lookup_;
    std::unordered_map<std::string, std::size_t> question_lookup_;
    std::unordered_map<std::int64_t, std::size_t> trial_lookup_;
};

enum class FeatureRole { Stimulus, Task };

std::string_view to_string(FeatureRole role);

class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::vector<std::string> row_ids, std::vector<std::string> column_names,
                  Matrix values, FeatureRole role);

    const std::vector<std::string>& row_ids() const { return row_ids_; }
    const std::vector<std::string>& column_names() const { return column_names_; }
    const Matrix& values() const { return values_; }
    FeatureRole role() const { return role_; }
    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }

    std::optional<std::size_t> find_row(std::string_view id) const;
    /// Throws MissingEntity when absent.
    std::size_t row_of(std::string_view id) const;

private:
    std::vector<std::string> row_ids_;
    std::vector<std::string> column_names_;
    Matrix values_;
    FeatureRole role_ = FeatureRole::Stimulus;
    std::unordered_map<std::string, std::size_t> lookup_;
};

/// Trial-level responses, stored as an R x (L*T) matrix whose column for
/// sensor l and window t is l*T + t (trial -> sensor -> window, row-major).
class BrainRecordings {
public:
    BrainRecordings() = default;
    BrainRecordings(Matrix values, std::size_t n_sensors, std::size_t n_windows,
                    std::vector<std::string> sensor_labels, int window_ms,
                    std::vector<std::int64_t> trial_ids);

    const Matrix& values() const { return values_; }
    std::size_t n_trials() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t n_sensors() const { return n_sensors_; }
    std::size_t n_windows() const { return n_windows_; }
    int window_ms() const { return window_ms_; }
    const std::vector<std::string>& sensor_labels() const { return sensor_labels_; }
    const std::vector<std::int64_t>& trial_ids() const { return trial_ids_; }

    Eigen::Index column(std::size_t sensor, std::size_t window) const {
        return static_cast<Eigen::Index>(sensor * n_windows_ + window);
    }
    double at(std::size_t trial, std::size_t sensor, std::size_t window) const {
        return values_(static_cast<Eigen::Index>(trial), column(sensor, window));
    }

private:
    Matrix values_;
    std::size_t n_sensors_ = 0;
    std::size_t n_windows_ = 0;
    std::vector<std::string> sensor_labels_;
    int window_ms_ = 1;
    std::vector<std::int64_t> trial_ids_;
};

struct ZScoreStats {
    Vector means;
    Vector stds;              // population (1/n) standard deviation
    std::vector<bool> constant;
    std::vector<std::size_t> fit_rows;

    Eigen::Index size() const { return means.size(); }
};

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, FeatureRole role);
void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& features);

ExperimentDesign load_design(const std::filesystem::path& path);
void save_design(const std::filesystem::path& path, const ExperimentDesign& design);

/// Reads `meta.json` + `data.f64le` from a directory.
BrainRecordings load_brain_recordings(const std::filesystem::path& dir);
void save_brain_recordings(const std::filesystem::path& dir, const BrainRecordings& brain);

/// Averages non-overlapping windows of `window` samples along time.
BrainRecordings downsample_time(const BrainRecordings& raw, std::size_t window);

ZScoreStats zscore_fit(const Matrix& values, std::span<const std::size_t> fit_rows);
ZScoreStats zscore_fit(const Matrix& values);
Matrix zscore_apply(const Matrix& values, const ZScoreStats& stats);
/// Maps z-scores back to original units; constant columns return their mean.
Matrix zscore_invert(const Matrix& z, const ZScoreStats& stats);

struct AlignedRecordings {
    ExperimentDesign design;          // only trials that have recordings, design order
    BrainRecordings brain;            // rows reordered to match `design`
    std::vector<std::int64_t> rejected_trials;  // design trials with no recording
};

/// Aligns recordings to the design. Recorded trials unknown to the design
/// raise MissingEntity; design trials without recordings are dropped.
AlignedRecordings align_to_design(const ExperimentDesign& design, const BrainRecordings& brain);

bool all_finite(const Matrix& m);

} // namespace taskenc
