#pragma once

#include "taskenc/core_data.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace taskenc {

/// Competing accounts of how task and stimulus combine:
///   H1  stimulus only           b = s W_s
///   H2  task only               b = t W_t
///   H3  additive                b = s W_s + t W_t
///   H41 precomputed attention   b = (softmax(cos(t, aux)) * s) W_s
///   H42 learned attention       b = (sigmoid(t A) * s) W_s
enum class HypothesisKind { H1, H2, H3, H41, H42 };

std::string to_string(HypothesisKind kind);
/// Accepts "H1".."H3", "H41"/"H4.1", "H42"/"H4.2" (case-insensitive). KindError otherwise.
HypothesisKind parse_hypothesis(std::string_view name);
const std::vector<HypothesisKind>& all_hypotheses();

class HypothesisSpec {
public:
    /// H41 requires the auxiliary question bank (F_s rows of length F_t); other kinds reject it.
    static HypothesisSpec make(HypothesisKind kind, std::shared_ptr<const FeatureMatrix> aux_questions = nullptr);

    HypothesisKind kind() const { return kind_; }
    const FeatureMatrix* aux_questions() const { return aux_.get(); }

private:
    HypothesisSpec(HypothesisKind kind, std::shared_ptr<const FeatureMatrix> aux) : kind_(kind), aux_(std::move(aux)) {}

    HypothesisKind kind_;
    std::shared_ptr<const FeatureMatrix> aux_;
};

struct AttentionVector {
    Vector weights;
    std::string task_id;
};

/// Softmax over cosine similarities between a task vector and each auxiliary
/// question vector. Throws ZeroVector when any vector has zero norm.
AttentionVector precomputed_attention(const Eigen::Ref<const Vector>& task, const FeatureMatrix& aux_questions,
                                      std::string task_id = {});

/// Attention vector for every row of the task matrix, in row order.
std::vector<AttentionVector> precomputed_attention_table(const FeatureMatrix& tasks, const FeatureMatrix& aux_questions);

/// Elementwise product a * s.
Vector augment_stimulus(const Eigen::Ref<const Vector>& attention, const Eigen::Ref<const Vector>& stimulus);

struct DesignMatrix {
    HypothesisKind kind = HypothesisKind::H1;
    Matrix values;                 // rows aligned with `rows`
    std::vector<std::size_t> rows; // design row indices
};

/// Builds the per-trial model inputs of a hypothesis for the given design rows.
/// For H42 this is the raw stimulus rows; pair it with assemble_task_rows().
DesignMatrix assemble_inputs(const HypothesisSpec& spec, const FeatureMatrix& stimulus, const FeatureMatrix& task,
                             const ExperimentDesign& design, std::span<const std::size_t> rows);

/// Per-trial task feature rows (the gate input of H42).
Matrix assemble_task_rows(const FeatureMatrix& task, const ExperimentDesign& design, std::span<const std::size_t> rows);

/// Highest-weighted k features, weight descending, ties by column index.
std::vector<std::pair<std::string, double>> top_attended_features(const AttentionVector& attention, std::size_t k,
                                                                  const std::vector<std::string>& names);

/// CSV `task_id,feature_name,weight`.
void save_attention_csv(const std::filesystem::path& path, const std::vector<AttentionVector>& attention,
                        const std::vector<std::string>& feature_names);

} // namespace taskenc
