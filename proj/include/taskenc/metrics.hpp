#pragma once

// Pairwise 2v2 matching on prediction/target vectors. Aggregation over
// cross-validated results lives in evaluation.hpp.

#include "taskenc/core_data.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace taskenc {

enum class Distance { Cosine, Absolute };

enum class PairFilter { All, SameWord, SameQuestion, FullyDisjoint };

std::string_view to_string(PairFilter filter);
/// Accepts all, same_word, same_question, fully_disjoint. KindError otherwise.
PairFilter parse_pair_filter(std::string_view name);

/// Whether trials (w1,q1) and (w2,q2) form a pair of the given family.
bool pair_admissible(PairFilter filter, std::size_t w1, std::size_t q1, std::size_t w2, std::size_t q2);

/// 1 - cos(a, b). Throws ZeroVector when either vector has zero norm.
double cosine_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

enum class PairOutcome { Correct, Wrong, Tie };

/// Compares the summed distances of the correct and swapped matchings over the
/// masked entries. Inside the comparison a zero-norm vector has cosine
/// similarity 0 with everything.
PairOutcome two_vs_two_outcome(const Eigen::Ref<const Vector>& pred1, const Eigen::Ref<const Vector>& pred2,
                               const Eigen::Ref<const Vector>& true1, const Eigen::Ref<const Vector>& true2,
                               std::span<const Eigen::Index> mask, Distance distance);

/// 1 for the correct match, 0 for the swapped one, `tie_credit` on equal scores.
double two_vs_two(const Eigen::Ref<const Vector>& pred1, const Eigen::Ref<const Vector>& pred2,
                  const Eigen::Ref<const Vector>& true1, const Eigen::Ref<const Vector>& true2,
                  std::span<const Eigen::Index> mask, Distance distance, double tie_credit = 0.5);

/// Integer outcome counts, so accumulation order never changes the result.
struct PairTally {
    std::size_t correct = 0;
    std::size_t wrong = 0;
    std::size_t ties = 0;

    void add(PairOutcome outcome);
    void merge(const PairTally& other);
    std::size_t n() const { return correct + wrong + ties; }
    /// `tie_credit` when n() == 0.
    double accuracy(double tie_credit) const;
};

/// Outcome for rows i and j of a prediction/target pair of matrices, or
/// nullopt when their targets are identical on the mask.
std::optional<PairOutcome> row_pair_outcome(const Matrix& pred, const Matrix& truth, Eigen::Index i, Eigen::Index j,
                                            std::span<const Eigen::Index> mask, Distance distance);

/// Tally over all pairs of rows (i < j) whose targets differ on the mask.
/// Rows with identical targets cannot be told apart and are skipped.
PairTally tally_all_pairs(const Matrix& pred, const Matrix& truth, std::span<const Eigen::Index> mask,
                          Distance distance);

} // namespace taskenc
