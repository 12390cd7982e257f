#include "taskenc/metrics.hpp"

#include "taskenc/error.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace taskenc {

std::string_view to_string(PairFilter filter) {
    switch (filter) {
    case PairFilter::All: return "all";
    case PairFilter::SameWord: return "same_word";
    case PairFilter::SameQuestion: return "same_question";
    case PairFilter::FullyDisjoint: return "fully_disjoint";
    }
    return "?";
}

PairFilter parse_pair_filter(std::string_view name) {
    for (auto f : {PairFilter::All, PairFilter::SameWord, PairFilter::SameQuestion, PairFilter::FullyDisjoint}) {
        if (to_string(f) == name) return f;
    }
    fail(ErrorKind::KindError, "unknown pair filter '" + std::string(name) + "'");
}

bool pair_admissible(PairFilter filter, std::size_t w1, std::size_t q1, std::size_t w2, std::size_t q2) {
    switch (filter) {
    case PairFilter::All: return true;
    case PairFilter::SameWord: return w1 == w2 && q1 != q2;
    case PairFilter::SameQuestion: return q1 == q2 && w1 != w2;
    case PairFilter::FullyDisjoint: return w1 != w2 && q1 != q2;
    }
    return false;
}

double cosine_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    if (a.size() != b.size()) fail(ErrorKind::ShapeMismatch, "cosine distance of vectors with different lengths");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) fail(ErrorKind::ZeroVector, "cosine distance is undefined for a zero vector");
    return 1.0 - a.dot(b) / (na * nb);
}

namespace {

double masked_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                       std::span<const Eigen::Index> mask, Distance distance) {
    if (distance == Distance::Absolute) {
        double sum = 0.0;
        for (auto i : mask) sum += std::abs(a(i) - b(i));
        return sum;
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (auto i : mask) {
        dot += a(i) * b(i);
        na += a(i) * a(i);
        nb += b(i) * b(i);
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

void check_pair_inputs(const Eigen::Ref<const Vector>& p1, const Eigen::Ref<const Vector>& p2,
                       const Eigen::Ref<const Vector>& b1, const Eigen::Ref<const Vector>& b2,
                       std::span<const Eigen::Index> mask, Distance distance) {
    if (mask.empty()) fail(ErrorKind::RangeError, "2v2 mask is empty");
    if (distance == Distance::Cosine && mask.size() < 2) {
        fail(ErrorKind::DistanceUndefined, "cosine distance needs at least two masked entries");
    }
    const auto n = p1.size();
    if (p2.size() != n || b1.size() != n || b2.size() != n) fail(ErrorKind::ShapeMismatch, "2v2 vectors differ in length");
    for (auto i : mask) {
        if (i < 0 || i >= n) fail(ErrorKind::RangeError, "2v2 mask index out of range");
    }
}

} // namespace

PairOutcome two_vs_two_outcome(const Eigen::Ref<const Vector>& pred1, const Eigen::Ref<const Vector>& pred2,
                               const Eigen::Ref<const Vector>& true1, const Eigen::Ref<const Vector>& true2,
                               std::span<const Eigen::Index> mask, Distance distance) {
    check_pair_inputs(pred1, pred2, true1, true2, mask, distance);
    const double matched = masked_distance(pred1, true1, mask, distance) + masked_distance(pred2, true2, mask, distance);
    const double swapped = masked_distance(pred1, true2, mask, distance) + masked_distance(pred2, true1, mask, distance);
    if (matched < swapped) return PairOutcome::Correct;
    if (matched > swapped) return PairOutcome::Wrong;
    return PairOutcome::Tie;
}

double two_vs_two(const Eigen::Ref<const Vector>& pred1, const Eigen::Ref<const Vector>& pred2,
                  const Eigen::Ref<const Vector>& true1, const Eigen::Ref<const Vector>& true2,
                  std::span<const Eigen::Index> mask, Distance distance, double tie_credit) {
    switch (two_vs_two_outcome(pred1, pred2, true1, true2, mask, distance)) {
    case PairOutcome::Correct: return 1.0;
    case PairOutcome::Wrong: return 0.0;
    case PairOutcome::Tie: return tie_credit;
    }
    return tie_credit;
}

void PairTally::add(PairOutcome outcome) {
    switch (outcome) {
    case PairOutcome::Correct: ++correct; break;
    case PairOutcome::Wrong: ++wrong; break;
    case PairOutcome::Tie: ++ties; break;
    }
}

void PairTally::merge(const PairTally& other) {
    correct += other.correct;
    wrong += other.wrong;
    ties += other.ties;
}

double PairTally::accuracy(double tie_credit) const {
    if (n() == 0) return tie_credit;
    return (static_cast<double>(correct) + tie_credit * static_cast<double>(ties)) / static_cast<double>(n());
}

namespace {

double row_distance(const Matrix& a, Eigen::Index ra, const Matrix& b, Eigen::Index rb,
                    std::span<const Eigen::Index> mask, Distance distance) {
    if (distance == Distance::Absolute) {
        double sum = 0.0;
        for (auto c : mask) sum += std::abs(a(ra, c) - b(rb, c));
        return sum;
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (auto c : mask) {
        dot += a(ra, c) * b(rb, c);
        na += a(ra, c) * a(ra, c);
        nb += b(rb, c) * b(rb, c);
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace

std::optional<PairOutcome> row_pair_outcome(const Matrix& pred, const Matrix& truth, Eigen::Index i, Eigen::Index j,
                                            std::span<const Eigen::Index> mask, Distance distance) {
    bool same = true;
    for (auto c : mask) {
        if (truth(i, c) != truth(j, c)) {
            same = false;
            break;
        }
    }
    if (same) return std::nullopt;
    const double matched = row_distance(pred, i, truth, i, mask, distance) + row_distance(pred, j, truth, j, mask, distance);
    const double swapped = row_distance(pred, i, truth, j, mask, distance) + row_distance(pred, j, truth, i, mask, distance);
    if (matched < swapped) return PairOutcome::Correct;
    if (matched > swapped) return PairOutcome::Wrong;
    return PairOutcome::Tie;
}

PairTally tally_all_pairs(const Matrix& pred, const Matrix& truth, std::span<const Eigen::Index> mask,
                          Distance distance) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
        fail(ErrorKind::ShapeMismatch, "prediction and target matrices differ in shape");
    }
    if (mask.empty()) fail(ErrorKind::RangeError, "2v2 mask is empty");
    if (distance == Distance::Cosine && mask.size() < 2) {
        fail(ErrorKind::DistanceUndefined, "cosine distance needs at least two masked entries");
    }
    PairTally tally;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < pred.rows(); ++j) {
            if (auto outcome = row_pair_outcome(pred, truth, i, j, mask, distance)) tally.add(*outcome);
        }
    }
    return tally;
}

} // namespace taskenc
