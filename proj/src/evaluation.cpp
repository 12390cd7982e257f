#include "taskenc/evaluation.hpp"

#include "taskenc/error.hpp"
#include "taskenc/text_io.hpp"

namespace taskenc {

namespace {

void check_result(const CVResult& result) {
    for (const auto& f : result.folds) {
        const auto n = static_cast<Eigen::Index>(f.test_rows.size());
        const auto m = static_cast<Eigen::Index>(result.n_sensors * result.n_windows);
        if (f.predicted.rows() != n || f.truth.rows() != n || (n > 0 && (f.predicted.cols() != m || f.truth.cols() != m))) {
            fail(ErrorKind::ShapeMismatch, "fold " + std::to_string(f.fold_id) + " predictions have the wrong shape");
        }
    }
}

} // namespace

std::vector<TestPair> test_pairs(const CVResult& result, PairFilter filter) {
    std::vector<TestPair> pairs;
    const auto& design = result.design;
    for (std::size_t f = 0; f < result.folds.size(); ++f) {
        const auto& rows = result.folds[f].test_rows;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = i + 1; j < rows.size(); ++j) {
                if (pair_admissible(filter, design.trial_word(rows[i]), design.trial_question(rows[i]),
                                    design.trial_word(rows[j]), design.trial_question(rows[j]))) {
                    pairs.push_back({f, i, j});
                }
            }
        }
    }
    return pairs;
}

std::vector<std::pair<std::int64_t, std::int64_t>> enumerate_test_pairs(const CVResult& result, PairFilter filter) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    for (const auto& p : test_pairs(result, filter)) {
        const auto& rows = result.folds[p.fold].test_rows;
        out.emplace_back(result.design.trials()[rows[p.first]].id, result.design.trials()[rows[p.second]].id);
    }
    return out;
}

std::vector<std::vector<PairTally>> fold_window_tallies(const CVResult& result, PairFilter filter) {
    check_result(result);
    const std::size_t L = result.n_sensors, T = result.n_windows;
    std::vector<std::vector<PairTally>> tallies(result.folds.size(), std::vector<PairTally>(T));
    const auto pairs = test_pairs(result, filter);
    const Distance distance = L == 1 ? Distance::Absolute : Distance::Cosine;
    std::vector<Eigen::Index> mask(L);
    for (std::size_t w = 0; w < T; ++w) {
        for (std::size_t l = 0; l < L; ++l) mask[l] = static_cast<Eigen::Index>(l * T + w);
        for (const auto& p : pairs) {
            const auto& f = result.folds[p.fold];
            if (auto outcome = row_pair_outcome(f.predicted, f.truth, static_cast<Eigen::Index>(p.first),
                                                static_cast<Eigen::Index>(p.second), mask, distance)) {
                tallies[p.fold][w].add(*outcome);
            }
        }
    }
    return tallies;
}

Timecourse accuracy_timecourse(const CVResult& result, PairFilter filter, double tie_credit) {
    if (test_pairs(result, filter).empty()) {
        fail(ErrorKind::NoPairs, "no " + std::string(to_string(filter)) + " test pairs");
    }
    const auto tallies = fold_window_tallies(result, filter);
    Timecourse tc;
    for (std::size_t w = 0; w < result.n_windows; ++w) {
        PairTally total;
        for (const auto& fold : tallies) total.merge(fold[w]);
        tc.accuracy.push_back(total.accuracy(tie_credit));
        tc.n_pairs.push_back(total.n());
    }
    return tc;
}

double mean_accuracy(const CVResult& result, PairFilter filter, double tie_credit) {
    const auto tc = accuracy_timecourse(result, filter, tie_credit);
    double sum = 0.0;
    for (double a : tc.accuracy) sum += a;
    return sum / static_cast<double>(tc.accuracy.size());
}

AccuracyGrid accuracy_grid(const CVResult& result, PairFilter filter, std::size_t window_group, double tie_credit) {
    if (window_group == 0) fail(ErrorKind::RangeError, "window_group must be >= 1");
    check_result(result);
    const auto pairs = test_pairs(result, filter);
    if (pairs.empty()) fail(ErrorKind::NoPairs, "no " + std::string(to_string(filter)) + " test pairs");
    const std::size_t L = result.n_sensors, T = result.n_windows;
    AccuracyGrid grid;
    grid.window_group = window_group;
    grid.filter = filter;
    for (std::size_t start = 0; start < T; start += window_group) grid.groups.emplace_back(start, std::min(T, start + window_group));
    const auto G = static_cast<Eigen::Index>(grid.groups.size());
    grid.values.resize(static_cast<Eigen::Index>(L), G);
    grid.n_pairs.resize(static_cast<Eigen::Index>(L), G);
    std::vector<Eigen::Index> mask;
    for (std::size_t l = 0; l < L; ++l) {
        for (Eigen::Index g = 0; g < G; ++g) {
            const auto [first, last] = grid.groups[static_cast<std::size_t>(g)];
            mask.clear();
            for (std::size_t w = first; w < last; ++w) mask.push_back(static_cast<Eigen::Index>(l * T + w));
            const Distance distance = mask.size() == 1 ? Distance::Absolute : Distance::Cosine;
            PairTally tally;
            for (const auto& p : pairs) {
                const auto& f = result.folds[p.fold];
                if (auto outcome = row_pair_outcome(f.predicted, f.truth, static_cast<Eigen::Index>(p.first),
                                                    static_cast<Eigen::Index>(p.second), mask, distance)) {
                    tally.add(*outcome);
                }
            }
            grid.values(static_cast<Eigen::Index>(l), g) = tally.accuracy(tie_credit);
            grid.n_pairs(static_cast<Eigen::Index>(l), g) = tally.n();
        }
    }
    return grid;
}

std::string grid_csv_rows(const std::string& hypothesis, const AccuracyGrid& grid,
                          const std::vector<std::string>& sensor_labels) {
    if (sensor_labels.size() != static_cast<std::size_t>(grid.values.rows())) {
        fail(ErrorKind::ShapeMismatch, "sensor labels do not match the accuracy grid");
    }
    std::string out;
    for (Eigen::Index l = 0; l < grid.values.rows(); ++l) {
        for (Eigen::Index g = 0; g < grid.values.cols(); ++g) {
            out += text::csv_field(hypothesis) + "," + std::string(to_string(grid.filter)) + "," +
                   text::csv_field(sensor_labels[static_cast<std::size_t>(l)]) + "," + std::to_string(g) + "," +
                   text::format_double(grid.values(l, g)) + "," + std::to_string(grid.n_pairs(l, g)) + "\n";
        }
    }
    return out;
}

} // namespace taskenc
