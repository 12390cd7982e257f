#pragma once

// 2v2 accuracy of cross-validated predictions per time window and per
// (sensor, window group) cell. Pairs are only formed within a fold.

#include "taskenc/crossval.hpp"
#include "taskenc/metrics.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace taskenc {

struct TestPair {
    std::size_t fold = 0;  // index into CVResult::folds
    std::size_t first = 0;  // indices into that fold's test_rows
    std::size_t second = 0;
};

/// Pairs of test trials within each fold that satisfy the filter, in fold
/// order then row order.
std::vector<TestPair> test_pairs(const CVResult& result, PairFilter filter);

/// The same pairs as trial ids.
std::vector<std::pair<std::int64_t, std::int64_t>> enumerate_test_pairs(const CVResult& result, PairFilter filter);

/// tallies[f][w]: outcomes of fold f at window w over all sensors. Pairs whose
/// true responses coincide on the mask are not counted.
std::vector<std::vector<PairTally>> fold_window_tallies(const CVResult& result, PairFilter filter);

struct Timecourse {
    std::vector<double> accuracy;     // per window
    std::vector<std::size_t> n_pairs;  // informative pairs per window
};

/// Throws NoPairs when no pair satisfies the filter.
Timecourse accuracy_timecourse(const CVResult& result, PairFilter filter, double tie_credit = 0.5);

/// Mean of the timecourse over windows.
double mean_accuracy(const CVResult& result, PairFilter filter, double tie_credit = 0.5);

struct AccuracyGrid {
    Matrix values;  // sensors x window groups
    Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic> n_pairs;
    std::size_t window_group = 1;
    PairFilter filter = PairFilter::All;
    std::vector<std::pair<std::size_t, std::size_t>> groups;  // [first, last) windows; the last group may be short
};

/// Cells with a single masked value compare absolute differences; larger
/// cells use cosine distance.
AccuracyGrid accuracy_grid(const CVResult& result, PairFilter filter, std::size_t window_group,
                           double tie_credit = 0.5);

/// Rows for `hypothesis,filter,sensor,window,accuracy,n_pairs` (no header);
/// `window` is the group index.
std::string grid_csv_rows(const std::string& hypothesis, const AccuracyGrid& grid,
                          const std::vector<std::string>& sensor_labels);

inline constexpr const char* kGridCsvHeader = "hypothesis,filter,sensor,window,accuracy,n_pairs\n";

} // namespace taskenc
