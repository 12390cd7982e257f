#pragma once

#include "taskenc/core_data.hpp"

#include <string>
#include <vector>

namespace taskenc::cli {

struct LineSeries {
    std::string name;
    std::vector<double> values;
    std::vector<bool> marked;  // star above the point
};

/// Accuracy curves over windows with a dashed chance line at 0.5.
std::string line_chart_svg(const std::string& title, const std::vector<double>& x_ms,
                           const std::vector<LineSeries>& series);

struct HeatmapPanel {
    std::string name;
    Matrix values;  // rows x cols, accuracies in [0, 1]
};

/// One panel per entry; color is blue below 0.5, red above.
std::string heatmap_svg(const std::string& title, const std::vector<HeatmapPanel>& panels);

/// Rows of stars for significant cells, e.g. pairwise comparisons per window.
std::string star_matrix_svg(const std::string& title, const std::vector<std::string>& row_labels,
                            const std::vector<std::vector<bool>>& marked);

} // namespace taskenc::cli
