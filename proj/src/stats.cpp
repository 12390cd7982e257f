#include "taskenc/stats.hpp"

#include "taskenc/error.hpp"
#include "taskenc/metrics.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace taskenc {

double student_t_two_sided_p(double t, double dof) {
    if (!(dof > 0.0)) fail(ErrorKind::DegenerateTest, "t distribution needs positive degrees of freedom");
    if (std::isinf(t)) return 0.0;
    // P(|T| >= |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2)
    const double x = dof / (dof + t * t);
    return std::clamp(boost::math::ibeta(dof / 2.0, 0.5, x), 0.0, 1.0);
}

TestResult one_sample_ttest(const std::vector<double>& values, double mu0) {
    const std::size_t n = values.size();
    if (n < 2) fail(ErrorKind::DegenerateTest, "t test needs at least two values, got " + std::to_string(n));
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    TestResult r;
    r.n = n;
    if (sd == 0.0) {
        if (mean == mu0) return r;
        fail(ErrorKind::DegenerateTest, "zero variance with mean different from the reference value");
    }
    r.statistic = (mean - mu0) / (sd / std::sqrt(static_cast<double>(n)));
    r.p_value = student_t_two_sided_p(r.statistic, static_cast<double>(n - 1));
    return r;
}

TestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) fail(ErrorKind::ShapeMismatch, "paired t test on samples of different size");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    auto r = one_sample_ttest(diff, 0.0);
    r.kind = TestKind::Paired;
    return r;
}

std::vector<bool> bh_fdr(const std::vector<double>& p_values, double q) {
    const std::size_t m = p_values.size();
    std::vector<bool> reject(m, false);
    if (m == 0) return reject;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::size_t cutoff = 0;  // number of rejections
    for (std::size_t i = m; i >= 1; --i) {
        if (p_values[order[i - 1]] <= static_cast<double>(i) * q / static_cast<double>(m)) {
            cutoff = i;
            break;
        }
    }
    if (cutoff == 0) return reject;
    const double threshold = p_values[order[cutoff - 1]];
    for (std::size_t i = 0; i < m; ++i) reject[i] = p_values[i] <= threshold;
    return reject;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) fail(ErrorKind::ShapeMismatch, "pearson on vectors of different length");
    if (a.size() < 2) fail(ErrorKind::DegenerateTest, "pearson needs at least two values");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) fail(ErrorKind::DegenerateTest, "pearson on a constant vector");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double attention_similarity(const std::vector<AttentionVector>& first, const std::vector<AttentionVector>& second) {
    if (first.size() != second.size()) fail(ErrorKind::ShapeMismatch, "attention sets cover different task counts");
    if (first.size() < 3) fail(ErrorKind::DegenerateTest, "attention similarity needs at least three tasks");
    std::map<std::string, const AttentionVector*> lookup;
    for (const auto& a : second) lookup[a.task_id] = &a;
    std::vector<const AttentionVector*> matched;
    for (const auto& a : first) {
        auto it = lookup.find(a.task_id);
        if (it == lookup.end()) fail(ErrorKind::MissingEntity, "task '" + a.task_id + "' missing from second set");
        if (it->second->weights.size() != a.weights.size()) fail(ErrorKind::ShapeMismatch, "attention lengths differ");
        matched.push_back(it->second);
    }
    std::vector<double> d1, d2;
    for (std::size_t i = 0; i < first.size(); ++i) {
        for (std::size_t j = i + 1; j < first.size(); ++j) {
            d1.push_back(cosine_distance(first[i].weights, first[j].weights));
            d2.push_back(cosine_distance(matched[i]->weights, matched[j]->weights));
        }
    }
    return pearson(d1, d2);
}

} // namespace taskenc
