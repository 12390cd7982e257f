#pragma once

#include "taskenc/hypotheses.hpp"

#include <string>
#include <vector>

namespace taskenc {

enum class TestKind { OneSample, Paired };

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    TestKind kind = TestKind::OneSample;
};

/// Two-sided Student t test of mean(values) against mu0 with sample std.
/// Zero variance gives t = 0, p = 1 when the mean equals mu0 and throws
/// DegenerateTest otherwise; n < 2 also throws DegenerateTest.
TestResult one_sample_ttest(const std::vector<double>& values, double mu0);

/// one_sample_ttest(a - b, 0).
TestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

/// Two-sided tail probability P(|T| >= |t|) for T ~ Student t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

/// Benjamini-Hochberg step-up rejections, in input order.
std::vector<bool> bh_fdr(const std::vector<double>& p_values, double q);

/// Product-moment correlation. DegenerateTest on zero variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Pearson correlation of the strict upper triangles of the two task x task
/// cosine-distance matrices. Tasks are matched by id; DegenerateTest below 3 tasks.
double attention_similarity(const std::vector<AttentionVector>& first, const std::vector<AttentionVector>& second);

inline constexpr const char* kStatsCsvHeader = "family,cell,statistic,p,rejected\n";

} // namespace taskenc
