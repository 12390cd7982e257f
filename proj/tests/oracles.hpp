#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library's solvers, metrics or stats.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Full-batch gradient descent on ||Y - XW||^2 + lambda ||W||^2 with step 1/L,
/// L the gradient's Lipschitz constant, run until the gradient vanishes.
inline Eigen::MatrixXd ridge_gradient_descent(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double lambda,
                                              long max_iters = 2000000) {
    const Eigen::MatrixXd G = X.transpose() * X;
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().maxCoeff();
    const double step = 1.0 / (2.0 * (top + lambda));
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(X.cols(), Y.cols());
    // Nesterov momentum for the ill-conditioned draws; same fixed point.
    Eigen::MatrixXd prev = W;
    for (long it = 1; it <= max_iters; ++it) {
        const Eigen::MatrixXd V = W + (static_cast<double>(it - 1) / static_cast<double>(it + 2)) * (W - prev);
        const Eigen::MatrixXd grad = 2.0 * (X.transpose() * (X * V - Y)) + 2.0 * lambda * V;
        prev = W;
        W = V - step * grad;
        if (grad.cwiseAbs().maxCoeff() < 1e-13) break;
    }
    return W;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Attention objective written out trial by trial.
inline double attention_objective(const Eigen::MatrixXd& A, const Eigen::MatrixXd& W, const Eigen::MatrixXd& Xs,
                                  const Eigen::MatrixXd& Xt, const Eigen::MatrixXd& Y, double lambda,
                                  double lambda_A) {
    double total = 0.0;
    for (Eigen::Index n = 0; n < Xs.rows(); ++n) {
        for (Eigen::Index c = 0; c < Y.cols(); ++c) {
            double pred = 0.0;
            for (Eigen::Index j = 0; j < Xs.cols(); ++j) {
                double logit = 0.0;
                for (Eigen::Index k = 0; k < Xt.cols(); ++k) logit += Xt(n, k) * A(k, j);
                pred += sigmoid(logit) * Xs(n, j) * W(j, c);
            }
            total += (Y(n, c) - pred) * (Y(n, c) - pred);
        }
    }
    return total + lambda * W.squaredNorm() + lambda_A * A.squaredNorm();
}

/// Central finite differences of f over every entry of P.
inline Eigen::MatrixXd finite_difference(const std::function<double(const Eigen::MatrixXd&)>& f,
                                         const Eigen::MatrixXd& P, double h = 1e-6) {
    Eigen::MatrixXd g(P.rows(), P.cols());
    for (Eigen::Index r = 0; r < P.rows(); ++r) {
        for (Eigen::Index c = 0; c < P.cols(); ++c) {
            Eigen::MatrixXd up = P, down = P;
            up(r, c) += h;
            down(r, c) -= h;
            g(r, c) = (f(up) - f(down)) / (2.0 * h);
        }
    }
    return g;
}

inline double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        dot += a(i) * b(i);
        na += a(i) * a(i);
        nb += b(i) * b(i);
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / std::sqrt(na * nb);
}

/// 2v2 score of one pair: 1 correct, 0 swapped, 0.5 tie.
inline double two_vs_two(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2, const Eigen::VectorXd& t1,
                         const Eigen::VectorXd& t2) {
    auto d = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return a.size() == 1 ? std::abs(a(0) - b(0)) : cosine_distance(a, b);
    };
    const double right = d(p1, t1) + d(p2, t2);
    const double swapped = d(p1, t2) + d(p2, t1);
    if (right < swapped) return 1.0;
    if (right > swapped) return 0.0;
    return 0.5;
}

/// Twice the Student t density integrated over [|t|, inf) with composite
/// Simpson's rule.
inline double student_t_two_sided_p(double t, double dof) {
    const double c = std::exp(std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0)) / std::sqrt(dof * M_PI);
    auto density = [&](double x) { return c * std::pow(1.0 + x * x / dof, -(dof + 1.0) / 2.0); };
    // Substitute x = |t| + u / (1 - u) to map [|t|, inf) onto [0, 1).
    const double a = std::abs(t);
    const int n = 200000;
    const double h = 1.0 / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double u = i * h;
        // At u = 1 the integrand tends to c for one degree of freedom, 0 otherwise.
        double f = dof == 1.0 ? c : 0.0;
        if (u < 1.0) {
            const double x = a + u / (1.0 - u);
            f = density(x) / ((1.0 - u) * (1.0 - u));
        }
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        sum += w * f;
    }
    return 2.0 * sum * h / 3.0;
}

/// Sample mean, sample std, t = (mean - mu0) / (sd / sqrt(n)).
inline double t_statistic(const std::vector<double>& v, double mu0) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return (mean - mu0) / (sd / std::sqrt(static_cast<double>(v.size())));
}

/// Covariance over the product of standard deviations.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

/// BH by definition: the largest k with p_(k) <= k q / m, rejecting every p <= p_(k).
inline std::vector<bool> bh_reference(const std::vector<double>& p, double q) {
    const std::size_t m = p.size();
    double cutoff = -1.0;
    for (std::size_t k = 1; k <= m; ++k) {
        // p_(k): the k-th smallest value
        std::vector<double> sorted = p;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
        const double pk = sorted[k - 1];
        if (pk <= static_cast<double>(k) * q / static_cast<double>(m)) cutoff = std::max(cutoff, pk);
    }
    std::vector<bool> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = p[i] <= cutoff;
    return out;
}

} // namespace oracle
