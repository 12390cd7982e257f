#pragma once

#include "taskenc/core_data.hpp"
#include "taskenc/hypotheses.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace taskenc {

// ---------------------------------------------------------------------------
// Ridge regression: min ||Y - XW||_F^2 + lambda ||W||_F^2, one lambda shared by
// every output column.

struct RidgeModel {
    Matrix W;  // F_in x (L*T)
    double lambda = 0.0;
};

/// Solves (X'X + lambda I) W = X'Y by Cholesky. With lambda > 0 a failed
/// factorization is retried once with 1e-10 added to the diagonal.
RidgeModel ridge_fit(const Matrix& X, const Matrix& Y, double lambda);

Matrix ridge_predict(const RidgeModel& model, const Matrix& X);

double ridge_objective(const Matrix& W, const Matrix& X, const Matrix& Y, double lambda);

/// Repeated ridge solves over a lambda grid on fixed training data.
/// predict() never forms W: it evaluates X_eval (X'X + lambda I)^-1 X' Y
/// right to left, which is much cheaper when outputs outnumber samples.
class RidgeGram {
public:
    RidgeGram(Matrix X, Matrix Y);

    RidgeModel fit(double lambda) const;
    Matrix predict(const Matrix& X_eval, double lambda) const;

private:
    Matrix X_;
    Matrix Y_;
    Matrix gram_;
};

// ---------------------------------------------------------------------------
// Learned attention:
//   min ||Y - (sigmoid(X_t A) * X_s) W||_F^2 + lambda ||W||_F^2 + lambda_A ||A||_F^2
// trained full-batch with Adam.

struct SolverConfig {
    double learning_rate = 1e-3;
    int max_epochs = 2000;
    double convergence_tol = 1e-6;  // relative objective change...
    int convergence_window = 10;    // ...measured over this many epochs
    std::uint64_t seed = 0;
    double init_scale = 0.01;       // standard deviation of the Gaussian A init
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int checkpoint_every = 10;

    void validate() const;
};

struct AttentionModel {
    Matrix A;  // F_t x F_s
    Matrix W;  // F_s x (L*T)
    double lambda = 0.0;
    double lambda_A = 0.0;
    int epochs_run = 0;
    bool converged = false;
    double objective = 0.0;
    std::vector<double> checkpoints;  // raw objective every checkpoint_every epochs
};

struct AttentionGradients {
    double objective = 0.0;
    Matrix grad_A;
    Matrix grad_W;
};

AttentionGradients attention_gradients(const Matrix& A, const Matrix& W, const Matrix& stimulus_rows,
                                       const Matrix& task_rows, const Matrix& Y, double lambda, double lambda_A);

/// Seeded initial parameters: A ~ N(0, init_scale^2), W = 0.
AttentionModel attention_init(Eigen::Index task_features, Eigen::Index stimulus_features, Eigen::Index outputs,
                              const SolverConfig& config);

/// Returns the best parameters seen. Throws Diverged if the objective becomes
/// non-finite; `converged` is false when max_epochs ran out first.
AttentionModel attention_fit(const Matrix& stimulus_rows, const Matrix& task_rows, const Matrix& Y, double lambda,
                             double lambda_A, const SolverConfig& config);

Vector attention_weights(const AttentionModel& model, const Eigen::Ref<const Vector>& task);
Vector attention_predict(const AttentionModel& model, const Eigen::Ref<const Vector>& task,
                         const Eigen::Ref<const Vector>& stimulus);
/// One prediction per row of stimulus_rows / task_rows.
Matrix attention_predict_rows(const AttentionModel& model, const Matrix& stimulus_rows, const Matrix& task_rows);

double attention_objective(const AttentionModel& model, const Matrix& stimulus_rows, const Matrix& task_rows,
                           const Matrix& Y);

// ---------------------------------------------------------------------------
// Persisted models: `model.json` (metadata) + `params.f64le` (raw weights).

struct FittedModel {
    HypothesisKind kind = HypothesisKind::H1;
    double lambda = 0.0;
    double lambda_A = 0.0;
    Matrix W;
    Matrix A;                         // H42 only
    ZScoreStats input_stats;          // model inputs (H42: stimulus rows)
    ZScoreStats task_stats;           // H42 gate inputs
    ZScoreStats target_stats;
    std::vector<std::string> feature_names;       // stimulus feature names (H1/H41/H42)
    std::vector<std::string> task_feature_names;  // task feature names (H2/H3/H42)
    std::vector<std::string> task_ids;            // rows of `attention`
    Matrix attention;                             // H41/H42: per-task attention, N_t x F_s
    std::size_t n_sensors = 0;
    std::size_t n_windows = 0;
};

void save_model(const std::filesystem::path& dir, const FittedModel& model);
FittedModel load_model(const std::filesystem::path& dir);

} // namespace taskenc
