#include "taskenc/solvers.hpp"

#include "taskenc/error.hpp"
#include "taskenc/text_io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <random>

namespace taskenc {

namespace {

constexpr double kJitter = 1e-10;
// Below this reciprocal condition number an unregularized system is treated as singular.
constexpr double kSingularRcond = 1e-14;

Eigen::LLT<Matrix> factor_normal_equations(const Matrix& gram, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorKind::RangeError, "lambda must be finite and >= 0");
    Matrix system = gram;
    system.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(system);
    const bool ok = llt.info() == Eigen::Success && llt.rcond() > kSingularRcond;
    if (ok) return llt;
    if (lambda == 0.0) fail(ErrorKind::SingularSystem, "X'X is singular and lambda = 0");
    system.diagonal().array() += kJitter;
    llt.compute(system);
    if (llt.info() != Eigen::Success) fail(ErrorKind::SingularSystem, "factorization failed even after jitter");
    return llt;
}

void check_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) fail(ErrorKind::NonFiniteData, std::string(what) + " has non-finite entries");
}

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

struct AdamMoments {
    Matrix m;
    Matrix v;
};

void adam_step(Matrix& param, const Matrix& grad, AdamMoments& state, const SolverConfig& cfg, int step) {
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, step);
    const double c2 = 1.0 - std::pow(cfg.beta2, step);
    param.array() -= cfg.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.epsilon);
}

} // namespace

// ---------------------------------------------------------------------------
// Ridge

RidgeModel ridge_fit(const Matrix& X, const Matrix& Y, double lambda) {
    if (X.rows() < 1) fail(ErrorKind::EmptyFit, "ridge fit needs at least one sample");
    if (X.rows() != Y.rows()) fail(ErrorKind::ShapeMismatch, "X and Y row counts differ");
    check_finite(X, "X");
    check_finite(Y, "Y");
    const Matrix gram = X.transpose() * X;
    const auto llt = factor_normal_equations(gram, lambda);
    return RidgeModel{llt.solve(X.transpose() * Y), lambda};
}

Matrix ridge_predict(const RidgeModel& model, const Matrix& X) {
    if (X.cols() != model.W.rows()) {
        fail(ErrorKind::ShapeMismatch, "model expects " + std::to_string(model.W.rows()) + " inputs, got " +
                                           std::to_string(X.cols()));
    }
    return X * model.W;
}

double ridge_objective(const Matrix& W, const Matrix& X, const Matrix& Y, double lambda) {
    if (X.cols() != W.rows() || X.rows() != Y.rows() || W.cols() != Y.cols()) {
        fail(ErrorKind::ShapeMismatch, "ridge objective shapes are inconsistent");
    }
    return (Y - X * W).squaredNorm() + lambda * W.squaredNorm();
}

RidgeGram::RidgeGram(Matrix X, Matrix Y) : X_(std::move(X)), Y_(std::move(Y)) {
    if (X_.rows() < 1) fail(ErrorKind::EmptyFit, "ridge fit needs at least one sample");
    if (X_.rows() != Y_.rows()) fail(ErrorKind::ShapeMismatch, "X and Y row counts differ");
    check_finite(X_, "X");
    check_finite(Y_, "Y");
    gram_ = X_.transpose() * X_;
}

RidgeModel RidgeGram::fit(double lambda) const {
    const auto llt = factor_normal_equations(gram_, lambda);
    return RidgeModel{llt.solve(X_.transpose() * Y_), lambda};
}

Matrix RidgeGram::predict(const Matrix& X_eval, double lambda) const {
    if (X_eval.cols() != X_.cols()) fail(ErrorKind::ShapeMismatch, "evaluation inputs have the wrong width");
    const auto llt = factor_normal_equations(gram_, lambda);
    // (X_eval G^-1) is k x p; G symmetric so solve G Z' = X_eval'.
    const Matrix projected = llt.solve(X_eval.transpose()).transpose();
    return (projected * X_.transpose()) * Y_;
}

// ---------------------------------------------------------------------------
// Learned attention

void SolverConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        fail(ErrorKind::ConfigError, "learning_rate must be finite and >= 0");
    }
    if (max_epochs < 1) fail(ErrorKind::ConfigError, "max_epochs must be >= 1");
    if (!(convergence_tol >= 0.0)) fail(ErrorKind::ConfigError, "convergence_tol must be >= 0");
    if (convergence_window < 1) fail(ErrorKind::ConfigError, "convergence_window must be >= 1");
    if (!(init_scale >= 0.0)) fail(ErrorKind::ConfigError, "init_scale must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
        fail(ErrorKind::ConfigError, "Adam moments must lie in [0,1) and epsilon > 0");
    }
    if (checkpoint_every < 1) fail(ErrorKind::ConfigError, "checkpoint_every must be >= 1");
}

AttentionGradients attention_gradients(const Matrix& A, const Matrix& W, const Matrix& stimulus_rows,
                                       const Matrix& task_rows, const Matrix& Y, double lambda, double lambda_A) {
    const Eigen::Index n = stimulus_rows.rows();
    if (task_rows.rows() != n || Y.rows() != n || A.rows() != task_rows.cols() || A.cols() != stimulus_rows.cols() ||
        W.rows() != stimulus_rows.cols() || W.cols() != Y.cols()) {
        fail(ErrorKind::ShapeMismatch, "attention objective shapes are inconsistent");
    }
    const Matrix gate = sigmoid(task_rows * A);
    const Matrix gated = gate.cwiseProduct(stimulus_rows);
    const Matrix residual = gated * W - Y;

    AttentionGradients g;
    g.objective = residual.squaredNorm() + lambda * W.squaredNorm() + lambda_A * A.squaredNorm();
    g.grad_W = 2.0 * gated.transpose() * residual + 2.0 * lambda * W;
    const Matrix d_gated = 2.0 * residual * W.transpose();
    const Matrix d_logits =
        d_gated.cwiseProduct(stimulus_rows).cwiseProduct(gate).cwiseProduct((1.0 - gate.array()).matrix());
    g.grad_A = task_rows.transpose() * d_logits + 2.0 * lambda_A * A;
    return g;
}

AttentionModel attention_init(Eigen::Index task_features, Eigen::Index stimulus_features, Eigen::Index outputs,
                              const SolverConfig& config) {
    AttentionModel model;
    model.A.resize(task_features, stimulus_features);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index c = 0; c < model.A.cols(); ++c) {
        for (Eigen::Index r = 0; r < model.A.rows(); ++r) model.A(r, c) = config.init_scale * normal(rng);
    }
    model.W = Matrix::Zero(stimulus_features, outputs);
    return model;
}

AttentionModel attention_fit(const Matrix& stimulus_rows, const Matrix& task_rows, const Matrix& Y, double lambda,
                             double lambda_A, const SolverConfig& config) {
    config.validate();
    if (stimulus_rows.rows() != task_rows.rows() || stimulus_rows.rows() != Y.rows()) {
        fail(ErrorKind::ShapeMismatch, "attention fit rows are not aligned");
    }
    if (stimulus_rows.rows() < 1) fail(ErrorKind::EmptyFit, "attention fit needs at least one sample");
    check_finite(stimulus_rows, "stimulus rows");
    check_finite(task_rows, "task rows");
    check_finite(Y, "Y");

    AttentionModel model = attention_init(task_rows.cols(), stimulus_rows.cols(), Y.cols(), config);
    model.lambda = lambda;
    model.lambda_A = lambda_A;

    AdamMoments moments_A{Matrix::Zero(model.A.rows(), model.A.cols()), Matrix::Zero(model.A.rows(), model.A.cols())};
    AdamMoments moments_W{Matrix::Zero(model.W.rows(), model.W.cols()), Matrix::Zero(model.W.rows(), model.W.cols())};

    Matrix best_A = model.A;
    Matrix best_W = model.W;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(config.max_epochs) + 1);

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto g = attention_gradients(model.A, model.W, stimulus_rows, task_rows, Y, lambda, lambda_A);
        if (!std::isfinite(g.objective)) {
            fail(ErrorKind::Diverged, "objective became non-finite at epoch " + std::to_string(epoch));
        }
        history.push_back(g.objective);
        if ((epoch - 1) % config.checkpoint_every == 0) model.checkpoints.push_back(g.objective);
        if (g.objective < best) {
            best = g.objective;
            best_A = model.A;
            best_W = model.W;
        }
        const auto w = static_cast<std::size_t>(config.convergence_window);
        if (history.size() > w) {
            const double before = history[history.size() - 1 - w];
            const double change = std::abs(before - g.objective) / std::max(std::abs(before), 1e-300);
            if (change < config.convergence_tol) {
                model.converged = true;
                model.epochs_run = epoch - 1;
                break;
            }
        }
        adam_step(model.A, g.grad_A, moments_A, config, epoch);
        adam_step(model.W, g.grad_W, moments_W, config, epoch);
        model.epochs_run = epoch;
    }

    if (!model.converged) {
        const auto g = attention_gradients(model.A, model.W, stimulus_rows, task_rows, Y, lambda, lambda_A);
        if (!std::isfinite(g.objective)) fail(ErrorKind::Diverged, "objective became non-finite");
        if (g.objective < best) {
            best = g.objective;
            best_A = model.A;
            best_W = model.W;
        }
    }
    model.A = std::move(best_A);
    model.W = std::move(best_W);
    model.objective = best;
    return model;
}

Vector attention_weights(const AttentionModel& model, const Eigen::Ref<const Vector>& task) {
    if (task.size() != model.A.rows()) fail(ErrorKind::ShapeMismatch, "task vector has the wrong length");
    const Vector logits = model.A.transpose() * task;
    return (1.0 + (-logits.array()).exp()).inverse().matrix();
}

Vector attention_predict(const AttentionModel& model, const Eigen::Ref<const Vector>& task,
                         const Eigen::Ref<const Vector>& stimulus) {
    if (stimulus.size() != model.W.rows()) fail(ErrorKind::ShapeMismatch, "stimulus vector has the wrong length");
    const Vector gated = attention_weights(model, task).cwiseProduct(stimulus);
    return model.W.transpose() * gated;
}

Matrix attention_predict_rows(const AttentionModel& model, const Matrix& stimulus_rows, const Matrix& task_rows) {
    if (stimulus_rows.rows() != task_rows.rows() || stimulus_rows.cols() != model.W.rows() ||
        task_rows.cols() != model.A.rows()) {
        fail(ErrorKind::ShapeMismatch, "attention prediction inputs have the wrong shape");
    }
    return sigmoid(task_rows * model.A).cwiseProduct(stimulus_rows) * model.W;
}

double attention_objective(const AttentionModel& model, const Matrix& stimulus_rows, const Matrix& task_rows,
                           const Matrix& Y) {
    return attention_gradients(model.A, model.W, stimulus_rows, task_rows, Y, model.lambda, model.lambda_A).objective;
}

// ---------------------------------------------------------------------------
// Model files

namespace {

using json = nlohmann::json;

struct Block {
    std::string name;
    Matrix values;
};

Matrix as_column(const Vector& v) { return v; }

ZScoreStats stats_from(const Matrix& means, const Matrix& stds) {
    ZScoreStats s;
    s.means = means.col(0);
    s.stds = stds.col(0);
    s.constant.resize(static_cast<std::size_t>(s.stds.size()));
    for (Eigen::Index i = 0; i < s.stds.size(); ++i) s.constant[static_cast<std::size_t>(i)] = s.stds(i) == 0.0;
    return s;
}

} // namespace

void save_model(const std::filesystem::path& dir, const FittedModel& model) {
    std::vector<Block> blocks{{"W", model.W},
                              {"A", model.A},
                              {"input_means", as_column(model.input_stats.means)},
                              {"input_stds", as_column(model.input_stats.stds)},
                              {"task_means", as_column(model.task_stats.means)},
                              {"task_stds", as_column(model.task_stats.stds)},
                              {"target_means", as_column(model.target_stats.means)},
                              {"target_stds", as_column(model.target_stats.stds)},
                              {"attention", model.attention}};
    json meta = {{"format", "taskenc-model/1"},
                 {"kind", to_string(model.kind)},
                 {"lambda", model.lambda},
                 {"lambda_attention", model.lambda_A},
                 {"n_sensors", model.n_sensors},
                 {"n_windows", model.n_windows},
                 {"feature_names", model.feature_names},
                 {"task_feature_names", model.task_feature_names},
                 {"task_ids", model.task_ids}};
    std::string payload;
    json layout = json::array();
    std::size_t offset = 0;
    for (const auto& b : blocks) {
        layout.push_back({{"name", b.name}, {"rows", b.values.rows()}, {"cols", b.values.cols()}, {"offset", offset}});
        for (Eigen::Index r = 0; r < b.values.rows(); ++r) {
            for (Eigen::Index c = 0; c < b.values.cols(); ++c) {
                auto raw = std::bit_cast<std::uint64_t>(b.values(r, c));
                if constexpr (std::endian::native == std::endian::big) {
                    raw = __builtin_bswap64(raw);
                }
                char bytes[8];
                std::memcpy(bytes, &raw, 8);
                payload.append(bytes, 8);
                ++offset;
            }
        }
    }
    meta["blocks"] = layout;
    text::write_file(dir / "model.json", meta.dump(2) + "\n");
    text::write_file(dir / "params.f64le", payload);
}

FittedModel load_model(const std::filesystem::path& dir) {
    json meta;
    try {
        meta = json::parse(text::read_file(dir / "model.json"));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::ParseError, (dir / "model.json").string() + ": " + e.what());
    }
    const std::string payload = text::read_file(dir / "params.f64le");
    try {
        FittedModel model;
        model.kind = parse_hypothesis(meta.at("kind").get<std::string>());
        model.lambda = meta.at("lambda").get<double>();
        model.lambda_A = meta.at("lambda_attention").get<double>();
        model.n_sensors = meta.at("n_sensors").get<std::size_t>();
        model.n_windows = meta.at("n_windows").get<std::size_t>();
        model.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
        model.task_feature_names = meta.at("task_feature_names").get<std::vector<std::string>>();
        model.task_ids = meta.at("task_ids").get<std::vector<std::string>>();
        std::map<std::string, Matrix> blocks;
        for (const auto& b : meta.at("blocks")) {
            const auto rows = b.at("rows").get<Eigen::Index>();
            const auto cols = b.at("cols").get<Eigen::Index>();
            const auto offset = b.at("offset").get<std::size_t>();
            if ((offset + static_cast<std::size_t>(rows * cols)) * 8 > payload.size()) {
                fail(ErrorKind::ShapeMismatch, "params.f64le is shorter than model.json declares");
            }
            Matrix m(rows, cols);
            std::size_t k = offset;
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < cols; ++c) {
                    std::uint64_t raw;
                    std::memcpy(&raw, payload.data() + 8 * k++, 8);
                    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap64(raw);
                    m(r, c) = std::bit_cast<double>(raw);
                }
            }
            blocks[b.at("name").get<std::string>()] = std::move(m);
        }
        model.W = blocks.at("W");
        model.A = blocks.at("A");
        model.attention = blocks.at("attention");
        if (model.attention.size() > 0 && static_cast<std::size_t>(model.attention.rows()) != model.task_ids.size()) {
            fail(ErrorKind::ShapeMismatch, "attention rows do not match task_ids");
        }
        model.input_stats = stats_from(blocks.at("input_means"), blocks.at("input_stds"));
        model.task_stats = stats_from(blocks.at("task_means"), blocks.at("task_stds"));
        model.target_stats = stats_from(blocks.at("target_means"), blocks.at("target_stds"));
        return model;
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, (dir / "model.json").string() + ": " + e.what());
    } catch (const std::out_of_range&) {
        fail(ErrorKind::ParseError, (dir / "model.json").string() + ": missing parameter block");
    }
}

} // namespace taskenc
