#include "taskenc/synth.hpp"

#include "taskenc/error.hpp"
#include "taskenc/evaluation.hpp"
#include "taskenc/parallel.hpp"
#include "taskenc/text_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <random>

namespace taskenc {

namespace {

enum Stream : std::uint64_t { kFeatures = 1, kParameters = 2, kNoise = 100 };

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * normal(rng);
    }
    return m;
}

Matrix feature_block(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, const GenerativeConfig& cfg,
                     double offset) {
    Matrix m = gaussian(rows, cols, rng, 1.0).array() + offset;
    if (cfg.ordinal) m = m.array().round().cwiseMax(1.0).cwiseMin(5.0).matrix();
    return m;
}

std::vector<std::string> names(const char* prefix, std::size_t n) {
    std::vector<std::string> out;
    const int width = n > 100 ? 3 : 2;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
        out.emplace_back(buf);
    }
    return out;
}

nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

} // namespace

void GenerativeConfig::validate() const {
    if (n_words < 1 || n_questions < 1 || f_s < 1 || f_t < 1 || n_sensors < 1 || n_windows < 1 || n_subjects < 1) {
        fail(ErrorKind::ConfigError, "synthetic dimensions must all be >= 1");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail(ErrorKind::ConfigError, "noise_sigma must be >= 0");
    if (!std::isfinite(signal_scale)) fail(ErrorKind::ConfigError, "signal_scale must be finite");
    if (!std::isfinite(feature_offset) || !std::isfinite(aux_offset)) fail(ErrorKind::ConfigError, "offsets must be finite");
    if (window_ms < 1) fail(ErrorKind::ConfigError, "window_ms must be >= 1");
}

GenerativeTruth draw_truth(const GenerativeConfig& config) {
    config.validate();
    auto rng = stream_rng(config.seed, kParameters);
    const auto m = static_cast<Eigen::Index>(config.n_sensors * config.n_windows);
    const auto fs = static_cast<Eigen::Index>(config.f_s);
    const auto ft = static_cast<Eigen::Index>(config.f_t);
    GenerativeTruth truth;
    truth.W_s = gaussian(fs, m, rng, config.signal_scale);
    truth.W_t = gaussian(ft, m, rng, config.signal_scale);
    // Keeps gate logits t*A near unit scale so the sigmoid is not saturated.
    const double a_scale = 1.0 / std::sqrt(static_cast<double>(ft) * (1.0 + config.feature_offset * config.feature_offset));
    truth.A = gaussian(ft, fs, rng, a_scale);
    return truth;
}

Vector forward_response(HypothesisKind kind, const GenerativeTruth& truth, const Vector& stimulus, const Vector& task,
                        const Matrix& aux_questions) {
    const Eigen::Index fs = stimulus.size(), ft = task.size(), m = truth.W_s.cols();
    Vector x = stimulus;
    if (kind == HypothesisKind::H41) {
        std::vector<double> cosines(static_cast<std::size_t>(fs));
        double tn = 0.0;
        for (Eigen::Index k = 0; k < ft; ++k) tn += task(k) * task(k);
        for (Eigen::Index j = 0; j < fs; ++j) {
            double dot = 0.0, an = 0.0;
            for (Eigen::Index k = 0; k < ft; ++k) {
                dot += task(k) * aux_questions(j, k);
                an += aux_questions(j, k) * aux_questions(j, k);
            }
            cosines[static_cast<std::size_t>(j)] = dot / std::sqrt(tn * an);
        }
        double total = 0.0;
        for (double c : cosines) total += std::exp(c);
        for (Eigen::Index j = 0; j < fs; ++j) x(j) = std::exp(cosines[static_cast<std::size_t>(j)]) / total * stimulus(j);
    } else if (kind == HypothesisKind::H42) {
        for (Eigen::Index j = 0; j < fs; ++j) {
            double logit = 0.0;
            for (Eigen::Index k = 0; k < ft; ++k) logit += task(k) * truth.A(k, j);
            x(j) = stimulus(j) / (1.0 + std::exp(-logit));
        }
    }
    Vector y = Vector::Zero(m);
    for (Eigen::Index c = 0; c < m; ++c) {
        double v = 0.0;
        if (kind != HypothesisKind::H2) {
            for (Eigen::Index j = 0; j < fs; ++j) v += x(j) * truth.W_s(j, c);
        }
        if (kind == HypothesisKind::H2 || kind == HypothesisKind::H3) {
            for (Eigen::Index k = 0; k < ft; ++k) v += task(k) * truth.W_t(k, c);
        }
        y(c) = v;
    }
    return y;
}

SynthDataset generate_dataset(const GenerativeConfig& config) { return generate_dataset(config, draw_truth(config)); }

SynthDataset generate_dataset(const GenerativeConfig& config, const GenerativeTruth& truth) {
    config.validate();
    const auto m = static_cast<Eigen::Index>(config.n_sensors * config.n_windows);
    if (truth.W_s.rows() != static_cast<Eigen::Index>(config.f_s) || truth.W_s.cols() != m ||
        truth.W_t.rows() != static_cast<Eigen::Index>(config.f_t) || truth.W_t.cols() != m ||
        truth.A.rows() != static_cast<Eigen::Index>(config.f_t) || truth.A.cols() != static_cast<Eigen::Index>(config.f_s)) {
        fail(ErrorKind::ShapeMismatch, "generative parameters do not match the configured dimensions");
    }
    SynthDataset ds;
    ds.config = config;
    ds.truth = truth;

    auto rng = stream_rng(config.seed, kFeatures);
    const auto words = names("w", config.n_words);
    const auto questions = names("q", config.n_questions);
    const auto features = names("f", config.f_s);
    ds.stimulus = FeatureMatrix(words, features,
                                feature_block(static_cast<Eigen::Index>(config.n_words),
                                              static_cast<Eigen::Index>(config.f_s), rng, config, config.feature_offset),
                                FeatureRole::Stimulus);
    ds.task = FeatureMatrix(questions, names("t", config.f_t),
                            feature_block(static_cast<Eigen::Index>(config.n_questions),
                                          static_cast<Eigen::Index>(config.f_t), rng, config, config.feature_offset),
                            FeatureRole::Task);
    ds.aux_questions = FeatureMatrix(features, names("t", config.f_t),
                                     feature_block(static_cast<Eigen::Index>(config.f_s),
                                                   static_cast<Eigen::Index>(config.f_t), rng, config, config.aux_offset),
                                     FeatureRole::Task);
    ds.design = ExperimentDesign::full_grid(words, questions);

    const auto R = static_cast<Eigen::Index>(ds.design.size());
    ds.signal.resize(R, m);
    for (Eigen::Index r = 0; r < R; ++r) {
        const auto row = static_cast<std::size_t>(r);
        const Vector s = ds.stimulus.values().row(static_cast<Eigen::Index>(ds.design.trial_word(row))).transpose();
        const Vector t = ds.task.values().row(static_cast<Eigen::Index>(ds.design.trial_question(row))).transpose();
        ds.signal.row(r) = forward_response(config.kind, truth, s, t, ds.aux_questions.values()).transpose();
    }

    ds.noise_sd = config.noise_sigma;
    if (config.noise_relative) {
        const double mean = ds.signal.mean();
        const double var = (ds.signal.array() - mean).square().mean();
        ds.noise_sd = config.noise_sigma * std::sqrt(var);
    }

    std::vector<std::int64_t> ids;
    for (const auto& t : ds.design.trials()) ids.push_back(t.id);
    std::vector<std::string> sensors;
    for (std::size_t l = 0; l < config.n_sensors; ++l) sensors.push_back("S" + std::to_string(l));
    for (std::size_t s = 0; s < config.n_subjects; ++s) {
        auto noise_rng = stream_rng(config.seed, kNoise + s);
        Matrix y = ds.signal;
        if (ds.noise_sd > 0.0) y += gaussian(R, m, noise_rng, ds.noise_sd);
        ds.subjects.emplace_back(std::move(y), config.n_sensors, config.n_windows, sensors, config.window_ms, ids);
    }
    return ds;
}

std::string subject_dir_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "sub-%02zu", index + 1);
    return buf;
}

void save_dataset(const std::filesystem::path& dir, const SynthDataset& ds) {
    save_design(dir / "design.csv", ds.design);
    save_feature_matrix(dir / "stimulus.csv", ds.stimulus);
    save_feature_matrix(dir / "task.csv", ds.task);
    save_feature_matrix(dir / "aux_questions.csv", ds.aux_questions);
    const auto& c = ds.config;
    nlohmann::json truth = {{"config",
                             {{"kind", to_string(c.kind)},
                              {"n_words", c.n_words},
                              {"n_questions", c.n_questions},
                              {"f_s", c.f_s},
                              {"f_t", c.f_t},
                              {"n_sensors", c.n_sensors},
                              {"n_windows", c.n_windows},
                              {"noise_sigma", c.noise_sigma},
                              {"noise_relative", c.noise_relative},
                              {"seed", c.seed},
                              {"signal_scale", c.signal_scale},
                              {"ordinal", c.ordinal},
                              {"n_subjects", c.n_subjects},
                              {"window_ms", c.window_ms},
                              {"feature_offset", c.feature_offset},
                              {"aux_offset", c.aux_offset}}},
                            {"noise_sd", ds.noise_sd},
                            {"W_s", matrix_json(ds.truth.W_s)},
                            {"W_t", matrix_json(ds.truth.W_t)},
                            {"A", matrix_json(ds.truth.A)}};
    text::write_file(dir / "truth.json", truth.dump(1) + "\n");
    if (ds.subjects.size() == 1) {
        save_brain_recordings(dir, ds.subjects.front());
    } else {
        for (std::size_t s = 0; s < ds.subjects.size(); ++s) save_brain_recordings(dir / subject_dir_name(s), ds.subjects[s]);
    }
}

RecoveryResult model_recovery(const SynthDataset& dataset, const std::vector<HypothesisKind>& hypotheses,
                              const RecoverySettings& settings) {
    const auto folds =
        generate_folds(dataset.design, settings.k_words, settings.k_questions, settings.fold_seed, settings.n_folds);
    const auto aux = std::make_shared<const FeatureMatrix>(dataset.aux_questions);
    CVConfig cv = settings.cv;
    cv.threads = 1;
    RecoveryResult out;
    out.accuracy.resize(hypotheses.size());
    parallel_for(hypotheses.size(), settings.cv.threads, [&](std::size_t h) {
        const auto spec = HypothesisSpec::make(hypotheses[h], hypotheses[h] == HypothesisKind::H41 ? aux : nullptr);
        double total = 0.0;
        for (const auto& brain : dataset.subjects) {
            const auto data = prepare_data(spec, dataset.stimulus, dataset.task, dataset.design, brain);
            total += mean_accuracy(run_cv(data, folds, cv), PairFilter::All, settings.tie_credit);
        }
        out.accuracy[h] = {hypotheses[h], total / static_cast<double>(dataset.subjects.size())};
    });
    out.ranking = out.accuracy;
    std::stable_sort(out.ranking.begin(), out.ranking.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

} // namespace taskenc
