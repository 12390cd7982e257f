#include "taskenc/crossval.hpp"

#include "taskenc/error.hpp"
#include "taskenc/evaluation.hpp"
#include "taskenc/parallel.hpp"
#include "taskenc/text_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace taskenc {

namespace {

std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

// Fisher-Yates with a plain modulo draw; std::shuffle is not portable across
// standard libraries and fold schedules must be.
template <class T>
void shuffle_in_place(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(items[i - 1], items[j]);
    }
}

std::vector<std::vector<std::size_t>> make_groups(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    if (k == 0) return {{}};
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle_in_place(order, rng);
    const std::size_t n_groups = (n + k - 1) / k;
    std::vector<std::vector<std::size_t>> groups(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
        for (std::size_t i = g * k; i < std::min(n, (g + 1) * k); ++i) groups[g].push_back(order[i]);
    }
    auto& last = groups.back();
    for (std::size_t i = 0; last.size() < k; ++i) {
        if (std::find(last.begin(), last.end(), order[i]) == last.end()) last.push_back(order[i]);
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());
    return groups;
}

Fold build_fold(const ExperimentDesign& design, std::size_t id, const std::vector<std::size_t>& words,
                const std::vector<std::size_t>& questions) {
    Fold fold;
    fold.id = id;
    std::vector<bool> held_w(design.words().size(), false);
    std::vector<bool> held_q(design.questions().size(), false);
    for (auto w : words) {
        held_w[w] = true;
        fold.held_words.push_back(design.words()[w]);
    }
    for (auto q : questions) {
        held_q[q] = true;
        fold.held_questions.push_back(design.questions()[q]);
    }
    for (std::size_t r = 0; r < design.size(); ++r) {
        const bool hw = held_w[design.trial_word(r)];
        const bool hq = held_q[design.trial_question(r)];
        if (hw && hq) {
            fold.test_rows.push_back(r);
        } else if (hw || hq) {
            fold.excluded_rows.push_back(r);
        } else {
            fold.train_rows.push_back(r);
        }
    }
    return fold;
}

std::vector<Fold> schedule_round(const ExperimentDesign& design, std::size_t k_words, std::size_t k_questions,
                                 std::uint64_t seed, std::uint64_t round, std::size_t first_id) {
    auto rng = seeded_rng(seed, round);
    const auto word_groups = make_groups(design.words().size(), k_words, rng);
    const auto question_groups = make_groups(design.questions().size(), k_questions, rng);
    const std::size_t count = std::max(word_groups.size(), question_groups.size());
    std::vector<Fold> folds;
    folds.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        folds.push_back(build_fold(design, first_id + i, word_groups[i % word_groups.size()],
                                   question_groups[i % question_groups.size()]));
    }
    return folds;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

// Train-only z-scoring of one matrix: returns (train, eval) in z units.
struct Scaled {
    Matrix train;
    Matrix eval;
    ZScoreStats stats;
};

Scaled scale(const Matrix& all, const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& eval_rows) {
    Scaled s;
    s.stats = zscore_fit(all, train_rows);
    s.train = zscore_apply(gather_rows(all, train_rows), s.stats);
    s.eval = zscore_apply(gather_rows(all, eval_rows), s.stats);
    return s;
}

double validation_score(ValidationMetric metric, const Matrix& pred, const Matrix& truth) {
    switch (metric) {
    case ValidationMetric::TwoVsTwo: {
        std::vector<Eigen::Index> mask(static_cast<std::size_t>(truth.cols()));
        std::iota(mask.begin(), mask.end(), Eigen::Index{0});
        const auto distance = mask.size() == 1 ? Distance::Absolute : Distance::Cosine;
        return tally_all_pairs(pred, truth, mask, distance).accuracy(0.5);
    }
    case ValidationMetric::NegCosine: {
        double total = 0.0;
        for (Eigen::Index i = 0; i < pred.rows(); ++i) {
            const double np = pred.row(i).norm(), nt = truth.row(i).norm();
            total += (np == 0.0 || nt == 0.0) ? 1.0 : 1.0 - pred.row(i).dot(truth.row(i)) / (np * nt);
        }
        return -total / static_cast<double>(pred.rows());
    }
    case ValidationMetric::NegEuclidean: {
        double total = 0.0;
        for (Eigen::Index i = 0; i < pred.rows(); ++i) total += (pred.row(i) - truth.row(i)).norm();
        return -total / static_cast<double>(pred.rows());
    }
    case ValidationMetric::R2: {
        const Eigen::RowVectorXd mean = truth.colwise().mean();
        const double sst = (truth.rowwise() - mean).squaredNorm();
        if (sst == 0.0) return 0.0;
        return 1.0 - (truth - pred).squaredNorm() / sst;
    }
    }
    return 0.0;
}

struct Candidate {
    double lambda;
    double lambda_A;
};

std::vector<Candidate> candidates_for(HypothesisKind kind, const HyperGrid& grid) {
    std::vector<Candidate> out;
    for (double l : grid.lambda_values) {
        if (kind == HypothesisKind::H42) {
            for (double la : grid.lambda_A_values) out.push_back({l, la});
        } else {
            out.push_back({l, 0.0});
        }
    }
    return out;
}

std::uint64_t inner_seed_for(std::uint64_t base, std::size_t fold_id) {
    return base ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(fold_id) + 1));
}

} // namespace

std::vector<Fold> generate_folds(const ExperimentDesign& design, std::size_t k_words, std::size_t k_questions,
                                 std::uint64_t seed, std::optional<std::size_t> n_folds) {
    if (k_words > 0 && k_words >= design.words().size()) {
        fail(ErrorKind::RangeError, "k_words=" + std::to_string(k_words) + " must be below the " +
                                        std::to_string(design.words().size()) + " words");
    }
    if (k_questions > 0 && k_questions >= design.questions().size()) {
        fail(ErrorKind::RangeError, "k_questions=" + std::to_string(k_questions) + " must be below the " +
                                        std::to_string(design.questions().size()) + " questions");
    }
    if (n_folds && *n_folds == 0) fail(ErrorKind::RangeError, "n_folds must be >= 1");

    std::vector<Fold> folds = schedule_round(design, k_words, k_questions, seed, 0, 0);
    if (!n_folds) return folds;
    for (std::uint64_t round = 1; folds.size() < *n_folds; ++round) {
        auto more = schedule_round(design, k_words, k_questions, seed, round, folds.size());
        folds.insert(folds.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    }
    folds.resize(*n_folds);
    return folds;
}

std::vector<Fold> nested_split(const ExperimentDesign& design, const Fold& outer, std::size_t k_words,
                               std::size_t k_questions, std::uint64_t seed, std::optional<std::size_t> n_folds) {
    std::vector<bool> word_present(design.words().size(), false);
    std::vector<bool> question_present(design.questions().size(), false);
    std::vector<Trial> trials;
    trials.reserve(outer.train_rows.size());
    for (auto r : outer.train_rows) {
        word_present[design.trial_word(r)] = true;
        question_present[design.trial_question(r)] = true;
        trials.push_back(design.trials()[r]);
    }
    std::vector<std::string> words, questions;
    for (std::size_t i = 0; i < word_present.size(); ++i) {
        if (word_present[i]) words.push_back(design.words()[i]);
    }
    for (std::size_t i = 0; i < question_present.size(); ++i) {
        if (question_present[i]) questions.push_back(design.questions()[i]);
    }
    if (words.size() <= k_words || questions.size() <= k_questions) {
        fail(ErrorKind::RangeError, "fold " + std::to_string(outer.id) + " has too few training words (" +
                                        std::to_string(words.size()) + ") or questions (" +
                                        std::to_string(questions.size()) + ") for an inner split");
    }
    const ExperimentDesign inner_design(std::move(trials), std::move(words), std::move(questions));
    auto inner = generate_folds(inner_design, k_words, k_questions, seed, n_folds);
    auto remap = [&](std::vector<std::size_t>& rows) {
        for (auto& r : rows) r = outer.train_rows[r];
    };
    for (auto& f : inner) {
        remap(f.train_rows);
        remap(f.test_rows);
        remap(f.excluded_rows);
    }
    return inner;
}

std::string folds_to_json(const ExperimentDesign& design, const std::vector<Fold>& folds) {
    auto ids = [&](const std::vector<std::size_t>& rows) {
        std::vector<std::int64_t> out;
        out.reserve(rows.size());
        for (auto r : rows) out.push_back(design.trials()[r].id);
        return out;
    };
    nlohmann::json list = nlohmann::json::array();
    for (const auto& f : folds) {
        list.push_back({{"id", f.id},
                        {"held_words", f.held_words},
                        {"held_questions", f.held_questions},
                        {"train_trials", ids(f.train_rows)},
                        {"test_trials", ids(f.test_rows)},
                        {"excluded_trials", ids(f.excluded_rows)}});
    }
    return nlohmann::json{{"folds", list}}.dump();
}

std::string fold_manifest_hash(const ExperimentDesign& design, const std::vector<Fold>& folds) {
    return text::fnv1a_hex(folds_to_json(design, folds));
}

HyperGrid HyperGrid::standard() {
    HyperGrid g;
    g.lambda_values = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7};
    g.lambda_A_values = g.lambda_values;
    return g;
}

void HyperGrid::validate() const {
    auto check = [](const std::vector<double>& v, const char* name) {
        if (v.empty()) fail(ErrorKind::ConfigError, std::string(name) + " grid is empty");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!(v[i] > 0.0) || !std::isfinite(v[i])) {
                fail(ErrorKind::ConfigError, std::string(name) + " values must be finite and > 0");
            }
            if (i > 0 && !(v[i] > v[i - 1])) fail(ErrorKind::ConfigError, std::string(name) + " values must ascend");
        }
    };
    check(lambda_values, "lambda");
    check(lambda_A_values, "lambda_attention");
}

std::string_view to_string(ValidationMetric metric) {
    switch (metric) {
    case ValidationMetric::TwoVsTwo: return "two_vs_two";
    case ValidationMetric::NegCosine: return "neg_cosine";
    case ValidationMetric::NegEuclidean: return "neg_euclidean";
    case ValidationMetric::R2: return "r2";
    }
    return "?";
}

ValidationMetric parse_validation_metric(std::string_view name) {
    for (auto m : {ValidationMetric::TwoVsTwo, ValidationMetric::NegCosine, ValidationMetric::NegEuclidean,
                   ValidationMetric::R2}) {
        if (to_string(m) == name) return m;
    }
    fail(ErrorKind::ConfigError, "unknown validation metric '" + std::string(name) + "'");
}

HypothesisData prepare_data(const HypothesisSpec& spec, const FeatureMatrix& stimulus, const FeatureMatrix& task,
                            const ExperimentDesign& design, const BrainRecordings& brain) {
    if (brain.n_trials() != design.size()) {
        fail(ErrorKind::ShapeMismatch, "recordings have " + std::to_string(brain.n_trials()) + " trials, design has " +
                                           std::to_string(design.size()));
    }
    for (std::size_t r = 0; r < design.size(); ++r) {
        if (brain.trial_ids()[r] != design.trials()[r].id) {
            fail(ErrorKind::ShapeMismatch, "recording rows are not in design order at row " + std::to_string(r));
        }
    }
    std::vector<std::size_t> rows(design.size());
    std::iota(rows.begin(), rows.end(), 0);
    HypothesisData data;
    data.kind = spec.kind();
    data.design = &design;
    data.inputs = assemble_inputs(spec, stimulus, task, design, rows).values;
    if (spec.kind() == HypothesisKind::H42) data.task_rows = assemble_task_rows(task, design, rows);
    data.targets = brain.values();
    data.n_sensors = brain.n_sensors();
    data.n_windows = brain.n_windows();
    return data;
}

GridChoice grid_search(const HypothesisData& data, const std::vector<Fold>& inner_folds, const CVConfig& config) {
    const auto candidates = candidates_for(data.kind, config.grid);
    if (candidates.empty()) fail(ErrorKind::ConfigError, "hyperparameter grid is empty");
    GridChoice choice;
    if (candidates.size() == 1) {
        choice.lambda = candidates[0].lambda;
        choice.lambda_A = candidates[0].lambda_A;
        return choice;
    }

    std::vector<double> sums(candidates.size(), 0.0);
    std::vector<bool> diverged(candidates.size(), false);
    std::size_t used = 0;
    for (const auto& fold : inner_folds) {
        if (fold.test_rows.empty() || fold.train_rows.empty()) continue;
        ++used;
        const auto x = scale(data.inputs, fold.train_rows, fold.test_rows);
        const auto y = scale(data.targets, fold.train_rows, fold.test_rows);
        if (data.kind == HypothesisKind::H42) {
            const auto t = scale(data.task_rows, fold.train_rows, fold.test_rows);
            for (std::size_t c = 0; c < candidates.size(); ++c) {
                if (diverged[c]) continue;
                try {
                    const auto model = attention_fit(x.train, t.train, y.train, candidates[c].lambda,
                                                     candidates[c].lambda_A, config.solver);
                    ++choice.n_fits;
                    sums[c] += validation_score(config.metric, attention_predict_rows(model, x.eval, t.eval), y.eval);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Diverged) throw;
                    diverged[c] = true;
                }
            }
        } else {
            const RidgeGram gram(x.train, y.train);
            for (std::size_t c = 0; c < candidates.size(); ++c) {
                ++choice.n_fits;
                sums[c] += validation_score(config.metric, gram.predict(x.eval, candidates[c].lambda), y.eval);
            }
        }
    }
    if (used == 0) fail(ErrorKind::RangeError, "no inner fold has both training and validation trials");

    bool found = false;
    double best = 0.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double score = sums[c] / static_cast<double>(used);
        choice.scores.push_back({candidates[c].lambda, candidates[c].lambda_A, score, static_cast<bool>(diverged[c])});
        if (diverged[c]) continue;
        // Candidates ascend, so >= hands ties to the stronger regularization.
        if (!found || score >= best) {
            found = true;
            best = score;
            choice.lambda = candidates[c].lambda;
            choice.lambda_A = candidates[c].lambda_A;
        }
    }
    if (!found) fail(ErrorKind::SearchFailed, "every hyperparameter candidate diverged");
    return choice;
}

CVResult run_cv(const HypothesisData& data, const std::vector<Fold>& folds, const CVConfig& config) {
    config.grid.validate();
    if (data.kind == HypothesisKind::H42) config.solver.validate();
    if (!data.design) fail(ErrorKind::ConfigError, "hypothesis data has no design");
    CVResult result;
    result.kind = data.kind;
    result.design = *data.design;
    result.n_sensors = data.n_sensors;
    result.n_windows = data.n_windows;
    result.folds.resize(folds.size());
    const bool searching = candidates_for(data.kind, config.grid).size() > 1;

    parallel_for(folds.size(), config.threads, [&](std::size_t i) {
        const Fold& fold = folds[i];
        FoldResult& out = result.folds[i];
        out.fold_id = fold.id;
        out.test_rows = fold.test_rows;
        try {
            if (fold.train_rows.empty()) fail(ErrorKind::EmptyFit, "no training trials");
            std::vector<Fold> inner;
            if (searching) {
                inner = nested_split(*data.design, fold, config.inner_k_words, config.inner_k_questions,
                                     inner_seed_for(config.inner_seed, fold.id), config.inner_n_folds);
            }
            out.choice = grid_search(data, inner, config);
            const auto x = scale(data.inputs, fold.train_rows, fold.test_rows);
            const auto y = scale(data.targets, fold.train_rows, fold.test_rows);
            out.target_stats = y.stats;
            out.truth = y.eval;
            if (data.kind == HypothesisKind::H42) {
                const auto t = scale(data.task_rows, fold.train_rows, fold.test_rows);
                const auto model =
                    attention_fit(x.train, t.train, y.train, out.choice.lambda, out.choice.lambda_A, config.solver);
                out.converged = model.converged;
                out.epochs = model.epochs_run;
                out.predicted = attention_predict_rows(model, x.eval, t.eval);
            } else {
                out.predicted = ridge_predict(ridge_fit(x.train, y.train, out.choice.lambda), x.eval);
            }
        } catch (const Error& e) {
            rethrow_with_context(e, to_string(data.kind) + " fold " + std::to_string(fold.id));
        }
    });
    return result;
}

Matrix unzscored_predictions(const FoldResult& fold) { return zscore_invert(fold.predicted, fold.target_stats); }

std::vector<LearningCurvePoint> learning_curve(const HypothesisData& data, const std::vector<Fold>& folds,
                                               const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                               const CVConfig& config, double tie_credit) {
    if (folds.empty()) fail(ErrorKind::RangeError, "learning curve needs at least one fold");
    std::size_t available = folds.front().train_rows.size();
    for (const auto& f : folds) available = std::min(available, f.train_rows.size());
    for (auto size : sizes) {
        if (size == 0) fail(ErrorKind::RangeError, "training size 0 leaves nothing to fit");
        if (size > available) {
            fail(ErrorKind::RangeError, "training size " + std::to_string(size) + " exceeds the " +
                                            std::to_string(available) + " training trials available");
        }
    }
    std::vector<LearningCurvePoint> points;
    for (auto size : sizes) {
        std::vector<Fold> sub = folds;
        for (auto& f : sub) {
            auto rng = seeded_rng(seed ^ static_cast<std::uint64_t>(size), f.id);
            auto rows = f.train_rows;
            // Partial Fisher-Yates: the first `size` entries become a uniform sample.
            for (std::size_t i = 0; i < size; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng() % (rows.size() - i));
                std::swap(rows[i], rows[j]);
            }
            rows.resize(size);
            std::sort(rows.begin(), rows.end());
            f.train_rows = std::move(rows);
        }
        const auto result = run_cv(data, sub, config);
        points.push_back({size, mean_accuracy(result, PairFilter::All, tie_credit)});
    }
    return points;
}

} // namespace taskenc
