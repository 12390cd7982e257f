#include "taskenc/cli/commands.hpp"

#include "taskenc/cli/svg.hpp"
#include "taskenc/error.hpp"
#include "taskenc/evaluation.hpp"
#include "taskenc/stats.hpp"
#include "taskenc/text_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

namespace taskenc::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Unit {
    std::string name;
    AlignedRecordings aligned;
    std::vector<Fold> folds;  // rows of aligned.design
};

struct LoadedData {
    ExperimentDesign design;
    FeatureMatrix stimulus;
    FeatureMatrix task;
    std::shared_ptr<const FeatureMatrix> aux;
    std::vector<Unit> units;
};

std::string unit_name(const fs::path& dir) {
    auto name = dir.filename().string();
    if (name.empty()) name = dir.parent_path().filename().string();
    return name.empty() ? "unit" : name;
}

LoadedData load_data(const RunConfig& cfg) {
    LoadedData d;
    d.design = load_design(cfg.data.design);
    d.stimulus = load_feature_matrix(cfg.data.stimulus, FeatureRole::Stimulus);
    d.task = load_feature_matrix(cfg.data.task, FeatureRole::Task);
    if (cfg.data.aux_questions) {
        d.aux = std::make_shared<const FeatureMatrix>(load_feature_matrix(*cfg.data.aux_questions, FeatureRole::Task));
    }
    std::set<std::string> seen;
    for (const auto& dir : cfg.data.brain) {
        auto rec = load_brain_recordings(dir);
        if (cfg.downsample > 1) rec = downsample_time(rec, cfg.downsample);
        Unit u;
        u.name = unit_name(dir);
        while (!seen.insert(u.name).second) u.name += "_";
        u.aligned = align_to_design(d.design, rec);
        d.units.push_back(std::move(u));
    }
    return d;
}

std::vector<Fold> map_folds(const std::vector<Fold>& folds, const ExperimentDesign& from, const ExperimentDesign& to) {
    std::vector<Fold> out = folds;
    auto remap = [&](std::vector<std::size_t>& rows) {
        std::vector<std::size_t> mapped;
        for (auto r : rows) {
            if (auto row = to.row_of_trial(from.trials()[r].id)) mapped.push_back(*row);
        }
        rows = std::move(mapped);
    };
    for (auto& f : out) {
        remap(f.train_rows);
        remap(f.test_rows);
        remap(f.excluded_rows);
    }
    return out;
}

CVConfig cv_config(const RunConfig& cfg, std::size_t threads) {
    CVConfig c;
    c.grid = cfg.grid;
    c.solver = cfg.solver;
    c.metric = cfg.evaluation.validation_metric;
    c.inner_k_words = cfg.folds.inner_k_words;
    c.inner_k_questions = cfg.folds.inner_k_questions;
    c.inner_n_folds = cfg.folds.inner_n_folds;
    c.inner_seed = cfg.folds.inner_seed;
    c.threads = threads;
    return c;
}

std::string fmt(double v) { return std::isfinite(v) ? text::format_double(v) : "nan"; }

// A family of tests corrected together.
struct Family {
    std::string name;
    std::vector<std::string> cells;
    std::vector<std::optional<TestResult>> tests;  // nullopt: degenerate sample
};

std::vector<bool> family_rejections(const Family& f, double q) {
    std::vector<double> p;
    for (const auto& t : f.tests) {
        if (t) p.push_back(t->p_value);
    }
    const auto mask = bh_fdr(p, q);
    std::vector<bool> out;
    std::size_t k = 0;
    for (const auto& t : f.tests) out.push_back(t ? static_cast<bool>(mask[k++]) : false);
    return out;
}

std::string family_rows(const Family& f, double q) {
    const auto rejected = family_rejections(f, q);
    std::string out;
    for (std::size_t i = 0; i < f.cells.size(); ++i) {
        const auto& t = f.tests[i];
        out += text::csv_field(f.name) + "," + text::csv_field(f.cells[i]) + "," +
               (t ? fmt(t->statistic) : "nan") + "," + (t ? fmt(t->p_value) : "nan") + "," +
               (rejected[i] ? "1" : "0") + "\n";
    }
    return out;
}

std::optional<TestResult> try_test(const std::function<TestResult()>& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::DegenerateTest) return std::nullopt;
        throw;
    }
}

double modal(const std::vector<double>& values) {
    std::map<double, std::size_t> counts;
    for (double v : values) ++counts[v];
    double best = values.empty() ? 0.0 : values.front();
    std::size_t n = 0;
    for (const auto& [v, c] : counts) {
        if (c >= n) {  // ascending keys: ties go to the larger value
            best = v;
            n = c;
        }
    }
    return best;
}

FittedModel fit_full_model(const HypothesisData& data, const HypothesisSpec& spec, const LoadedData& loaded,
                           const CVResult& cv, const SolverConfig& solver, const BrainRecordings& brain) {
    std::vector<double> lambdas, lambda_As;
    for (const auto& f : cv.folds) {
        lambdas.push_back(f.choice.lambda);
        lambda_As.push_back(f.choice.lambda_A);
    }
    FittedModel m;
    m.kind = data.kind;
    m.lambda = modal(lambdas);
    m.n_sensors = data.n_sensors;
    m.n_windows = data.n_windows;
    m.input_stats = zscore_fit(data.inputs);
    m.target_stats = zscore_fit(data.targets);
    const Matrix x = zscore_apply(data.inputs, m.input_stats);
    const Matrix y = zscore_apply(data.targets, m.target_stats);
    const auto& snames = loaded.stimulus.column_names();
    const auto& tnames = loaded.task.column_names();
    switch (data.kind) {
    case HypothesisKind::H1:
    case HypothesisKind::H41: m.feature_names = snames; break;
    case HypothesisKind::H2: m.task_feature_names = tnames; break;
    case HypothesisKind::H3:
    case HypothesisKind::H42:
        m.feature_names = snames;
        m.task_feature_names = tnames;
        break;
    }
    m.task_ids = loaded.task.row_ids();
    if (data.kind == HypothesisKind::H42) {
        // The modal pair is taken from the folds that chose the modal lambda.
        std::vector<double> paired;
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            if (lambdas[i] == m.lambda) paired.push_back(lambda_As[i]);
        }
        m.lambda_A = modal(paired);
        m.task_stats = zscore_fit(data.task_rows);
        const Matrix t = zscore_apply(data.task_rows, m.task_stats);
        const auto model = attention_fit(x, t, y, m.lambda, m.lambda_A, solver);
        m.W = model.W;
        m.A = model.A;
        const Matrix tasks = zscore_apply(loaded.task.values(), m.task_stats);
        m.attention = (1.0 + (-(tasks * m.A).array()).exp()).inverse().matrix();
    } else {
        m.W = ridge_fit(x, y, m.lambda).W;
        if (data.kind == HypothesisKind::H41) {
            const auto table = precomputed_attention_table(loaded.task, *spec.aux_questions());
            m.attention.resize(static_cast<Eigen::Index>(table.size()), loaded.stimulus.cols());
            for (std::size_t q = 0; q < table.size(); ++q) {
                m.attention.row(static_cast<Eigen::Index>(q)) = table[q].weights.transpose();
            }
        }
    }
    (void)brain;
    return m;
}

struct TimecourseKey {
    HypothesisKind kind;
    PairFilter filter;
    bool operator<(const TimecourseKey& o) const {
        return std::tie(kind, filter) < std::tie(o.kind, o.filter);
    }
};

} // namespace

// ---------------------------------------------------------------------------

fs::path cmd_synth(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed) {
    auto cfg = load_synth_config(config);
    if (seed) cfg.seed = *seed;
    save_dataset(out, generate_dataset(cfg));
    return out;
}

RunOutcome cmd_run(const fs::path& config, const RunOverrides& overrides) {
    RunConfig cfg = load_run_config(config);
    if (overrides.seed) cfg.folds.seed = *overrides.seed;
    if (overrides.hypotheses) cfg.hypotheses = *overrides.hypotheses;
    if (overrides.learning_curve) cfg.learning_curve = *overrides.learning_curve;
    fs::path out;
    if (overrides.out) {
        out = *overrides.out;
    } else if (cfg.output) {
        out = *cfg.output;
    } else {
        fail(ErrorKind::ConfigError, "no output directory: pass --out or set 'output'");
    }
    return run_pipeline(cfg, out, std::max<std::size_t>(1, overrides.threads));
}

RunOutcome run_pipeline(const RunConfig& cfg, const fs::path& out_dir, std::size_t threads) {
    cfg.validate();
    const LoadedData data = [&] {
        try {
            return load_data(cfg);
        } catch (const Error& e) {
            rethrow_with_context(e, "loading data");
        }
    }();
    const auto folds = generate_folds(data.design, cfg.folds.k_words, cfg.folds.k_questions, cfg.folds.seed,
                                      cfg.folds.n_folds);
    std::vector<Unit> units = data.units;
    for (auto& u : units) u.folds = map_folds(folds, data.design, u.aligned.design);
    const CVConfig cvcfg = cv_config(cfg, threads);
    const double tie = cfg.evaluation.tie_credit;
    const std::size_t T = units.front().aligned.brain.n_windows();
    const std::size_t L = units.front().aligned.brain.n_sensors();
    for (const auto& u : units) {
        if (u.aligned.brain.n_windows() != T || u.aligned.brain.n_sensors() != L) {
            fail(ErrorKind::ShapeMismatch, "subject " + u.name + " has a different sensor/window layout");
        }
    }
    const bool subject_units = units.size() >= 2;

    // cv[h][u]
    std::vector<std::vector<CVResult>> cv(cfg.hypotheses.size());
    std::vector<HypothesisSpec> specs;
    for (std::size_t h = 0; h < cfg.hypotheses.size(); ++h) {
        const auto kind = cfg.hypotheses[h];
        specs.push_back(HypothesisSpec::make(kind, kind == HypothesisKind::H41 ? data.aux : nullptr));
        for (const auto& u : units) {
            const auto hd = prepare_data(specs[h], data.stimulus, data.task, u.aligned.design, u.aligned.brain);
            try {
                cv[h].push_back(run_cv(hd, u.folds, cvcfg));
            } catch (const Error& e) {
                rethrow_with_context(e, "subject " + u.name);
            }
        }
    }

    // Accuracy per hypothesis, filter, unit.
    std::map<TimecourseKey, std::vector<Timecourse>> timecourses;
    std::map<TimecourseKey, std::vector<std::vector<std::vector<PairTally>>>> tallies;
    std::vector<std::string> skipped;
    std::vector<PairFilter> filters = cfg.evaluation.filters;
    if (std::find(filters.begin(), filters.end(), PairFilter::All) == filters.end()) {
        filters.insert(filters.begin(), PairFilter::All);
    }
    for (std::size_t h = 0; h < cfg.hypotheses.size(); ++h) {
        for (auto filter : filters) {
            const TimecourseKey key{cfg.hypotheses[h], filter};
            std::vector<Timecourse> per_unit;
            std::vector<std::vector<std::vector<PairTally>>> per_unit_tallies;
            bool ok = true;
            for (const auto& result : cv[h]) {
                try {
                    per_unit.push_back(accuracy_timecourse(result, filter, tie));
                    per_unit_tallies.push_back(fold_window_tallies(result, filter));
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::NoPairs || filter == PairFilter::All) throw;
                    ok = false;
                    break;
                }
            }
            if (!ok) {
                skipped.push_back(to_string(cfg.hypotheses[h]) + ":" + std::string(to_string(filter)));
                continue;
            }
            timecourses[key] = std::move(per_unit);
            tallies[key] = std::move(per_unit_tallies);
        }
    }

    const int window_ms = units.front().aligned.brain.window_ms();
    const std::size_t n_units = units.size();

    // accuracy_timecourse.csv and fold_accuracy.csv
    std::string tc_csv = "hypothesis,filter,unit,window,accuracy,n_pairs\n";
    std::string fold_csv = "hypothesis,filter,unit,fold,window,accuracy,n_pairs\n";
    std::map<TimecourseKey, std::vector<double>> unit_mean;
    for (const auto& [key, per_unit] : timecourses) {
        const std::string hname = to_string(key.kind);
        const std::string fname(to_string(key.filter));
        for (std::size_t u = 0; u < n_units; ++u) {
            for (std::size_t w = 0; w < T; ++w) {
                tc_csv += hname + "," + fname + "," + text::csv_field(units[u].name) + "," + std::to_string(w) + "," +
                          fmt(per_unit[u].accuracy[w]) + "," + std::to_string(per_unit[u].n_pairs[w]) + "\n";
            }
            const auto& fold_tallies = tallies.at(key)[u];
            for (std::size_t f = 0; f < fold_tallies.size(); ++f) {
                for (std::size_t w = 0; w < T; ++w) {
                    const auto& t = fold_tallies[f][w];
                    if (t.n() == 0) continue;
                    fold_csv += hname + "," + fname + "," + text::csv_field(units[u].name) + "," +
                                std::to_string(units[u].folds[f].id) + "," + std::to_string(w) + "," +
                                fmt(t.accuracy(tie)) + "," + std::to_string(t.n()) + "\n";
                }
            }
        }
        std::vector<double> mean(T, 0.0);
        std::vector<std::size_t> pairs(T, 0);
        for (std::size_t w = 0; w < T; ++w) {
            for (std::size_t u = 0; u < n_units; ++u) {
                mean[w] += per_unit[u].accuracy[w];
                pairs[w] += per_unit[u].n_pairs[w];
            }
            mean[w] /= static_cast<double>(n_units);
            if (n_units > 1) {
                tc_csv += hname + "," + fname + ",mean," + std::to_string(w) + "," + fmt(mean[w]) + "," +
                          std::to_string(pairs[w]) + "\n";
            }
        }
        unit_mean[key] = std::move(mean);
    }

    // Samples for window-level tests: one value per subject, or per fold with a single subject.
    auto window_samples = [&](const TimecourseKey& key, std::size_t w) {
        std::vector<double> values;
        if (subject_units) {
            for (const auto& tc : timecourses.at(key)) values.push_back(tc.accuracy[w]);
        } else {
            for (const auto& fold : tallies.at(key).front()) {
                if (fold[w].n() > 0) values.push_back(fold[w].accuracy(tie));
            }
        }
        return values;
    };

    std::vector<Family> families;
    for (const auto& [key, per_unit] : timecourses) {
        Family fam;
        fam.name = "chance:" + to_string(key.kind) + ":" + std::string(to_string(key.filter));
        for (std::size_t w = 0; w < T; ++w) {
            fam.cells.push_back("w" + std::to_string(w));
            const auto values = window_samples(key, w);
            fam.tests.push_back(try_test([&] { return one_sample_ttest(values, 0.5); }));
        }
        families.push_back(std::move(fam));
    }
    for (std::size_t a = 0; a < cfg.hypotheses.size(); ++a) {
        for (std::size_t b = a + 1; b < cfg.hypotheses.size(); ++b) {
            const TimecourseKey ka{cfg.hypotheses[a], PairFilter::All};
            const TimecourseKey kb{cfg.hypotheses[b], PairFilter::All};
            Family fam;
            fam.name = "pair:" + to_string(ka.kind) + "-" + to_string(kb.kind) + ":all";
            for (std::size_t w = 0; w < T; ++w) {
                fam.cells.push_back("w" + std::to_string(w));
                std::vector<double> va, vb;
                if (subject_units) {
                    va = window_samples(ka, w);
                    vb = window_samples(kb, w);
                } else {
                    const auto& fa = tallies.at(ka).front();
                    const auto& fb = tallies.at(kb).front();
                    for (std::size_t f = 0; f < fa.size(); ++f) {
                        if (fa[f][w].n() > 0 && fb[f][w].n() > 0) {
                            va.push_back(fa[f][w].accuracy(tie));
                            vb.push_back(fb[f][w].accuracy(tie));
                        }
                    }
                }
                fam.tests.push_back(try_test([&] { return paired_ttest(va, vb); }));
            }
            families.push_back(std::move(fam));
        }
    }
    std::string stats_csv = kStatsCsvHeader;
    for (const auto& fam : families) stats_csv += family_rows(fam, cfg.evaluation.fdr_q);

    // accuracy_grid.csv: mean over subjects per cell.
    std::string grid_csv = kGridCsvHeader;
    std::vector<HeatmapPanel> panels;
    for (std::size_t h = 0; h < cfg.hypotheses.size(); ++h) {
        for (auto filter : filters) {
            if (!timecourses.count({cfg.hypotheses[h], filter})) continue;
            AccuracyGrid mean_grid;
            for (std::size_t u = 0; u < n_units; ++u) {
                auto g = accuracy_grid(cv[h][u], filter, cfg.evaluation.grid_window_group, tie);
                if (u == 0) {
                    mean_grid = g;
                } else {
                    mean_grid.values += g.values;
                    mean_grid.n_pairs += g.n_pairs;
                }
            }
            mean_grid.values /= static_cast<double>(n_units);
            grid_csv += grid_csv_rows(to_string(cfg.hypotheses[h]), mean_grid, units.front().aligned.brain.sensor_labels());
            if (filter == PairFilter::All) panels.push_back({to_string(cfg.hypotheses[h]), mean_grid.values});
        }
    }

    // results.csv: one row per tested trial.
    std::string results_csv =
        "hypothesis,unit,fold,trial_id,word_id,question_id,lambda,lambda_attention,cosine_distance,squared_error\n";
    for (std::size_t h = 0; h < cfg.hypotheses.size(); ++h) {
        for (std::size_t u = 0; u < n_units; ++u) {
            const auto& result = cv[h][u];
            for (const auto& f : result.folds) {
                for (std::size_t i = 0; i < f.test_rows.size(); ++i) {
                    const auto& trial = result.design.trials()[f.test_rows[i]];
                    const auto r = static_cast<Eigen::Index>(i);
                    const double np = f.predicted.row(r).norm(), nt = f.truth.row(r).norm();
                    const double cd =
                        (np == 0.0 || nt == 0.0) ? 1.0 : 1.0 - f.predicted.row(r).dot(f.truth.row(r)) / (np * nt);
                    results_csv += to_string(cfg.hypotheses[h]) + "," + text::csv_field(units[u].name) + "," +
                                   std::to_string(f.fold_id) + "," + std::to_string(trial.id) + "," +
                                   text::csv_field(trial.word) + "," + text::csv_field(trial.question) + "," +
                                   fmt(f.choice.lambda) + "," + fmt(f.choice.lambda_A) + "," + fmt(cd) + "," +
                                   fmt((f.predicted.row(r) - f.truth.row(r)).squaredNorm()) + "\n";
                }
            }
        }
    }

    // Learning curves.
    std::string lc_csv;
    if (!cfg.learning_curve.empty()) {
        lc_csv = "hypothesis,unit,size,accuracy\n";
        for (std::size_t h = 0; h < cfg.hypotheses.size(); ++h) {
            for (std::size_t u = 0; u < n_units; ++u) {
                const auto hd =
                    prepare_data(specs[h], data.stimulus, data.task, units[u].aligned.design, units[u].aligned.brain);
                const auto points =
                    learning_curve(hd, units[u].folds, cfg.learning_curve, cfg.learning_curve_seed, cvcfg, tie);
                for (const auto& p : points) {
                    lc_csv += to_string(cfg.hypotheses[h]) + "," + text::csv_field(units[u].name) + "," +
                              std::to_string(p.size) + "," + fmt(p.accuracy) + "\n";
                }
            }
        }
    }

    // Ranking by mean 2v2 over windows and subjects.
    RunOutcome outcome;
    outcome.out_dir = out_dir;
    for (std::size_t h = 0; h < cfg.hypotheses.size(); ++h) {
        const auto& mean = unit_mean.at({cfg.hypotheses[h], PairFilter::All});
        outcome.ranking.emplace_back(cfg.hypotheses[h],
                                     std::accumulate(mean.begin(), mean.end(), 0.0) / static_cast<double>(T));
    }
    std::stable_sort(outcome.ranking.begin(), outcome.ranking.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    // Outputs.
    fs::create_directories(out_dir);
    text::write_file(out_dir / "results.csv", results_csv);
    text::write_file(out_dir / "accuracy_timecourse.csv", tc_csv);
    text::write_file(out_dir / "fold_accuracy.csv", fold_csv);
    text::write_file(out_dir / "accuracy_grid.csv", grid_csv);
    text::write_file(out_dir / "stats.csv", stats_csv);
    text::write_file(out_dir / "folds.json", folds_to_json(data.design, folds) + "\n");
    if (!lc_csv.empty()) text::write_file(out_dir / "learning_curve.csv", lc_csv);

    std::vector<double> x_ms;
    for (std::size_t w = 0; w < T; ++w) x_ms.push_back(static_cast<double>(w) * window_ms);
    std::vector<LineSeries> lines;
    for (const auto kind : cfg.hypotheses) {
        LineSeries s;
        s.name = to_string(kind);
        s.values = unit_mean.at({kind, PairFilter::All});
        for (const auto& fam : families) {
            if (fam.name == "chance:" + s.name + ":all") s.marked = family_rejections(fam, cfg.evaluation.fdr_q);
        }
        lines.push_back(std::move(s));
    }
    text::write_file(out_dir / "timecourse.svg", line_chart_svg("2v2 accuracy per window (all pairs)", x_ms, lines));
    text::write_file(out_dir / "grid.svg", heatmap_svg("2v2 accuracy, sensors x window groups", panels));

    // summary.json
    json summary;
    summary["hypotheses"] = json::array();
    for (auto k : cfg.hypotheses) summary["hypotheses"].push_back(to_string(k));
    summary["units"] = json::array();
    for (const auto& u : units) summary["units"].push_back(u.name);
    summary["stats_unit"] = subject_units ? "subjects" : "folds";
    summary["seeds"] = {{"folds", cfg.folds.seed},
                        {"inner_folds", cfg.folds.inner_seed},
                        {"solver", cfg.solver.seed},
                        {"learning_curve", cfg.learning_curve_seed}};
    summary["fold_manifest_hash"] = fold_manifest_hash(data.design, folds);
    summary["n_folds"] = folds.size();
    {
        json per_fold = json::array();
        for (const auto& f : folds) {
            per_fold.push_back({{"id", f.id},
                                {"train_trials", f.train_rows.size()},
                                {"test_trials", f.test_rows.size()},
                                {"held_out_trials", f.test_rows.size() + f.excluded_rows.size()}});
        }
        const std::size_t nw = data.design.words().size(), nq = data.design.questions().size();
        summary["fold_accounting"] = {
            {"k_words", cfg.folds.k_words},
            {"k_questions", cfg.folds.k_questions},
            {"n_words", nw},
            {"n_questions", nq},
            {"held_out_rule", "union"},
            {"held_out_note",
             "a trial whose word and question are both held out is counted once; on a full grid the held-out set "
             "has k_words*n_questions + k_questions*n_words - k_words*k_questions trials, not the double-counted "
             "k_words*n_questions + k_questions*n_words"},
            {"held_out_union_full_grid", cfg.folds.k_words * nq + cfg.folds.k_questions * nw -
                                             cfg.folds.k_words * cfg.folds.k_questions},
            {"held_out_double_counted", cfg.folds.k_words * nq + cfg.folds.k_questions * nw},
            {"folds", per_fold}};
    }
    summary["decisions"] = {{"zscore_std", "population"},
                            {"zscore_targets", "per sensor-window cell, training rows only"},
                            {"constant_columns", "map to 0"},
                            {"attention_cosine", "plain (not mean-centered)"},
                            {"attention_then_zscore", true},
                            {"tie_credit", tie},
                            {"single_value_distance", "absolute"},
                            {"identical_target_pairs", "excluded"},
                            {"pairs_within_fold_only", true},
                            {"validation_metric", std::string(to_string(cfg.evaluation.validation_metric))},
                            {"lambda_tie_break", "larger"},
                            {"held_out", "union"},
                            {"fdr", "Benjamini-Hochberg per family"},
                            {"fdr_q", cfg.evaluation.fdr_q},
                            {"t_tests", "two-sided"},
                            {"downsample", cfg.downsample},
                            {"grid_window_group", cfg.evaluation.grid_window_group}};
    json results = json::object();
    for (std::size_t h = 0; h < cfg.hypotheses.size(); ++h) {
        json r;
        json per_unit = json::object();
        for (std::size_t u = 0; u < n_units; ++u) {
            const auto& tc = timecourses.at({cfg.hypotheses[h], PairFilter::All})[u];
            per_unit[units[u].name] =
                std::accumulate(tc.accuracy.begin(), tc.accuracy.end(), 0.0) / static_cast<double>(T);
        }
        r["mean_accuracy_per_unit"] = per_unit;
        for (const auto& [kind, acc] : outcome.ranking) {
            if (kind == cfg.hypotheses[h]) r["mean_accuracy"] = acc;
        }
        json lambdas = json::array(), lambda_As = json::array(), converged = json::array(), epochs = json::array();
        for (const auto& f : cv[h].front().folds) {
            lambdas.push_back(f.choice.lambda);
            lambda_As.push_back(f.choice.lambda_A);
            converged.push_back(f.converged);
            epochs.push_back(f.epochs);
        }
        r["chosen_lambda"] = lambdas;
        if (cfg.hypotheses[h] == HypothesisKind::H42) {
            r["chosen_lambda_attention"] = lambda_As;
            r["converged"] = converged;
            r["epochs"] = epochs;
        }
        results[to_string(cfg.hypotheses[h])] = r;
    }
    summary["results"] = results;
    summary["ranking"] = json::array();
    for (const auto& [kind, acc] : outcome.ranking) summary["ranking"].push_back({{"hypothesis", to_string(kind)}, {"mean_accuracy", acc}});
    summary["skipped_filters"] = skipped;
    json rejected = json::object();
    for (const auto& u : units) rejected[u.name] = u.aligned.rejected_trials;
    summary["rejected_trials"] = rejected;
    text::write_file(out_dir / "summary.json", summary.dump(2) + "\n");

    if (cfg.save_models) {
        for (std::size_t h = 0; h < cfg.hypotheses.size(); ++h) {
            for (std::size_t u = 0; u < n_units; ++u) {
                const auto hd =
                    prepare_data(specs[h], data.stimulus, data.task, units[u].aligned.design, units[u].aligned.brain);
                const auto model = fit_full_model(hd, specs[h], data, cv[h][u], cfg.solver, units[u].aligned.brain);
                save_model(out_dir / "models" / units[u].name / to_string(cfg.hypotheses[h]), model);
            }
        }
    }
    return outcome;
}

// ---------------------------------------------------------------------------

namespace {

struct ResultSet {
    std::string name;
    std::string hash;
    std::size_t n_windows = 0;
    std::vector<std::string> hypotheses;
    // hypothesis -> unit -> per-window accuracy ("all" filter)
    std::map<std::string, std::map<std::string, std::vector<double>>> by_unit;
    // hypothesis -> fold -> window -> accuracy (single-subject runs)
    std::map<std::string, std::map<std::int64_t, std::map<std::size_t, double>>> by_fold;
};

std::map<std::string, std::size_t> header_index(const std::string& line, const fs::path& path,
                                                std::initializer_list<const char*> required) {
    std::map<std::string, std::size_t> idx;
    const auto fields = text::split_csv_line(line);
    for (std::size_t i = 0; i < fields.size(); ++i) idx[fields[i]] = i;
    for (const char* r : required) {
        if (!idx.count(r)) fail(ErrorKind::ParseError, path.string() + ": missing column '" + r + "'");
    }
    return idx;
}

ResultSet load_result_set(const fs::path& dir) {
    ResultSet rs;
    json summary;
    try {
        summary = json::parse(text::read_file(dir / "summary.json"));
        rs.hash = summary.at("fold_manifest_hash").get<std::string>();
        rs.hypotheses = summary.at("hypotheses").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, (dir / "summary.json").string() + ": " + e.what());
    }
    const auto tc_path = dir / "accuracy_timecourse.csv";
    const auto lines = text::read_lines(tc_path);
    if (lines.empty()) fail(ErrorKind::ParseError, tc_path.string() + " is empty");
    auto idx = header_index(lines[0], tc_path, {"hypothesis", "filter", "unit", "window", "accuracy"});
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = text::split_csv_line(lines[i]);
        if (f.size() < idx.size()) fail(ErrorKind::ParseError, tc_path.string() + ": short row " + std::to_string(i));
        if (f[idx["filter"]] != "all" || f[idx["unit"]] == "mean") continue;
        std::int64_t w = 0;
        double acc = 0.0;
        if (!text::parse_int64(f[idx["window"]], w) || !text::parse_double(f[idx["accuracy"]], acc)) {
            fail(ErrorKind::ParseError, tc_path.string() + ": bad number on row " + std::to_string(i));
        }
        auto& series = rs.by_unit[f[idx["hypothesis"]]][f[idx["unit"]]];
        if (series.size() <= static_cast<std::size_t>(w)) series.resize(static_cast<std::size_t>(w) + 1, 0.5);
        series[static_cast<std::size_t>(w)] = acc;
        rs.n_windows = std::max(rs.n_windows, static_cast<std::size_t>(w) + 1);
    }
    const auto fold_path = dir / "fold_accuracy.csv";
    if (fs::exists(fold_path)) {
        const auto flines = text::read_lines(fold_path);
        if (!flines.empty()) {
            auto fi = header_index(flines[0], fold_path, {"hypothesis", "filter", "fold", "window", "accuracy"});
            for (std::size_t i = 1; i < flines.size(); ++i) {
                const auto f = text::split_csv_line(flines[i]);
                if (f.size() < fi.size()) fail(ErrorKind::ParseError, fold_path.string() + ": short row");
                if (f[fi["filter"]] != "all") continue;
                std::int64_t fold = 0, w = 0;
                double acc = 0.0;
                if (!text::parse_int64(f[fi["fold"]], fold) || !text::parse_int64(f[fi["window"]], w) ||
                    !text::parse_double(f[fi["accuracy"]], acc)) {
                    fail(ErrorKind::ParseError, fold_path.string() + ": bad number on row " + std::to_string(i));
                }
                rs.by_fold[f[fi["hypothesis"]]][fold][static_cast<std::size_t>(w)] = acc;
            }
        }
    }
    return rs;
}

} // namespace

void cmd_compare(const std::vector<fs::path>& result_dirs, const fs::path& out, double fdr_q) {
    if (result_dirs.size() < 2) fail(ErrorKind::ConfigError, "compare needs at least two result directories");
    std::vector<ResultSet> sets;
    for (std::size_t i = 0; i < result_dirs.size(); ++i) {
        auto rs = load_result_set(result_dirs[i]);
        rs.name = std::to_string(i + 1) + ":" + unit_name(result_dirs[i]);
        sets.push_back(std::move(rs));
    }
    for (const auto& s : sets) {
        if (s.hash != sets.front().hash) {
            fail(ErrorKind::FoldMismatch, s.name + " was run on different folds than " + sets.front().name);
        }
        if (s.n_windows != sets.front().n_windows) fail(ErrorKind::FoldMismatch, s.name + " has a different window count");
    }
    const std::size_t T = sets.front().n_windows;

    std::vector<Family> families;
    for (std::size_t a = 0; a < sets.size(); ++a) {
        for (std::size_t b = a + 1; b < sets.size(); ++b) {
            const auto& A = sets[a];
            const auto& B = sets[b];
            std::vector<std::pair<std::string, std::string>> matched;
            for (const auto& h : A.hypotheses) {
                if (std::find(B.hypotheses.begin(), B.hypotheses.end(), h) != B.hypotheses.end()) matched.emplace_back(h, h);
            }
            if (matched.empty() && A.hypotheses.size() == 1 && B.hypotheses.size() == 1) {
                matched.emplace_back(A.hypotheses[0], B.hypotheses[0]);
            }
            if (matched.empty()) fail(ErrorKind::ConfigError, A.name + " and " + B.name + " share no hypothesis");
            Family fam;
            fam.name = A.name + " vs " + B.name;
            for (const auto& [ha, hb] : matched) {
                const auto& ua = A.by_unit.at(ha);
                const auto& ub = B.by_unit.at(hb);
                const bool by_subject = ua.size() >= 2;
                for (std::size_t w = 0; w < T; ++w) {
                    std::vector<double> va, vb;
                    if (by_subject) {
                        for (const auto& [unit, series] : ua) {
                            auto it = ub.find(unit);
                            if (it == ub.end()) fail(ErrorKind::FoldMismatch, "subject " + unit + " missing from " + B.name);
                            va.push_back(series.at(w));
                            vb.push_back(it->second.at(w));
                        }
                    } else if (A.by_fold.count(ha) && B.by_fold.count(hb)) {
                        for (const auto& [fold, windows] : A.by_fold.at(ha)) {
                            auto fb = B.by_fold.at(hb).find(fold);
                            if (fb == B.by_fold.at(hb).end()) continue;
                            auto wa = windows.find(w);
                            auto wb = fb->second.find(w);
                            if (wa == windows.end() || wb == fb->second.end()) continue;
                            va.push_back(wa->second);
                            vb.push_back(wb->second);
                        }
                    }
                    fam.cells.push_back(ha + "-" + hb + ":w" + std::to_string(w));
                    fam.tests.push_back(try_test([&] { return paired_ttest(va, vb); }));
                }
            }
            families.push_back(std::move(fam));
        }
    }
    std::string csv = kStatsCsvHeader;
    std::vector<std::string> labels;
    std::vector<std::vector<bool>> marks;
    for (const auto& fam : families) {
        csv += family_rows(fam, fdr_q);
        const auto rejected = family_rejections(fam, fdr_q);
        for (std::size_t start = 0; start < fam.cells.size(); start += T) {
            const auto& cell = fam.cells[start];
            labels.push_back(fam.name + " " + cell.substr(0, cell.rfind(':')));
            marks.emplace_back(rejected.begin() + static_cast<std::ptrdiff_t>(start),
                               rejected.begin() + static_cast<std::ptrdiff_t>(start + T));
        }
    }
    fs::create_directories(out);
    text::write_file(out / "comparison.csv", csv);
    text::write_file(out / "comparison.svg", star_matrix_svg("Significant paired differences per window", labels, marks));
}

// ---------------------------------------------------------------------------

void cmd_attention(const std::vector<fs::path>& model_dirs, const std::optional<fs::path>& aux_questions,
                   std::size_t k, const fs::path& out) {
    if (model_dirs.empty()) fail(ErrorKind::ConfigError, "attention needs at least one model");
    std::optional<FeatureMatrix> aux;
    if (aux_questions) aux = load_feature_matrix(*aux_questions, FeatureRole::Task);
    std::vector<std::vector<AttentionVector>> sets;
    std::vector<std::string> names;
    std::string top = "model,task_id,rank,feature_name,weight\n";
    for (std::size_t i = 0; i < model_dirs.size(); ++i) {
        const auto model = load_model(model_dirs[i]);
        if (model.kind != HypothesisKind::H41 && model.kind != HypothesisKind::H42) {
            fail(ErrorKind::KindError, model_dirs[i].string() + " holds a " + to_string(model.kind) +
                                           " model, which has no attention");
        }
        std::vector<std::string> features = model.feature_names;
        if (aux) {
            if (static_cast<std::size_t>(aux->rows()) != features.size()) {
                fail(ErrorKind::ShapeMismatch, "auxiliary question count does not match the model's stimulus features");
            }
            features = aux->row_ids();
        }
        const std::string name = std::to_string(i + 1) + ":" + to_string(model.kind);
        names.push_back(name);
        std::vector<AttentionVector> set;
        for (std::size_t q = 0; q < model.task_ids.size(); ++q) {
            AttentionVector a{model.attention.row(static_cast<Eigen::Index>(q)).transpose(), model.task_ids[q]};
            const auto ranked = top_attended_features(a, k, features);
            for (std::size_t r = 0; r < ranked.size(); ++r) {
                top += text::csv_field(name) + "," + text::csv_field(a.task_id) + "," + std::to_string(r + 1) + "," +
                       text::csv_field(ranked[r].first) + "," + fmt(ranked[r].second) + "\n";
            }
            set.push_back(std::move(a));
        }
        sets.push_back(std::move(set));
    }
    std::string sim = "model_a,model_b,similarity\n";
    for (std::size_t a = 0; a < sets.size(); ++a) {
        for (std::size_t b = a + 1; b < sets.size(); ++b) {
            sim += text::csv_field(names[a]) + "," + text::csv_field(names[b]) + "," +
                   fmt(attention_similarity(sets[a], sets[b])) + "\n";
        }
    }
    fs::create_directories(out);
    text::write_file(out / "top_features.csv", top);
    text::write_file(out / "attention_similarity.csv", sim);
}

// ---------------------------------------------------------------------------

std::string cmd_ingest_check(const RunConfig& cfg) {
    const auto data = load_data(cfg);
    std::ostringstream os;
    os << "design: " << data.design.size() << " trials, " << data.design.words().size() << " words, "
       << data.design.questions().size() << " questions\n";
    os << "stimulus features: " << data.stimulus.rows() << " x " << data.stimulus.cols() << "\n";
    os << "task features: " << data.task.rows() << " x " << data.task.cols() << "\n";
    for (const auto& w : data.design.words()) data.stimulus.row_of(w);
    for (const auto& q : data.design.questions()) data.task.row_of(q);
    if (data.aux) {
        os << "auxiliary questions: " << data.aux->rows() << " x " << data.aux->cols() << "\n";
        if (data.aux->rows() != data.stimulus.cols() || data.aux->cols() != data.task.cols()) {
            fail(ErrorKind::ShapeMismatch, "auxiliary questions must be F_s rows of length F_t");
        }
    }
    for (const auto& u : data.units) {
        const auto& b = u.aligned.brain;
        os << "recordings " << u.name << ": " << b.n_trials() << " trials, " << b.n_sensors() << " sensors, "
           << b.n_windows() << " windows of " << b.window_ms() << " ms, " << u.aligned.rejected_trials.size()
           << " design trials without data\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------

int main_entry(int argc, char** argv) {
    CLI::App app{"Fit and compare task/stimulus encoding hypotheses on trial-level brain recordings"};
    app.require_subcommand(1);

    fs::path config, out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::string hypotheses, learning;

    auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
    synth->add_option("--config", config, "synth config JSON")->required();
    synth->add_option("--out", out, "output directory")->required();
    synth->add_option("--seed", seed, "override the config seed");

    auto* run = app.add_subcommand("run", "cross-validate hypotheses and write reports");
    run->add_option("--config", config, "run config JSON")->required();
    run->add_option("--out", out, "output directory");
    run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "override the fold seed");
    run->add_option("--hypotheses", hypotheses, "comma-separated list, e.g. H1,H3");
    run->add_option("--learning-curve", learning, "comma-separated training sizes");

    std::vector<fs::path> dirs;
    double fdr_q = 0.05;
    auto* compare = app.add_subcommand("compare", "paired tests between result directories");
    compare->add_option("results", dirs, "result directories")->required()->expected(2, -1);
    compare->add_option("--out", out, "output directory")->required();
    compare->add_option("--fdr-q", fdr_q, "false discovery rate");

    std::vector<fs::path> models;
    std::optional<fs::path> aux;
    std::size_t k = 5;
    auto* attention = app.add_subcommand("attention", "report attended features of attention models");
    attention->add_option("models", models, "model directories")->required()->expected(1, -1);
    attention->add_option("--aux", aux, "auxiliary question CSV naming the stimulus features");
    attention->add_option("--k", k, "features per task")->check(CLI::PositiveNumber);
    attention->add_option("--out", out, "output directory")->required();

    fs::path dataset;
    auto* ingest = app.add_subcommand("ingest-check", "validate a data directory or run config");
    ingest->add_option("--config", config, "run config JSON");
    ingest->add_option("dataset", dataset, "dataset directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            cmd_synth(config, out, seed);
            std::cout << "wrote " << out.string() << "\n";
        } else if (*run) {
            RunOverrides o;
            if (!out.empty()) o.out = out;
            o.threads = threads;
            o.seed = seed;
            if (!hypotheses.empty()) o.hypotheses = parse_hypothesis_list(hypotheses);
            if (!learning.empty()) o.learning_curve = parse_size_list(learning);
            const auto outcome = cmd_run(config, o);
            for (const auto& [kind, acc] : outcome.ranking) std::cout << to_string(kind) << " " << fmt(acc) << "\n";
        } else if (*compare) {
            cmd_compare(dirs, out, fdr_q);
        } else if (*attention) {
            cmd_attention(models, aux, k, out);
        } else if (*ingest) {
            RunConfig cfg;
            if (!config.empty()) {
                cfg = load_run_config(config);
            } else if (!dataset.empty()) {
                cfg.data = dataset_paths(dataset);
            } else {
                fail(ErrorKind::ConfigError, "ingest-check needs --config or a dataset directory");
            }
            std::cout << cmd_ingest_check(cfg);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(classify(e.kind()));
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorClass::Io);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorClass::Numeric);
    }
    return 0;
}

} // namespace taskenc::cli
