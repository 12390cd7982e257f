#include "taskenc/cli/run_config.hpp"

#include "taskenc/error.hpp"
#include "taskenc/text_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

namespace taskenc::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(ErrorKind::ConfigError, where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            fail(ErrorKind::ConfigError, "unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::ConfigError, std::string("key '") + key + "' has the wrong type");
    }
}

template <class T>
void read_optional(const json& obj, const char* key, std::optional<T>& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return;
    T value{};
    read(obj, key, value);
    out = value;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

json parse_json_file(const fs::path& path) {
    try {
        return json::parse(text::read_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
}

} // namespace

DataPaths dataset_paths(const fs::path& dir) {
    DataPaths d;
    d.design = dir / "design.csv";
    d.stimulus = dir / "stimulus.csv";
    d.task = dir / "task.csv";
    if (fs::exists(dir / "aux_questions.csv")) d.aux_questions = dir / "aux_questions.csv";
    if (fs::exists(dir / "meta.json")) {
        d.brain.push_back(dir);
    } else {
        std::vector<fs::path> subjects;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(dir, ec)) {
            if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) subjects.push_back(entry.path());
        }
        std::sort(subjects.begin(), subjects.end());
        d.brain = std::move(subjects);
    }
    if (d.brain.empty()) fail(ErrorKind::IoError, "no recordings found under " + dir.string());
    return d;
}

void RunConfig::validate() const {
    if (hypotheses.empty()) fail(ErrorKind::ConfigError, "no hypotheses selected");
    if (data.brain.empty()) fail(ErrorKind::ConfigError, "no brain recordings configured");
    const bool wants_h41 = std::find(hypotheses.begin(), hypotheses.end(), HypothesisKind::H41) != hypotheses.end();
    if (wants_h41 && !data.aux_questions) fail(ErrorKind::ConfigError, "H41 needs aux_questions");
    grid.validate();
    solver.validate();
    if (evaluation.filters.empty()) fail(ErrorKind::ConfigError, "evaluation.filters is empty");
    if (evaluation.grid_window_group < 1) fail(ErrorKind::ConfigError, "grid_window_group must be >= 1");
    if (!(evaluation.fdr_q > 0.0 && evaluation.fdr_q < 1.0)) fail(ErrorKind::ConfigError, "fdr_q must lie in (0, 1)");
    if (!(evaluation.tie_credit >= 0.0 && evaluation.tie_credit <= 1.0)) {
        fail(ErrorKind::ConfigError, "tie_credit must lie in [0, 1]");
    }
    if (downsample < 1) fail(ErrorKind::ConfigError, "downsample must be >= 1");
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
    only_keys(j, "run config",
              {"dataset", "design", "stimulus_features", "task_features", "aux_questions", "brain", "hypotheses", "folds",
               "grid", "solver", "evaluation", "downsample", "output", "save_models", "learning_curve",
               "learning_curve_seed"});
    RunConfig cfg;
    if (j.contains("dataset")) {
        std::string dir;
        read(j, "dataset", dir);
        cfg.data = dataset_paths(resolve(base_dir, dir));
    }
    auto path_key = [&](const char* key, fs::path& out) {
        if (!j.contains(key)) return;
        std::string p;
        read(j, key, p);
        out = resolve(base_dir, p);
    };
    path_key("design", cfg.data.design);
    path_key("stimulus_features", cfg.data.stimulus);
    path_key("task_features", cfg.data.task);
    if (j.contains("aux_questions")) {
        fs::path aux;
        path_key("aux_questions", aux);
        cfg.data.aux_questions = aux;
    }
    if (j.contains("brain")) {
        std::vector<std::string> dirs;
        read(j, "brain", dirs);
        cfg.data.brain.clear();
        for (const auto& d : dirs) cfg.data.brain.push_back(resolve(base_dir, d));
    }
    if (cfg.data.design.empty() || cfg.data.stimulus.empty() || cfg.data.task.empty()) {
        fail(ErrorKind::ConfigError, "config needs 'dataset' or design/stimulus_features/task_features/brain");
    }
    if (j.contains("hypotheses")) {
        std::vector<std::string> names;
        read(j, "hypotheses", names);
        cfg.hypotheses.clear();
        for (const auto& n : names) cfg.hypotheses.push_back(parse_hypothesis(n));
    }
    if (j.contains("folds")) {
        const auto& f = j.at("folds");
        only_keys(f, "folds",
                  {"k_words", "k_questions", "n_folds", "seed", "inner_k_words", "inner_k_questions", "inner_n_folds",
                   "inner_seed"});
        read(f, "k_words", cfg.folds.k_words);
        read(f, "k_questions", cfg.folds.k_questions);
        read_optional(f, "n_folds", cfg.folds.n_folds);
        read(f, "seed", cfg.folds.seed);
        read(f, "inner_k_words", cfg.folds.inner_k_words);
        read(f, "inner_k_questions", cfg.folds.inner_k_questions);
        read_optional(f, "inner_n_folds", cfg.folds.inner_n_folds);
        read(f, "inner_seed", cfg.folds.inner_seed);
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        only_keys(g, "grid", {"lambda", "lambda_attention"});
        read(g, "lambda", cfg.grid.lambda_values);
        read(g, "lambda_attention", cfg.grid.lambda_A_values);
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        only_keys(s, "solver",
                  {"learning_rate", "max_epochs", "convergence_tol", "convergence_window", "seed", "init_scale", "beta1",
                   "beta2", "epsilon", "checkpoint_every"});
        read(s, "learning_rate", cfg.solver.learning_rate);
        read(s, "max_epochs", cfg.solver.max_epochs);
        read(s, "convergence_tol", cfg.solver.convergence_tol);
        read(s, "convergence_window", cfg.solver.convergence_window);
        read(s, "seed", cfg.solver.seed);
        read(s, "init_scale", cfg.solver.init_scale);
        read(s, "beta1", cfg.solver.beta1);
        read(s, "beta2", cfg.solver.beta2);
        read(s, "epsilon", cfg.solver.epsilon);
        read(s, "checkpoint_every", cfg.solver.checkpoint_every);
    }
    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        only_keys(e, "evaluation", {"filters", "grid_window_group", "validation_metric", "fdr_q", "tie_credit"});
        if (e.contains("filters")) {
            std::vector<std::string> names;
            read(e, "filters", names);
            cfg.evaluation.filters.clear();
            for (const auto& n : names) {
                try {
                    cfg.evaluation.filters.push_back(parse_pair_filter(n));
                } catch (const Error& err) {
                    fail(ErrorKind::ConfigError, err.detail());
                }
            }
        }
        read(e, "grid_window_group", cfg.evaluation.grid_window_group);
        if (e.contains("validation_metric")) {
            std::string m;
            read(e, "validation_metric", m);
            cfg.evaluation.validation_metric = parse_validation_metric(m);
        }
        read(e, "fdr_q", cfg.evaluation.fdr_q);
        read(e, "tie_credit", cfg.evaluation.tie_credit);
    }
    read(j, "downsample", cfg.downsample);
    if (j.contains("output")) {
        std::string out;
        read(j, "output", out);
        cfg.output = resolve(base_dir, out);
    }
    read(j, "save_models", cfg.save_models);
    read(j, "learning_curve", cfg.learning_curve);
    read(j, "learning_curve_seed", cfg.learning_curve_seed);
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    return parse_run_config(parse_json_file(path), path.parent_path());
}

GenerativeConfig parse_synth_config(const json& j) {
    only_keys(j, "synth config",
              {"kind", "n_words", "n_questions", "f_s", "f_t", "n_sensors", "n_windows", "noise_sigma", "noise_relative",
               "seed", "signal_scale", "ordinal", "n_subjects", "window_ms", "feature_offset", "aux_offset"});
    GenerativeConfig c;
    if (j.contains("kind")) {
        std::string kind;
        read(j, "kind", kind);
        c.kind = parse_hypothesis(kind);
    }
    read(j, "n_words", c.n_words);
    read(j, "n_questions", c.n_questions);
    read(j, "f_s", c.f_s);
    read(j, "f_t", c.f_t);
    read(j, "n_sensors", c.n_sensors);
    read(j, "n_windows", c.n_windows);
    read(j, "noise_sigma", c.noise_sigma);
    read(j, "noise_relative", c.noise_relative);
    read(j, "seed", c.seed);
    read(j, "signal_scale", c.signal_scale);
    read(j, "ordinal", c.ordinal);
    read(j, "n_subjects", c.n_subjects);
    read(j, "window_ms", c.window_ms);
    read(j, "feature_offset", c.feature_offset);
    read(j, "aux_offset", c.aux_offset);
    c.validate();
    return c;
}

GenerativeConfig load_synth_config(const fs::path& path) { return parse_synth_config(parse_json_file(path)); }

std::vector<std::size_t> parse_size_list(const std::string& list) {
    std::vector<std::size_t> out;
    std::string item;
    auto flush = [&] {
        const auto t = text::trim(item);
        item.clear();
        if (t.empty()) return;
        std::int64_t v = 0;
        if (!text::parse_int64(t, v) || v < 0) fail(ErrorKind::ConfigError, "'" + t + "' is not a non-negative integer");
        out.push_back(static_cast<std::size_t>(v));
    };
    for (char c : list) {
        if (c == ',') {
            flush();
        } else {
            item.push_back(c);
        }
    }
    flush();
    return out;
}

std::vector<HypothesisKind> parse_hypothesis_list(const std::string& list) {
    std::vector<HypothesisKind> out;
    std::string item;
    auto flush = [&] {
        const auto t = text::trim(item);
        item.clear();
        if (!t.empty()) out.push_back(parse_hypothesis(t));
    };
    for (char c : list) {
        if (c == ',') {
            flush();
        } else {
            item.push_back(c);
        }
    }
    flush();
    if (out.empty()) fail(ErrorKind::ConfigError, "empty hypothesis list");
    return out;
}

} // namespace taskenc::cli
