#include "taskenc/hypotheses.hpp"

#include "taskenc/error.hpp"
#include "taskenc/text_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace taskenc {

std::string to_string(HypothesisKind kind) {
    switch (kind) {
    case HypothesisKind::H1: return "H1";
    case HypothesisKind::H2: return "H2";
    case HypothesisKind::H3: return "H3";
    case HypothesisKind::H41: return "H41";
    case HypothesisKind::H42: return "H42";
    }
    return "?";
}

HypothesisKind parse_hypothesis(std::string_view name) {
    std::string key;
    for (char c : name) {
        if (c != '.') key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    for (auto kind : all_hypotheses()) {
        if (to_string(kind) == key) return kind;
    }
    fail(ErrorKind::KindError, "unknown hypothesis '" + std::string(name) + "'");
}

const std::vector<HypothesisKind>& all_hypotheses() {
    static const std::vector<HypothesisKind> kinds{HypothesisKind::H1, HypothesisKind::H2, HypothesisKind::H3,
                                                   HypothesisKind::H41, HypothesisKind::H42};
    return kinds;
}

HypothesisSpec HypothesisSpec::make(HypothesisKind kind, std::shared_ptr<const FeatureMatrix> aux_questions) {
    if (kind == HypothesisKind::H41 && !aux_questions) {
        fail(ErrorKind::ConfigError, "H41 needs the auxiliary question feature matrix");
    }
    if (kind != HypothesisKind::H41 && aux_questions) {
        fail(ErrorKind::ConfigError, to_string(kind) + " does not take auxiliary questions");
    }
    return HypothesisSpec(kind, std::move(aux_questions));
}

AttentionVector precomputed_attention(const Eigen::Ref<const Vector>& task, const FeatureMatrix& aux_questions,
                                      std::string task_id) {
    if (aux_questions.cols() != task.size()) {
        fail(ErrorKind::ShapeMismatch, "auxiliary question vectors have length " + std::to_string(aux_questions.cols()) +
                                           ", task vector has " + std::to_string(task.size()));
    }
    const double task_norm = task.norm();
    if (task_norm == 0.0) fail(ErrorKind::ZeroVector, "task '" + task_id + "' has zero norm");

    const Matrix& aux = aux_questions.values();
    Vector cosine(aux.rows());
    for (Eigen::Index j = 0; j < aux.rows(); ++j) {
        const double n = aux.row(j).norm();
        if (n == 0.0) {
            fail(ErrorKind::ZeroVector, "auxiliary question '" + aux_questions.row_ids()[static_cast<std::size_t>(j)] +
                                            "' has zero norm");
        }
        cosine(j) = aux.row(j).dot(task) / (n * task_norm);
    }
    // Shifting by the max leaves the softmax unchanged.
    const Vector e = (cosine.array() - cosine.maxCoeff()).exp();
    return AttentionVector{e / e.sum(), std::move(task_id)};
}

std::vector<AttentionVector> precomputed_attention_table(const FeatureMatrix& tasks,
                                                         const FeatureMatrix& aux_questions) {
    std::vector<AttentionVector> table;
    table.reserve(static_cast<std::size_t>(tasks.rows()));
    for (Eigen::Index q = 0; q < tasks.rows(); ++q) {
        table.push_back(precomputed_attention(tasks.values().row(q).transpose(), aux_questions,
                                              tasks.row_ids()[static_cast<std::size_t>(q)]));
    }
    return table;
}

Vector augment_stimulus(const Eigen::Ref<const Vector>& attention, const Eigen::Ref<const Vector>& stimulus) {
    if (attention.size() != stimulus.size()) {
        fail(ErrorKind::ShapeMismatch, "attention length " + std::to_string(attention.size()) +
                                           " != stimulus length " + std::to_string(stimulus.size()));
    }
    return attention.cwiseProduct(stimulus);
}

Matrix assemble_task_rows(const FeatureMatrix& task, const ExperimentDesign& design,
                          std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), task.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& q = design.trials().at(rows[i]).question;
        out.row(static_cast<Eigen::Index>(i)) = task.values().row(static_cast<Eigen::Index>(task.row_of(q)));
    }
    return out;
}

DesignMatrix assemble_inputs(const HypothesisSpec& spec, const FeatureMatrix& stimulus, const FeatureMatrix& task,
                             const ExperimentDesign& design, std::span<const std::size_t> rows) {
    const Eigen::Index fs = stimulus.cols();
    const Eigen::Index ft = task.cols();
    DesignMatrix out;
    out.kind = spec.kind();
    out.rows.assign(rows.begin(), rows.end());

    std::vector<AttentionVector> attention;
    if (spec.kind() == HypothesisKind::H41) {
        if (spec.aux_questions()->rows() != fs) {
            fail(ErrorKind::ShapeMismatch, "need one auxiliary question per stimulus feature (" + std::to_string(fs) +
                                               "), got " + std::to_string(spec.aux_questions()->rows()));
        }
        attention = precomputed_attention_table(task, *spec.aux_questions());
    }

    const Eigen::Index width = spec.kind() == HypothesisKind::H2 ? ft
                               : spec.kind() == HypothesisKind::H3 ? fs + ft
                                                                   : fs;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Trial& trial = design.trials().at(rows[i]);
        const auto r = static_cast<Eigen::Index>(i);
        switch (spec.kind()) {
        case HypothesisKind::H1:
        case HypothesisKind::H42:
            out.values.row(r) = stimulus.values().row(static_cast<Eigen::Index>(stimulus.row_of(trial.word)));
            break;
        case HypothesisKind::H2:
            out.values.row(r) = task.values().row(static_cast<Eigen::Index>(task.row_of(trial.question)));
            break;
        case HypothesisKind::H3:
            out.values.row(r).head(fs) = stimulus.values().row(static_cast<Eigen::Index>(stimulus.row_of(trial.word)));
            out.values.row(r).tail(ft) = task.values().row(static_cast<Eigen::Index>(task.row_of(trial.question)));
            break;
        case HypothesisKind::H41: {
            const auto& a = attention[task.row_of(trial.question)].weights;
            const Vector s = stimulus.values().row(static_cast<Eigen::Index>(stimulus.row_of(trial.word))).transpose();
            out.values.row(r) = augment_stimulus(a, s).transpose();
            break;
        }
        }
    }
    return out;
}

std::vector<std::pair<std::string, double>> top_attended_features(const AttentionVector& attention, std::size_t k,
                                                                  const std::vector<std::string>& names) {
    const auto n = static_cast<std::size_t>(attention.weights.size());
    if (names.size() != n) fail(ErrorKind::ShapeMismatch, "feature names do not match attention length");
    if (k > n) fail(ErrorKind::RangeError, "k=" + std::to_string(k) + " exceeds " + std::to_string(n) + " features");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return attention.weights(static_cast<Eigen::Index>(a)) > attention.weights(static_cast<Eigen::Index>(b));
    });
    std::vector<std::pair<std::string, double>> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.emplace_back(names[order[i]], attention.weights(static_cast<Eigen::Index>(order[i])));
    }
    return out;
}

void save_attention_csv(const std::filesystem::path& path, const std::vector<AttentionVector>& attention,
                        const std::vector<std::string>& feature_names) {
    std::string out = "task_id,feature_name,weight\n";
    for (const auto& a : attention) {
        if (static_cast<std::size_t>(a.weights.size()) != feature_names.size()) {
            fail(ErrorKind::ShapeMismatch, "attention vector for '" + a.task_id + "' has wrong length");
        }
        for (std::size_t j = 0; j < feature_names.size(); ++j) {
            out += text::csv_field(a.task_id) + "," + text::csv_field(feature_names[j]) + "," +
                   text::format_double(a.weights(static_cast<Eigen::Index>(j))) + "\n";
        }
    }
    text::write_file(path, out);
}

} // namespace taskenc
