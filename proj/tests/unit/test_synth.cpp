#include "taskenc/synth.hpp"
#include "taskenc/solvers.hpp"
#include "taskenc/text_io.hpp"
#include "test_support.hpp"

#include <memory>

using namespace taskenc;
using testing_support::error_kind_of;

namespace {

GenerativeConfig small(HypothesisKind kind) {
    GenerativeConfig g;
    g.kind = kind;
    g.n_words = 6;
    g.n_questions = 4;
    g.f_s = 5;
    g.f_t = 3;
    g.n_sensors = 2;
    g.n_windows = 3;
    g.seed = 21;
    return g;
}

std::vector<std::size_t> all_rows(const ExperimentDesign& d) {
    std::vector<std::size_t> rows(d.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
}

RecoverySettings recovery_settings() {
    RecoverySettings s;
    s.n_folds = 30;
    s.cv.grid = HyperGrid::standard();
    s.cv.threads = 4;
    return s;
}

double accuracy_of(const RecoveryResult& r, HypothesisKind k) {
    for (const auto& [kind, acc] : r.accuracy)
        if (kind == k) return acc;
    FAIL("hypothesis missing from recovery result");
    return 0.0;
}

} // namespace

TEST_CASE("noise-free structure") {
    SUBCASE("H1 ignores the question") {
        const auto ds = generate_dataset(small(HypothesisKind::H1));
        const auto& y = ds.subjects[0].values();
        for (std::size_t a = 0; a < ds.design.size(); ++a)
            for (std::size_t b = 0; b < ds.design.size(); ++b)
                if (ds.design.trial_word(a) == ds.design.trial_word(b))
                    CHECK(y.row(static_cast<Eigen::Index>(a)) == y.row(static_cast<Eigen::Index>(b)));
    }
    SUBCASE("H2 ignores the word") {
        const auto ds = generate_dataset(small(HypothesisKind::H2));
        const auto& y = ds.subjects[0].values();
        for (std::size_t a = 0; a < ds.design.size(); ++a)
            for (std::size_t b = 0; b < ds.design.size(); ++b)
                if (ds.design.trial_question(a) == ds.design.trial_question(b))
                    CHECK(y.row(static_cast<Eigen::Index>(a)) == y.row(static_cast<Eigen::Index>(b)));
    }
}

TEST_CASE("H3 with W_t = 0 reproduces H1 exactly") {
    auto g1 = small(HypothesisKind::H1);
    g1.noise_sigma = 0.7;
    auto g3 = g1;
    g3.kind = HypothesisKind::H3;
    auto truth = draw_truth(g3);
    truth.W_t.setZero();
    const auto h3 = generate_dataset(g3, truth);
    const auto h1 = generate_dataset(g1, truth);
    CHECK(h3.subjects[0].values() == h1.subjects[0].values());
    CHECK(h3.stimulus.values() == h1.stimulus.values());
}

TEST_CASE("generation is deterministic") {
    auto g = small(HypothesisKind::H42);
    g.noise_sigma = 0.3;
    g.n_subjects = 2;
    const auto a = generate_dataset(g);
    const auto b = generate_dataset(g);
    CHECK(a.subjects[1].values() == b.subjects[1].values());
    CHECK(a.truth.A == b.truth.A);
    CHECK(a.subjects[0].values() != a.subjects[1].values());

    const auto d1 = testing_support::temp_dir("synth_a");
    const auto d2 = testing_support::temp_dir("synth_b");
    save_dataset(d1, a);
    save_dataset(d2, b);
    for (const char* f : {"design.csv", "stimulus.csv", "task.csv", "aux_questions.csv", "truth.json",
                          "sub-02/data.f64le", "sub-02/meta.json"}) {
        CHECK(text::read_file(d1 / f) == text::read_file(d2 / f));
    }
    g.seed += 1;
    CHECK(generate_dataset(g).subjects[0].values() != a.subjects[0].values());
}

TEST_CASE("features look like ratings") {
    auto g = small(HypothesisKind::H1);
    g.ordinal = true;
    const auto ds = generate_dataset(g);
    CHECK(ds.stimulus.values().minCoeff() >= 1.0);
    CHECK(ds.stimulus.values().maxCoeff() <= 5.0);
    CHECK((ds.stimulus.values().array() == ds.stimulus.values().array().round()).all());
    const auto plain = generate_dataset(small(HypothesisKind::H1));
    CHECK(plain.stimulus.values().mean() == doctest::Approx(3.0).epsilon(0.2));
}

TEST_CASE("forward pass equals the library's predict operations") {
    for (auto kind : all_hypotheses()) {
        CAPTURE(to_string(kind));
        const auto ds = generate_dataset(small(kind));
        const auto rows = all_rows(ds.design);
        const auto aux = std::make_shared<const FeatureMatrix>(ds.aux_questions);
        const auto spec = HypothesisSpec::make(kind, kind == HypothesisKind::H41 ? aux : nullptr);
        const Matrix x = assemble_inputs(spec, ds.stimulus, ds.task, ds.design, rows).values;
        Matrix predicted;
        switch (kind) {
        case HypothesisKind::H1:
        case HypothesisKind::H41: predicted = ridge_predict({ds.truth.W_s, 0.0}, x); break;
        case HypothesisKind::H2: predicted = ridge_predict({ds.truth.W_t, 0.0}, x); break;
        case HypothesisKind::H3: {
            Matrix W(ds.truth.W_s.rows() + ds.truth.W_t.rows(), ds.truth.W_s.cols());
            W << ds.truth.W_s, ds.truth.W_t;
            predicted = ridge_predict({W, 0.0}, x);
            break;
        }
        case HypothesisKind::H42: {
            AttentionModel m;
            m.A = ds.truth.A;
            m.W = ds.truth.W_s;
            predicted = attention_predict_rows(m, x, assemble_task_rows(ds.task, ds.design, rows));
            break;
        }
        }
        CHECK((predicted - ds.subjects[0].values()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("configuration checks") {
    auto g = small(HypothesisKind::H1);
    g.n_words = 0;
    CHECK(error_kind_of([&] { generate_dataset(g); }) == ErrorKind::ConfigError);
    g = small(HypothesisKind::H1);
    g.noise_sigma = -1.0;
    CHECK(error_kind_of([&] { generate_dataset(g); }) == ErrorKind::ConfigError);
}

TEST_CASE("model recovery examples") {
    const std::vector<HypothesisKind> ridge_kinds{HypothesisKind::H1, HypothesisKind::H2, HypothesisKind::H3,
                                                  HypothesisKind::H41};
    SUBCASE("noise-free stimulus-only data with identifiable weights") {
        GenerativeConfig g;
        g.f_s = 5;
        g.seed = 2;
        auto s = recovery_settings();
        s.cv.grid.lambda_values = {1e-8};
        const auto r = model_recovery(generate_dataset(g), {HypothesisKind::H1, HypothesisKind::H2}, s);
        CHECK(accuracy_of(r, HypothesisKind::H1) == 1.0);
        CHECK(std::abs(accuracy_of(r, HypothesisKind::H2) - 0.5) <= 0.05);
    }
    SUBCASE("additive data, moderate noise, 5 seeds") {
        double h1 = 0, h2 = 0, h3 = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            GenerativeConfig g;
            g.kind = HypothesisKind::H3;
            g.noise_sigma = 0.5;
            g.noise_relative = true;
            g.seed = seed;
            auto s = recovery_settings();
            s.fold_seed = seed;
            const auto r = model_recovery(generate_dataset(g), ridge_kinds, s);
            h1 += accuracy_of(r, HypothesisKind::H1) / 5;
            h2 += accuracy_of(r, HypothesisKind::H2) / 5;
            h3 += accuracy_of(r, HypothesisKind::H3) / 5;
        }
        CHECK(h3 >= h1 + 0.03);
        CHECK(h3 >= h2 + 0.03);
    }
    SUBCASE("precomputed-attention data, moderate noise, 5 seeds") {
        double h1 = 0, h41 = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            GenerativeConfig g;
            g.kind = HypothesisKind::H41;
            g.noise_sigma = 0.5;
            g.noise_relative = true;
            g.seed = seed;
            auto s = recovery_settings();
            s.fold_seed = seed;
            const auto r = model_recovery(generate_dataset(g), {HypothesisKind::H1, HypothesisKind::H41}, s);
            h1 += accuracy_of(r, HypothesisKind::H1) / 5;
            h41 += accuracy_of(r, HypothesisKind::H41) / 5;
        }
        CHECK(h41 >= h1 + 0.02);
    }
    SUBCASE("accuracy of the true model falls as noise grows") {
        std::vector<double> acc;
        for (double sigma : {0.25, 1.0, 4.0}) {
            double total = 0.0;
            for (std::uint64_t seed = 1; seed <= 3; ++seed) {
                GenerativeConfig g;
                g.kind = HypothesisKind::H3;
                g.f_s = 8;
                g.f_t = 4;
                g.noise_sigma = sigma;
                g.noise_relative = true;
                g.seed = seed;
                auto s = recovery_settings();
                s.cv.grid.lambda_values = {0.1, 10.0, 1000.0};
                total += model_recovery(generate_dataset(g), {HypothesisKind::H3}, s).accuracy[0].second;
            }
            acc.push_back(total / 3);
        }
        CHECK(acc[0] >= acc[1] + 0.02);
        CHECK(acc[1] >= acc[2] + 0.02);
    }
}
