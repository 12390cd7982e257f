#include "taskenc/evaluation.hpp"
#include "taskenc/metrics.hpp"
#include "taskenc/synth.hpp"
#include "../oracles.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace taskenc;
using testing_support::error_kind_of;
using testing_support::labels;
using testing_support::random_matrix;

namespace {

std::vector<Eigen::Index> full_mask(Eigen::Index n) {
    std::vector<Eigen::Index> m(static_cast<std::size_t>(n));
    std::iota(m.begin(), m.end(), 0);
    return m;
}

/// A CVResult with one fold holding the 2 x 2 grid of test trials.
CVResult two_by_two_result(const Matrix& predicted, const Matrix& truth) {
    CVResult r;
    r.design = ExperimentDesign::full_grid({"w1", "w2"}, {"q1", "q2"});
    r.n_sensors = 1;
    r.n_windows = static_cast<std::size_t>(truth.cols());
    FoldResult f;
    f.test_rows = {0, 1, 2, 3};
    f.predicted = predicted;
    f.truth = truth;
    r.folds.push_back(f);
    return r;
}

} // namespace

TEST_CASE("cosine_distance") {
    Vector a(3), b(3);
    a << 1, 2, 3;
    b << -2, 1, 0;
    CHECK(cosine_distance(a, a) == doctest::Approx(0.0));
    CHECK(cosine_distance(a, b) == doctest::Approx(1.0));
    CHECK(cosine_distance(a, -a) == doctest::Approx(2.0));
    CHECK(error_kind_of([&] { cosine_distance(a, Vector::Zero(3)); }) == ErrorKind::ZeroVector);
}

TEST_CASE("two_vs_two") {
    const auto mask = full_mask(4);
    const Vector b1 = random_matrix(4, 1, 1).col(0);
    const Vector b2 = random_matrix(4, 1, 2).col(0);
    CHECK(two_vs_two(b1, b2, b1, b2, mask, Distance::Cosine) == 1.0);
    CHECK(two_vs_two(b2, b1, b1, b2, mask, Distance::Cosine) == 0.0);
    CHECK(two_vs_two(b1, b1, b1, b2, mask, Distance::Cosine) == 0.5);
    CHECK(two_vs_two(b1, b1, b1, b2, mask, Distance::Cosine, 0.0) == 0.0);

    SUBCASE("decided by summed distances") {
        // p2 sits nearer t1 than t2, yet 0.1 + 0.8 < 0.9 + 0.2 keeps the pair correct.
        Vector p1(1), p2(1), t1(1), t2(1);
        t1 << 0.0;
        t2 << 1.0;
        p1 << 0.1;
        p2 << 0.2;
        const std::vector<Eigen::Index> one{0};
        CHECK(two_vs_two(p1, p2, t1, t2, one, Distance::Absolute) == 1.0);
        p1 << 0.6;  // 0.6 + 0.8 > 0.4 + 0.2
        CHECK(two_vs_two(p1, p2, t1, t2, one, Distance::Absolute) == 0.0);
    }
    SUBCASE("empty and too-short masks") {
        const std::vector<Eigen::Index> none;
        CHECK(error_kind_of([&] { two_vs_two(b1, b2, b1, b2, none, Distance::Cosine); }) == ErrorKind::RangeError);
        const std::vector<Eigen::Index> one{0};
        CHECK(error_kind_of([&] { two_vs_two(b1, b2, b1, b2, one, Distance::Cosine); }) ==
              ErrorKind::DistanceUndefined);
    }
    SUBCASE("matches the brute-force oracle on random vectors") {
        for (std::uint64_t s = 0; s < 200; ++s) {
            const Matrix m = random_matrix(5, 4, 100 + s);
            const double got = two_vs_two(m.col(0), m.col(1), m.col(2), m.col(3), full_mask(5), Distance::Cosine);
            CHECK(got == oracle::two_vs_two(m.col(0), m.col(1), m.col(2), m.col(3)));
        }
    }
}

TEST_CASE("pair filters") {
    CHECK(pair_admissible(PairFilter::SameWord, 0, 0, 0, 1));
    CHECK(!pair_admissible(PairFilter::SameWord, 0, 0, 1, 1));
    CHECK(pair_admissible(PairFilter::SameQuestion, 0, 0, 1, 0));
    CHECK(pair_admissible(PairFilter::FullyDisjoint, 0, 0, 1, 1));
    CHECK(!pair_admissible(PairFilter::FullyDisjoint, 0, 0, 1, 0));
    CHECK(pair_admissible(PairFilter::All, 0, 0, 1, 0));
    for (auto f : {PairFilter::All, PairFilter::SameWord, PairFilter::SameQuestion, PairFilter::FullyDisjoint}) {
        CHECK(parse_pair_filter(to_string(f)) == f);
    }
    CHECK(error_kind_of([] { parse_pair_filter("diagonal"); }) == ErrorKind::KindError);
}

TEST_CASE("enumerate_test_pairs on a 2 x 2 fold") {
    const Matrix y = random_matrix(4, 2, 3);
    const auto r = two_by_two_result(y, y);
    // full_grid is question-major: ids 0=(w1,q1) 1=(w2,q1) 2=(w1,q2) 3=(w2,q2)
    using P = std::pair<std::int64_t, std::int64_t>;
    CHECK(enumerate_test_pairs(r, PairFilter::SameWord) == std::vector<P>{{0, 2}, {1, 3}});
    CHECK(enumerate_test_pairs(r, PairFilter::FullyDisjoint) == std::vector<P>{{0, 3}, {1, 2}});
    CHECK(enumerate_test_pairs(r, PairFilter::All).size() == 6);
}

TEST_CASE("accuracy_timecourse") {
    SUBCASE("perfect predictions") {
        const Matrix y = random_matrix(4, 3, 4);
        const auto tc = accuracy_timecourse(two_by_two_result(y, y), PairFilter::All);
        for (double a : tc.accuracy) CHECK(a == 1.0);
        CHECK(tc.n_pairs == std::vector<std::size_t>{6, 6, 6});
    }
    SUBCASE("no admissible pairs") {
        CVResult r = two_by_two_result(random_matrix(4, 1, 5), random_matrix(4, 1, 6));
        r.folds[0].test_rows = {0};
        r.folds[0].predicted = r.folds[0].predicted.topRows(1).eval();
        r.folds[0].truth = r.folds[0].truth.topRows(1).eval();
        CHECK(error_kind_of([&] { accuracy_timecourse(r, PairFilter::All); }) == ErrorKind::NoPairs);
    }
    SUBCASE("pure noise is at chance") {
        GenerativeConfig g;
        g.n_words = 40;
        g.n_questions = 20;
        g.f_s = 5;
        g.f_t = 3;
        g.n_sensors = 6;
        g.n_windows = 4;
        g.seed = 8;
        const auto ds = generate_dataset(g);
        std::mt19937_64 rng(99);
        std::normal_distribution<double> normal;
        Matrix noise(ds.subjects[0].values().rows(), ds.subjects[0].values().cols());
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = normal(rng);
        const BrainRecordings brain(noise, 6, 4, ds.subjects[0].sensor_labels(), 25, ds.subjects[0].trial_ids());
        const auto data = prepare_data(HypothesisSpec::make(HypothesisKind::H1), ds.stimulus, ds.task, ds.design, brain);
        CVConfig cfg;
        cfg.grid.lambda_values = {1.0};
        cfg.grid.lambda_A_values = {1.0};
        const auto result = run_cv(data, generate_folds(ds.design, 2, 2, 0, 100), cfg);
        const auto tc = accuracy_timecourse(result, PairFilter::All);
        // Distinct trial pairs; every window sees the same ones.
        const std::size_t pairs = tc.n_pairs.front();
        CHECK(pairs >= 500);
        const double mean = std::accumulate(tc.accuracy.begin(), tc.accuracy.end(), 0.0) / 4.0;
        CHECK(std::abs(mean - 0.5) <= 3.0 * 0.5 / std::sqrt(static_cast<double>(pairs)));
    }
    SUBCASE("question-blind data at chance on same-word pairs") {
        GenerativeConfig g;
        g.n_words = 20;
        g.n_questions = 10;
        g.f_s = 5;
        g.f_t = 3;
        g.noise_sigma = 0.3;
        g.noise_relative = true;
        g.seed = 9;
        const auto ds = generate_dataset(g);
        const auto data = prepare_data(HypothesisSpec::make(HypothesisKind::H3), ds.stimulus, ds.task, ds.design,
                                       ds.subjects[0]);
        CVConfig cfg;
        cfg.grid.lambda_values = {0.1, 10.0, 1000.0};
        cfg.grid.lambda_A_values = {1.0};
        const auto result = run_cv(data, generate_folds(ds.design, 2, 2, 0, 40), cfg);
        CHECK(std::abs(mean_accuracy(result, PairFilter::SameWord) - 0.5) <= 0.05);
        CHECK(mean_accuracy(result, PairFilter::SameQuestion) > 0.7);
    }
}

TEST_CASE("brute-force pair enumeration agrees with the pipeline") {
    GenerativeConfig g;
    g.n_words = 8;
    g.n_questions = 4;
    g.f_s = 3;
    g.f_t = 2;
    g.n_sensors = 3;
    g.n_windows = 3;
    g.noise_sigma = 1.0;
    g.noise_relative = true;
    const auto ds = generate_dataset(g);
    const auto data = prepare_data(HypothesisSpec::make(HypothesisKind::H3), ds.stimulus, ds.task, ds.design,
                                   ds.subjects[0]);
    CVConfig cfg;
    cfg.grid.lambda_values = {1.0};
    cfg.grid.lambda_A_values = {1.0};
    const auto result = run_cv(data, generate_folds(ds.design, 2, 2, 0), cfg);
    const auto tc = accuracy_timecourse(result, PairFilter::All);
    for (std::size_t w = 0; w < 3; ++w) {
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& f : result.folds) {
            for (std::size_t i = 0; i < f.test_rows.size(); ++i) {
                for (std::size_t j = i + 1; j < f.test_rows.size(); ++j) {
                    Vector p1(3), p2(3), t1(3), t2(3);
                    for (std::size_t l = 0; l < 3; ++l) {
                        const auto c = static_cast<Eigen::Index>(l * 3 + w);
                        p1(static_cast<Eigen::Index>(l)) = f.predicted(static_cast<Eigen::Index>(i), c);
                        p2(static_cast<Eigen::Index>(l)) = f.predicted(static_cast<Eigen::Index>(j), c);
                        t1(static_cast<Eigen::Index>(l)) = f.truth(static_cast<Eigen::Index>(i), c);
                        t2(static_cast<Eigen::Index>(l)) = f.truth(static_cast<Eigen::Index>(j), c);
                    }
                    if (t1 == t2) continue;
                    total += oracle::two_vs_two(p1, p2, t1, t2);
                    ++n;
                }
            }
        }
        CHECK(tc.n_pairs[w] == n);
        CHECK(tc.accuracy[w] == doctest::Approx(total / static_cast<double>(n)).epsilon(1e-15));
    }
}

TEST_CASE("accuracy_grid") {
    SUBCASE("shape with grouped windows") {
        CVResult r;
        r.design = ExperimentDesign::full_grid({"a", "b"}, {"x"});
        r.n_sensors = 306;
        r.n_windows = 32;
        FoldResult f;
        f.test_rows = {0, 1};
        f.predicted = random_matrix(2, 306 * 32, 1);
        f.truth = random_matrix(2, 306 * 32, 2);
        r.folds.push_back(f);
        const auto g = accuracy_grid(r, PairFilter::All, 2);
        CHECK(g.values.rows() == 306);
        CHECK(g.values.cols() == 16);
    }
    SUBCASE("constant predictions score the tie credit everywhere") {
        const Matrix truth = random_matrix(4, 4, 3);
        CVResult r = two_by_two_result(Matrix::Ones(4, 4), truth);
        r.n_sensors = 2;
        r.n_windows = 2;
        const auto g = accuracy_grid(r, PairFilter::All, 1);
        CHECK((g.values.array() == 0.5).all());
    }
    SUBCASE("signal on one sensor only") {
        GenerativeConfig gc;
        gc.n_words = 20;
        gc.n_questions = 10;
        gc.f_s = 5;
        gc.f_t = 3;
        gc.n_sensors = 4;
        gc.n_windows = 4;
        gc.seed = 4;
        auto ds = generate_dataset(gc);
        Matrix y = ds.subjects[0].values();
        std::mt19937_64 rng(5);
        std::normal_distribution<double> normal;
        for (Eigen::Index c = 4; c < y.cols(); ++c)
            for (Eigen::Index r = 0; r < y.rows(); ++r) y(r, c) = normal(rng);
        const BrainRecordings brain(y, 4, 4, ds.subjects[0].sensor_labels(), 25, ds.subjects[0].trial_ids());
        const auto data = prepare_data(HypothesisSpec::make(HypothesisKind::H1), ds.stimulus, ds.task, ds.design, brain);
        CVConfig cfg;
        cfg.grid.lambda_values = {0.1};
        cfg.grid.lambda_A_values = {1.0};
        const auto result = run_cv(data, generate_folds(ds.design, 2, 2, 0, 20), cfg);
        const auto g = accuracy_grid(result, PairFilter::All, 2);
        const double weakest_signal = g.values.row(0).minCoeff();
        const double strongest_noise = g.values.bottomRows(3).maxCoeff();
        CHECK(weakest_signal >= strongest_noise + 0.1);
        CHECK(grid_csv_rows("H1", g, ds.subjects[0].sensor_labels()).find("H1,all,S0,0,") == 0);
    }
}

TEST_CASE("pair tallies") {
    PairTally t;
    CHECK(t.accuracy(0.5) == 0.5);
    t.add(PairOutcome::Correct);
    t.add(PairOutcome::Correct);
    t.add(PairOutcome::Tie);
    t.add(PairOutcome::Wrong);
    CHECK(t.n() == 4);
    CHECK(t.accuracy(0.5) == doctest::Approx(2.5 / 4.0));
    PairTally u;
    u.add(PairOutcome::Wrong);
    t.merge(u);
    CHECK(t.wrong == 2);
}
