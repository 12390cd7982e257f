#include "taskenc/hypotheses.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

using namespace taskenc;
using testing_support::error_kind_of;
using testing_support::labels;

TEST_CASE("hypothesis names") {
    CHECK(parse_hypothesis("H1") == HypothesisKind::H1);
    CHECK(parse_hypothesis("h3") == HypothesisKind::H3);
    CHECK(parse_hypothesis("H4.1") == HypothesisKind::H41);
    CHECK(parse_hypothesis("H42") == HypothesisKind::H42);
    CHECK(error_kind_of([] { parse_hypothesis("H5"); }) == ErrorKind::KindError);
    for (auto k : all_hypotheses()) CHECK(parse_hypothesis(to_string(k)) == k);
    CHECK(all_hypotheses().size() == 5);
}

TEST_CASE("precomputed attention") {
    SUBCASE("equal cosines give uniform weights") {
        const FeatureMatrix aux(labels("a", 4), labels("t", 2), Matrix::Ones(4, 2), FeatureRole::Task);
        const Vector t = Vector::Constant(2, 3.0);
        const auto a = precomputed_attention(t, aux);
        for (Eigen::Index j = 0; j < 4; ++j) CHECK(a.weights(j) == doctest::Approx(0.25));
    }
    SUBCASE("cosines [0, 1]") {
        Matrix v(2, 2);
        v << 0, 1, 1, 0;
        const FeatureMatrix aux(labels("a", 2), labels("t", 2), v, FeatureRole::Task);
        Vector t(2);
        t << 2, 0;
        const auto a = precomputed_attention(t, aux);
        const double e = std::exp(1.0);
        CHECK(a.weights(0) == doctest::Approx(1.0 / (1.0 + e)));
        CHECK(a.weights(1) == doctest::Approx(e / (1.0 + e)));
        CHECK(a.weights(0) == doctest::Approx(0.2689).epsilon(1e-4));
    }
    SUBCASE("softmax output is positive and sums to one") {
        const FeatureMatrix aux(labels("a", 7), labels("t", 5), testing_support::random_matrix(7, 5, 3),
                                FeatureRole::Task);
        const Vector t = testing_support::random_matrix(5, 1, 4).col(0);
        const auto a = precomputed_attention(t, aux);
        CHECK(a.weights.minCoeff() > 0.0);
        CHECK(a.weights.sum() == doctest::Approx(1.0));
    }
    SUBCASE("zero vectors") {
        const FeatureMatrix aux(labels("a", 2), labels("t", 2), Matrix::Ones(2, 2), FeatureRole::Task);
        CHECK(error_kind_of([&] { precomputed_attention(Vector::Zero(2), aux); }) == ErrorKind::ZeroVector);
        Matrix v = Matrix::Ones(2, 2);
        v.row(1).setZero();
        const FeatureMatrix bad(labels("a", 2), labels("t", 2), v, FeatureRole::Task);
        CHECK(error_kind_of([&] { precomputed_attention(Vector::Ones(2), bad); }) == ErrorKind::ZeroVector);
        CHECK(error_kind_of([&] { precomputed_attention(Vector::Ones(3), aux); }) == ErrorKind::ShapeMismatch);
    }
}

TEST_CASE("augment_stimulus") {
    Vector s(2), a(2);
    s << 4, -2;
    a << 0.25, 0.75;
    const Vector out = augment_stimulus(a, s);
    CHECK(out(0) == doctest::Approx(1.0));
    CHECK(out(1) == doctest::Approx(-1.5));
    CHECK(augment_stimulus(Vector::Ones(2), s) == s);
    CHECK(augment_stimulus(Vector::Constant(2, 0.5), s).isApprox(s / 2.0));
}

TEST_CASE("assemble_inputs shapes and content") {
    const auto words = labels("w", 60);
    const auto questions = labels("q", 20);
    const FeatureMatrix stim(words, labels("f", 198), testing_support::random_matrix(60, 198, 1),
                             FeatureRole::Stimulus);
    const FeatureMatrix task(questions, labels("t", 60), testing_support::random_matrix(20, 60, 2), FeatureRole::Task);
    const auto design = ExperimentDesign::full_grid(words, questions);
    std::vector<std::size_t> all(design.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    const auto h3 = assemble_inputs(HypothesisSpec::make(HypothesisKind::H3), stim, task, design, all);
    CHECK(h3.values.rows() == 1200);
    CHECK(h3.values.cols() == 258);
    const auto h2 = assemble_inputs(HypothesisSpec::make(HypothesisKind::H2), stim, task, design, all);
    CHECK(h2.values.rows() == 1200);
    CHECK(h2.values.cols() == 60);

    const std::vector<std::size_t> one{37};
    const auto h1 = assemble_inputs(HypothesisSpec::make(HypothesisKind::H1), stim, task, design, one);
    REQUIRE(h1.values.rows() == 1);
    CHECK(h1.values.row(0) == stim.values().row(static_cast<Eigen::Index>(design.trial_word(37))));

    // H3 is the concatenation [s, t].
    CHECK(h3.values.row(37).head(198) == stim.values().row(static_cast<Eigen::Index>(design.trial_word(37))));
    CHECK(h3.values.row(37).tail(60) == task.values().row(static_cast<Eigen::Index>(design.trial_question(37))));
}

TEST_CASE("H41 inputs are attention-weighted stimulus rows") {
    const auto words = labels("w", 3);
    const auto questions = labels("q", 2);
    const FeatureMatrix stim(words, labels("f", 4), testing_support::random_matrix(3, 4, 5), FeatureRole::Stimulus);
    const FeatureMatrix task(questions, labels("t", 3), testing_support::random_matrix(2, 3, 6), FeatureRole::Task);
    auto aux = std::make_shared<const FeatureMatrix>(labels("f", 4), labels("t", 3),
                                                     testing_support::random_matrix(4, 3, 7), FeatureRole::Task);
    const auto design = ExperimentDesign::full_grid(words, questions);
    std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
    const auto x = assemble_inputs(HypothesisSpec::make(HypothesisKind::H41, aux), stim, task, design, rows);
    for (auto r : rows) {
        const Vector t = task.values().row(static_cast<Eigen::Index>(design.trial_question(r))).transpose();
        const Vector s = stim.values().row(static_cast<Eigen::Index>(design.trial_word(r))).transpose();
        const Vector expect = augment_stimulus(precomputed_attention(t, *aux).weights, s);
        CHECK((x.values.row(static_cast<Eigen::Index>(r)).transpose() - expect).cwiseAbs().maxCoeff() < 1e-15);
    }
    CHECK(error_kind_of([] { HypothesisSpec::make(HypothesisKind::H41); }) == ErrorKind::ConfigError);
}

TEST_CASE("top_attended_features") {
    const auto names = labels("f", 5);
    SUBCASE("k = F_s is a full ranking") {
        Vector w(5);
        w << 0.1, 0.4, 0.05, 0.3, 0.15;
        const auto top = top_attended_features({w, "q"}, 5, names);
        REQUIRE(top.size() == 5);
        std::vector<std::string> got;
        for (const auto& [n, v] : top) got.push_back(n);
        CHECK(got == std::vector<std::string>{"f1", "f3", "f4", "f0", "f2"});
        std::sort(got.begin(), got.end());
        CHECK(got == names);
    }
    SUBCASE("uniform weights break ties by column index") {
        const auto top = top_attended_features({Vector::Constant(5, 0.2), "q"}, 3, names);
        REQUIRE(top.size() == 3);
        CHECK(top[0].first == "f0");
        CHECK(top[1].first == "f1");
        CHECK(top[2].first == "f2");
    }
}
