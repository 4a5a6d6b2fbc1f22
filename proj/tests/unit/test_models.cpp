#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "dkfair/models.hpp"
#include "dkfair/random.hpp"
#include "dkfair/synth.hpp"

using namespace dkfair;

namespace {

Matrix column(std::initializer_list<double> v) {
    Matrix X(v.size(), 1);
    std::size_t i = 0;
    for (double x : v) X(i++, 0) = x;
    return X;
}

ClassifierSpec spec_for(Family f) {
    ClassifierSpec s;
    s.family = f;
    return s;
}

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

TabularDataset blobs(std::size_t n, double mean, std::uint64_t seed) {
    SynthSpec s;
    s.n = n;
    s.class_mean = mean;
    s.seed = seed;
    return generate_biased(s);
}

double accuracy(std::span<const int> a, std::span<const int> b) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < a.size(); ++i) hit += static_cast<std::size_t>(a[i] == b[i]);
    return static_cast<double>(hit) / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("stable sigmoid and softplus") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(1000.0) == 1.0);
    CHECK(sigmoid(-1000.0) == 0.0);
    CHECK(std::isfinite(softplus(1000.0)));
    CHECK(softplus(1000.0) == doctest::Approx(1000.0));
    CHECK(softplus(-1000.0) >= 0.0);
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("logistic on two points agrees with a brute-force grid") {
    const Matrix X = column({-1.0, 1.0});
    const std::vector<int> y{0, 1};
    auto spec = spec_for(Family::Logistic);
    spec.logistic.l2_lambda = 0.1;
    const auto m = fit_logistic(X, y, ones(2), spec);
    const auto& lp = std::get<LinearParams>(m.params);
    CHECK(m.fit_info.converged);
    CHECK(lp.coef[0] > 0.0);
    CHECK(predict(m, X) == y);

    // The grid minimum sits next to the optimiser's answer.
    double best = INFINITY, best_b = 0, best_b0 = 0;
    for (int i = -100; i <= 100; ++i)
        for (int j = 0; j <= 400; ++j) {
            const double b0 = 0.01 * i, b = 0.02 * j;
            const std::vector<double> theta{b0, b};
            const double l = logistic_loss(X, y, ones(2), theta, 0.1);
            if (l < best) best = l, best_b = b, best_b0 = b0;
        }
    CHECK(best_b > 0.0);
    CHECK(std::abs(lp.coef[0] - best_b) < 0.03);
    CHECK(std::abs(lp.intercept - best_b0) < 0.02);
    CHECK(m.fit_info.final_loss <= best + 1e-9);
}

TEST_CASE("logistic with a single class") {
    Rng rng(1);
    Matrix X(30, 2);
    for (std::size_t i = 0; i < 30; ++i) X(i, 0) = rng.normal(), X(i, 1) = rng.normal();
    const std::vector<int> y(30, 0);
    const auto m = fit_logistic(X, y, ones(30), spec_for(Family::Logistic));
    const auto& lp = std::get<LinearParams>(m.params);
    CHECK(lp.intercept < -5.0);
    CHECK(std::abs(lp.coef[0]) < 0.5);
    for (int p : predict(m, X)) CHECK(p == 0);
}

TEST_CASE("logistic gradient against central differences") {
    const auto ds = blobs(80, 1.0, 3);
    Rng rng(77);
    std::vector<double> w(80);
    for (auto& v : w) v = 0.2 + rng.uniform();
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> theta(ds.X.cols() + 1);
        for (auto& t : theta) t = rng.normal();
        const auto g = logistic_gradient(ds.X, ds.y, w, theta, 0.3);
        for (std::size_t j = 0; j < theta.size(); ++j) {
            auto up = theta, down = theta;
            up[j] += 1e-5;
            down[j] -= 1e-5;
            const double fd =
                (logistic_loss(ds.X, ds.y, w, up, 0.3) - logistic_loss(ds.X, ds.y, w, down, 0.3)) / 2e-5;
            CHECK(std::abs(fd - g[j]) / std::max(1.0, std::abs(fd)) < 1e-4);
        }
    }
}

TEST_CASE("logistic loss decreases across accepted steps") {
    const auto ds = blobs(200, 0.7, 4);
    std::vector<double> trace;
    fit_logistic(ds.X, ds.y, ones(200), spec_for(Family::Logistic), &trace);
    REQUIRE(trace.size() > 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
}

TEST_CASE("logistic rejects non-finite losses with a numeric error") {
    Matrix X(2, 1);
    X(0, 0) = 1e308;
    X(1, 0) = -1e308;
    const std::vector<int> y{1, 0};
    try {
        fit_logistic(X, y, ones(2), spec_for(Family::Logistic));
        FAIL("expected a numeric failure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
    }
}

TEST_CASE("weight scaling leaves predictions unchanged when unregularised") {
    const auto ds = blobs(150, 0.8, 5);
    auto spec = spec_for(Family::Logistic);
    spec.logistic.l2_lambda = 0.0;
    spec.logistic.tol = 1e-9;
    spec.logistic.max_iter = 20000;
    const auto probe = blobs(300, 0.8, 6);
    const auto base = predict(fit_logistic(ds.X, ds.y, ones(150), spec), probe.X);
    for (double c : {0.01, 7.0, 1000.0}) {
        std::vector<double> w(150, c);
        CHECK(predict(fit_logistic(ds.X, ds.y, w, spec), probe.X) == base);
    }
}

TEST_CASE("an epsilon weight effectively removes a row") {
    const auto ds = blobs(120, 0.8, 8);
    auto spec = spec_for(Family::Logistic);
    spec.logistic.l2_lambda = 0.0;
    spec.logistic.tol = 1e-9;
    spec.logistic.max_iter = 20000;
    const std::size_t drop = 17;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < 120; ++i)
        if (i != drop) keep.push_back(i);
    const auto reduced = ds.subset(keep);
    std::vector<double> w = ones(120);
    w[drop] = 1e-12;
    const auto probe = blobs(300, 0.8, 9);
    CHECK(predict(fit_logistic(reduced.X, reduced.y, ones(119), spec), probe.X) ==
          predict(fit_logistic(ds.X, ds.y, w, spec), probe.X));
}

TEST_CASE("zero coefficients predict probability one half and label 1") {
    TrainedModel m;
    m.spec = spec_for(Family::Logistic);
    m.params = LinearParams{{0.0, 0.0}, 0.0};
    m.n_inputs = 2;
    Matrix X(3, 2, 4.0);
    for (double p : predict_proba(m, X)) CHECK(p == 0.5);
    for (int l : predict(m, X)) CHECK(l == 1);
    CHECK_THROWS_AS(predict(m, Matrix(1, 3)), Error);
}

TEST_CASE("knn") {
    const auto ds = blobs(60, 1.5, 10);
    auto spec = spec_for(Family::Knn);
    spec.knn.k = 1;
    const auto m = fit_knn(ds.X, ds.y, ones(60), spec);
    CHECK(predict(m, ds.X) == ds.y);

    spec.knn.k = 60;
    const auto all = fit_knn(ds.X, ds.y, ones(60), spec);
    const auto pos = std::count(ds.y.begin(), ds.y.end(), 1);
    const int majority = pos > 30 ? 1 : 0;  // 30/30 ties go to 0
    for (int p : predict(all, blobs(50, 1.5, 11).X)) CHECK(p == majority);

    spec.knn.k = 61;
    CHECK_THROWS_AS(fit_knn(ds.X, ds.y, ones(60), spec), Error);

    // Two neighbours, one per class: the smaller label wins.
    spec.knn.k = 2;
    const auto tie = fit_knn(column({-1.0, 1.0}), std::vector<int>{1, 0}, ones(2), spec);
    CHECK(predict(tie, column({0.0}))[0] == 0);
}

TEST_CASE("tree splits separable data") {
    const Matrix X = column({0.0, 1.0, 5.0, 6.0});
    const std::vector<int> y{0, 0, 1, 1};
    auto spec = spec_for(Family::Tree);
    spec.tree.min_samples_leaf = 1;
    const auto m = fit_tree(X, y, ones(4), spec);
    CHECK(predict(m, X) == y);
    const auto& tree = std::get<DecisionTree>(m.params);
    CHECK(tree.nodes[0].threshold == 3.0);

    const auto ds = blobs(200, 4.0, 12);
    spec.tree.max_depth = 1;
    const auto stump = fit_tree(ds.X, ds.y, ones(200), spec);
    const auto& st = std::get<DecisionTree>(stump.params);
    CHECK(st.nodes.size() == 3);
    CHECK(st.depth == 1);
    CHECK(accuracy(predict(stump, ds.X), ds.y) == 1.0);
}

TEST_CASE("tree respects depth and leaf size") {
    const auto ds = blobs(300, 0.3, 13);
    auto spec = spec_for(Family::Tree);
    spec.tree.max_depth = 3;
    spec.tree.min_samples_leaf = 10;
    const auto& t = std::get<DecisionTree>(fit_tree(ds.X, ds.y, ones(300), spec).params);
    CHECK(t.depth <= 3);
    for (const auto& n : t.nodes)
        if (n.is_leaf()) CHECK(n.mass[0] + n.mass[1] >= 10.0);
}

TEST_CASE("single-tree forest without resampling matches the tree") {
    const auto ds = blobs(150, 0.6, 14);
    auto tree_spec = spec_for(Family::Tree);
    auto forest_spec = spec_for(Family::Forest);
    forest_spec.forest.n_trees = 1;
    forest_spec.forest.bootstrap = false;
    forest_spec.forest.max_features = ds.X.cols();
    forest_spec.forest.max_depth = tree_spec.tree.max_depth;
    forest_spec.forest.min_samples_leaf = tree_spec.tree.min_samples_leaf;
    CHECK(predict(fit_forest(ds.X, ds.y, ones(150), forest_spec), ds.X) ==
          predict(fit_tree(ds.X, ds.y, ones(150), tree_spec), ds.X));
}

TEST_CASE("forest determinism across thread counts") {
    const auto ds = blobs(200, 0.6, 15);
    const auto probe = blobs(100, 0.6, 16);
    auto spec = spec_for(Family::Forest);
    spec.forest.n_trees = 24;
    std::vector<int> reference;
    for (unsigned threads : {1u, 2u, 4u, 7u}) {
        spec.forest.threads = threads;
        const auto m = fit_forest(ds.X, ds.y, ones(200), spec);
        const auto& f = std::get<ForestParamsLearned>(m.params);
        CHECK(f.trees.size() == 24);
        CHECK(f.tree_seeds[5] == spec.forest.seed + 5);
        const auto p = predict(m, probe.X);
        if (reference.empty()) reference = p;
        CHECK(p == reference);
    }
}

TEST_CASE("linear svm separates the two-point fixture") {
    const Matrix X = column({-1.0, 1.0});
    const std::vector<int> y{0, 1};
    const auto m = fit_linear_svm(X, y, ones(2), spec_for(Family::LinearSvm));
    CHECK(predict(m, X) == y);
}

TEST_CASE("every family separates well-separated blobs") {
    const auto train = blobs(400, 2.0, 20), test = blobs(200, 2.0, 21);
    for (Family f : kAllFamilies) {
        const auto m = fit_pipeline(train, spec_for(f), true);
        CHECK_MESSAGE(accuracy(predict(m, test.X), test.y) >= 0.95, to_string(f));
    }
}

TEST_CASE("classification scores") {
    const std::vector<int> y{1, 1, 1, 1, 0, 0, 0, 0};
    const std::vector<int> yh{1, 1, 1, 0, 0, 0, 1, 1};
    const auto s = classification_scores(y, yh);
    CHECK(s.tp == 3);
    CHECK(s.fn == 1);
    CHECK(s.tn == 2);
    CHECK(s.fp == 2);
    CHECK(s.accuracy == doctest::Approx(0.625));
    CHECK(s.precision == doctest::Approx(0.6));
    CHECK(s.recall == doctest::Approx(0.75));
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0));

    const auto perfect = classification_scores(y, y);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f1 == 1.0);

    const auto none = classification_scores(y, std::vector<int>(8, 0));
    CHECK(none.precision == 0.0);
    CHECK(none.precision_degenerate);
    CHECK(none.recall == 0.0);
}

TEST_CASE("hyperparameter validation") {
    auto s = spec_for(Family::Logistic);
    s.logistic.tol = 0.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = spec_for(Family::LinearSvm);
    s.svm.c = -1.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = spec_for(Family::Knn);
    s.knn.k = 0;
    CHECK_THROWS_AS(s.validate(), Error);
    CHECK(family_from_string("linear_svm") == Family::LinearSvm);
    CHECK_THROWS_AS(family_from_string("svm-rbf"), Error);
}

TEST_CASE("models survive a JSON round-trip") {
    const auto ds = blobs(120, 0.8, 22);
    const auto probe = blobs(60, 0.8, 23);
    for (Family f : kAllFamilies) {
        auto spec = spec_for(f);
        spec.forest.n_trees = 5;
        const auto m = fit_pipeline(ds, spec, true);
        const auto doc = model_to_json(m);
        CHECK(doc.at("format").get<std::string>() == kModelFormatVersion);
        const auto back = model_from_json(nlohmann::json::parse(doc.dump()));
        CHECK(predict(back, probe.X) == predict(m, probe.X));
        CHECK(model_to_json(back) == doc);
    }
}
