#include "dkfair/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dkfair/random.hpp"

namespace dkfair {
namespace {

using nlohmann::json;

void check_width(const TrainedModel& m, const Matrix& X) {
    if (X.cols() != m.n_inputs) {
        throw Error(ErrorKind::Domain, fmt::format("model expects {} features, got {}", m.n_inputs, X.cols()));
    }
}

int knn_vote(const KnnMemory& mem, std::span<const double> x, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> dist(mem.X.rows());
    for (std::size_t i = 0; i < mem.X.rows(); ++i) {
        auto row = mem.X.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) s += (row[j] - x[j]) * (row[j] - x[j]);
        dist[i] = {s, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::size_t votes[2] = {0, 0};
    for (std::size_t i = 0; i < k; ++i) ++votes[mem.y[dist[i].second]];
    return votes[1] > votes[0] ? 1 : 0;  // ties go to the smaller label
}

json tree_to_json(const DecisionTree& t) {
    json nodes = json::array();
    for (const auto& n : t.nodes)
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"mass", {n.mass[0], n.mass[1]}}});
    return {{"depth", t.depth}, {"nodes", nodes}};
}

DecisionTree tree_from_json(const json& j) {
    DecisionTree t;
    t.depth = j.at("depth").get<std::size_t>();
    for (const auto& n : j.at("nodes")) {
        TreeNode node;
        node.feature = n.at("feature").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        node.mass[0] = n.at("mass").at(0).get<double>();
        node.mass[1] = n.at("mass").at(1).get<double>();
        t.nodes.push_back(node);
    }
    return t;
}

json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.rows() * m.cols()) throw Error(ErrorKind::Parse, "model matrix has the wrong size");
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t c = 0; c < m.cols(); ++c) m(i, c) = data[i * m.cols() + c];
    return m;
}

}  // namespace

const char* to_string(Family f) noexcept {
    switch (f) {
        case Family::Logistic: return "logistic";
        case Family::Knn: return "knn";
        case Family::Tree: return "tree";
        case Family::Forest: return "forest";
        case Family::LinearSvm: return "linear_svm";
    }
    return "unknown";
}

Family family_from_string(std::string_view s) {
    for (Family f : kAllFamilies)
        if (s == to_string(f)) return f;
    throw Error(ErrorKind::Usage, fmt::format("unknown classifier family '{}'", s));
}

void ClassifierSpec::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Usage, what); };
    if (!(logistic.l2_lambda >= 0.0) || !std::isfinite(logistic.l2_lambda)) fail("logistic: l2_lambda must be >= 0");
    if (!(logistic.tol > 0.0)) fail("logistic: tol must be > 0");
    if (knn.k < 1) fail("knn: k must be >= 1");
    if (tree.max_depth < 1 && family == Family::Tree) fail("tree: max_depth must be >= 1");
    if (tree.min_samples_leaf < 1) fail("tree: min_samples_leaf must be >= 1");
    if (forest.n_trees < 1) fail("forest: n_trees must be >= 1");
    if (forest.min_samples_leaf < 1) fail("forest: min_samples_leaf must be >= 1");
    if (!(svm.c > 0.0) || !std::isfinite(svm.c)) fail("linear_svm: c must be > 0");
    if (svm.epochs < 1) fail("linear_svm: epochs must be >= 1");
}

TrainedModel fit_linear_svm(const Matrix& X, std::span<const int> y, std::span<const double> w,
                            const ClassifierSpec& spec) {
    spec.validate();
    if (X.rows() == 0) throw Error(ErrorKind::Domain, "cannot train on zero rows");
    if (y.size() != X.rows() || w.size() != X.rows())
        throw Error(ErrorKind::Domain, "features, labels and weights differ in length");
    const std::size_t n = X.rows(), d = X.cols();
    // Objective (1/n) sum w_i hinge_i + |beta|^2 / (2 c n): regularizer lambda = 1/(c n).
    // The intercept rides along as a constant feature and is regularized with beta.
    const double lambda = 1.0 / (spec.svm.c * static_cast<double>(n));

    std::vector<double> beta(d, 0.0);
    double bias = 0.0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.svm.seed);
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < spec.svm.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        for (std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            auto row = X.row(i);
            const double sign = y[i] == 1 ? 1.0 : -1.0;
            double z = bias;
            for (std::size_t j = 0; j < d; ++j) z += beta[j] * row[j];
            const double shrink = 1.0 - eta * lambda;
            for (double& b : beta) b *= shrink;
            bias *= shrink;
            if (sign * z < 1.0) {
                const double step = eta * w[i] * sign;
                for (std::size_t j = 0; j < d; ++j) beta[j] += step * row[j];
                bias += step;
            }
        }
    }
    for (double b : beta)
        if (!std::isfinite(b)) throw Error(ErrorKind::Numeric, "linear_svm: parameters became non-finite");

    TrainedModel m;
    m.spec = spec;
    m.params = LinearParams{std::move(beta), bias};
    m.fit_info.iterations = t;
    m.n_inputs = d;
    return m;
}

TrainedModel fit(const Matrix& X, std::span<const int> y, std::span<const double> w, const ClassifierSpec& spec) {
    switch (spec.family) {
        case Family::Logistic: return fit_logistic(X, y, w, spec);
        case Family::Knn: return fit_knn(X, y, w, spec);
        case Family::Tree: return fit_tree(X, y, w, spec);
        case Family::Forest: return fit_forest(X, y, w, spec);
        case Family::LinearSvm: return fit_linear_svm(X, y, w, spec);
    }
    throw Error(ErrorKind::Usage, "unknown classifier family");
}

TrainedModel fit_pipeline(const TabularDataset& train, const ClassifierSpec& spec, bool standardize,
                          std::span<const double> weights) {
    std::span<const double> w = weights.empty() ? std::span<const double>(train.weights) : weights;
    TrainedModel m;
    if (standardize) {
        auto params = fit_standardizer(train.X);
        m = fit(apply_standardizer(params, train.X), train.y, w, spec);
        m.standardizer = std::move(params);
    } else {
        m = fit(train.X, train.y, w, spec);
    }
    m.feature_names = train.feature_names;
    return m;
}

std::vector<int> predict(const TrainedModel& model, const Matrix& X_in) {
    check_width(model, X_in);
    const Matrix X = model.standardizer ? apply_standardizer(*model.standardizer, X_in) : X_in;
    std::vector<int> out(X.rows());
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearParams>) {
                for (std::size_t i = 0; i < X.rows(); ++i) {
                    auto row = X.row(i);
                    double z = p.intercept;
                    for (std::size_t j = 0; j < row.size(); ++j) z += p.coef[j] * row[j];
                    out[i] = z >= 0.0 ? 1 : 0;  // probability 0.5 / margin 0 predicts 1
                }
            } else if constexpr (std::is_same_v<T, KnnMemory>) {
                for (std::size_t i = 0; i < X.rows(); ++i) out[i] = knn_vote(p, X.row(i), model.spec.knn.k);
            } else if constexpr (std::is_same_v<T, DecisionTree>) {
                for (std::size_t i = 0; i < X.rows(); ++i) out[i] = p.predict_row(X.row(i));
            } else {
                for (std::size_t i = 0; i < X.rows(); ++i) {
                    std::size_t ones = 0;
                    for (const auto& t : p.trees) ones += static_cast<std::size_t>(t.predict_row(X.row(i)));
                    out[i] = 2 * ones >= p.trees.size() ? 1 : 0;  // tied votes predict 1
                }
            }
        },
        model.params);
    return out;
}

std::vector<double> predict_proba(const TrainedModel& model, const Matrix& X_in) {
    if (model.family() != Family::Logistic) throw Error(ErrorKind::Usage, "predict_proba needs a logistic model");
    check_width(model, X_in);
    const Matrix X = model.standardizer ? apply_standardizer(*model.standardizer, X_in) : X_in;
    const auto& p = std::get<LinearParams>(model.params);
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        auto row = X.row(i);
        double z = p.intercept;
        for (std::size_t j = 0; j < row.size(); ++j) z += p.coef[j] * row[j];
        out[i] = sigmoid(z);
    }
    return out;
}

ClassificationScores classification_scores(std::span<const int> y, std::span<const int> y_hat) {
    if (y.size() != y_hat.size()) throw Error(ErrorKind::Domain, "labels and predictions differ in length");
    ClassificationScores s;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y_hat[i] == 1) (y[i] == 1 ? s.tp : s.fp)++;
        else (y[i] == 1 ? s.fn : s.tn)++;
    }
    const auto n = static_cast<double>(y.size());
    s.accuracy = y.empty() ? 0.0 : static_cast<double>(s.tp + s.tn) / n;
    s.precision_degenerate = s.tp + s.fp == 0;
    s.recall_degenerate = s.tp + s.fn == 0;
    s.precision = s.precision_degenerate ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
    s.recall = s.recall_degenerate ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

nlohmann::json model_to_json(const TrainedModel& m) {
    const auto& s = m.spec;
    json hyper;
    switch (s.family) {
        case Family::Logistic:
            hyper = {{"l2_lambda", s.logistic.l2_lambda}, {"tol", s.logistic.tol}, {"max_iter", s.logistic.max_iter}};
            break;
        case Family::Knn: hyper = {{"k", s.knn.k}}; break;
        case Family::Tree:
            hyper = {{"max_depth", s.tree.max_depth}, {"min_samples_leaf", s.tree.min_samples_leaf}};
            break;
        case Family::Forest:
            hyper = {{"n_trees", s.forest.n_trees},
                     {"max_depth", s.forest.max_depth},
                     {"min_samples_leaf", s.forest.min_samples_leaf},
                     {"seed", s.forest.seed},
                     {"bootstrap", s.forest.bootstrap},
                     {"max_features", s.forest.max_features}};
            break;
        case Family::LinearSvm:
            hyper = {{"c", s.svm.c}, {"epochs", s.svm.epochs}, {"seed", s.svm.seed}};
            break;
    }
    json doc = {{"format", kModelFormatVersion},
                {"family", to_string(s.family)},
                {"hyperparameters", hyper},
                {"feature_names", m.feature_names},
                {"n_inputs", m.n_inputs},
                {"fit_info",
                 {{"converged", m.fit_info.converged},
                  {"iterations", m.fit_info.iterations},
                  {"final_loss", m.fit_info.final_loss},
                  {"gradient_norm", m.fit_info.gradient_norm}}}};
    if (m.standardizer) doc["standardizer"] = {{"mean", m.standardizer->mean}, {"scale", m.standardizer->scale}};
    else doc["standardizer"] = nullptr;

    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearParams>) {
                doc["parameters"] = {{"coef", p.coef}, {"intercept", p.intercept}};
            } else if constexpr (std::is_same_v<T, KnnMemory>) {
                doc["parameters"] = {{"X", matrix_to_json(p.X)}, {"y", p.y}};
            } else if constexpr (std::is_same_v<T, DecisionTree>) {
                doc["parameters"] = tree_to_json(p);
            } else {
                json trees = json::array();
                for (const auto& t : p.trees) trees.push_back(tree_to_json(t));
                doc["parameters"] = {{"trees", trees}, {"tree_seeds", p.tree_seeds}};
            }
        },
        m.params);
    return doc;
}

TrainedModel model_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != kModelFormatVersion)
            throw Error(ErrorKind::Parse, "unsupported model format '" + doc.at("format").get<std::string>() + "'");
        TrainedModel m;
        auto& s = m.spec;
        s.family = family_from_string(doc.at("family").get<std::string>());
        const auto& h = doc.at("hyperparameters");
        const auto& p = doc.at("parameters");
        switch (s.family) {
            case Family::Logistic:
                s.logistic = {h.at("l2_lambda").get<double>(), h.at("tol").get<double>(),
                              h.at("max_iter").get<std::size_t>()};
                m.params = LinearParams{p.at("coef").get<std::vector<double>>(), p.at("intercept").get<double>()};
                break;
            case Family::Knn:
                s.knn.k = h.at("k").get<std::size_t>();
                m.params = KnnMemory{matrix_from_json(p.at("X")), p.at("y").get<std::vector<int>>()};
                break;
            case Family::Tree:
                s.tree = {h.at("max_depth").get<std::size_t>(), h.at("min_samples_leaf").get<std::size_t>()};
                m.params = tree_from_json(p);
                break;
            case Family::Forest: {
                s.forest.n_trees = h.at("n_trees").get<std::size_t>();
                s.forest.max_depth = h.at("max_depth").get<std::size_t>();
                s.forest.min_samples_leaf = h.at("min_samples_leaf").get<std::size_t>();
                s.forest.seed = h.at("seed").get<std::uint64_t>();
                s.forest.bootstrap = h.at("bootstrap").get<bool>();
                s.forest.max_features = h.at("max_features").get<std::size_t>();
                ForestParamsLearned f;
                for (const auto& t : p.at("trees")) f.trees.push_back(tree_from_json(t));
                f.tree_seeds = p.at("tree_seeds").get<std::vector<std::uint64_t>>();
                m.params = std::move(f);
                break;
            }
            case Family::LinearSvm:
                s.svm = {h.at("c").get<double>(), h.at("epochs").get<std::size_t>(), h.at("seed").get<std::uint64_t>()};
                m.params = LinearParams{p.at("coef").get<std::vector<double>>(), p.at("intercept").get<double>()};
                break;
        }
        m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        m.n_inputs = doc.at("n_inputs").get<std::size_t>();
        if (!doc.at("standardizer").is_null()) {
            m.standardizer = StandardizationParams{doc["standardizer"].at("mean").get<std::vector<double>>(),
                                                   doc["standardizer"].at("scale").get<std::vector<double>>()};
        }
        const auto& fi = doc.at("fit_info");
        m.fit_info = {fi.at("converged").get<bool>(), fi.at("iterations").get<std::size_t>(),
                      fi.at("final_loss").get<double>(), fi.at("gradient_norm").get<double>()};
        s.validate();
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed model file: ") + e.what());
    }
}

}  // namespace dkfair
