#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "dkfair/models.hpp"
#include "dkfair/random.hpp"

namespace dkfair {
namespace {

struct TreeBuilder {
    const Matrix& X;
    std::span<const int> y;
    std::span<const double> w;
    std::size_t max_depth;
    std::size_t min_leaf;
    std::size_t features_per_split;  // == X.cols() means every feature is tried
    Rng* rng;                        // only used when subsampling features

    DecisionTree tree;

    static double gini_mass(double m0, double m1) {
        const double t = m0 + m1;
        if (t <= 0.0) return 0.0;
        const double p0 = m0 / t, p1 = m1 / t;
        return t * (1.0 - p0 * p0 - p1 * p1);
    }

    std::vector<std::size_t> candidate_features() {
        std::vector<std::size_t> f(X.cols());
        std::iota(f.begin(), f.end(), 0);
        if (features_per_split >= f.size()) return f;
        for (std::size_t i = 0; i < features_per_split; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng->below(f.size() - i));
            std::swap(f[i], f[j]);
        }
        f.resize(features_per_split);
        std::sort(f.begin(), f.end());
        return f;
    }

    int build(std::vector<std::size_t>& rows, std::size_t depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        double mass[2] = {0.0, 0.0};
        for (std::size_t r : rows) mass[y[r]] += w[r];
        tree.nodes[id].mass[0] = mass[0];
        tree.nodes[id].mass[1] = mass[1];
        tree.depth = std::max(tree.depth, depth);

        const bool pure = mass[0] == 0.0 || mass[1] == 0.0;
        if (pure || depth >= max_depth || rows.size() < 2 * min_leaf) return id;

        const double parent = gini_mass(mass[0], mass[1]);
        double best = parent;
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<std::size_t> order(rows);
        for (std::size_t f : candidate_features()) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = X(a, f), vb = X(b, f);
                return va < vb || (va == vb && a < b);
            });
            double left[2] = {0.0, 0.0};
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                left[y[order[k]]] += w[order[k]];
                const std::size_t n_left = k + 1, n_right = order.size() - n_left;
                const double here = X(order[k], f), next = X(order[k + 1], f);
                if (here == next || n_left < min_leaf || n_right < min_leaf) continue;
                const double impurity =
                    gini_mass(left[0], left[1]) + gini_mass(mass[0] - left[0], mass[1] - left[1]);
                if (impurity < best - 1e-12 * std::max(1.0, parent)) {
                    best = impurity;
                    best_feature = static_cast<int>(f);
                    best_threshold = here + 0.5 * (next - here);
                    if (best_threshold >= next) best_threshold = here;
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> lrows, rrows;
        for (std::size_t r : rows)
            (X(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? lrows : rrows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[id].feature = best_feature;
        tree.nodes[id].threshold = best_threshold;
        const int l = build(lrows, depth + 1);
        const int r = build(rrows, depth + 1);
        tree.nodes[id].left = l;
        tree.nodes[id].right = r;
        return id;
    }
};

void check_inputs(const Matrix& X, std::span<const int> y, std::span<const double> w) {
    if (X.rows() == 0) throw Error(ErrorKind::Domain, "cannot train on zero rows");
    if (y.size() != X.rows() || w.size() != X.rows())
        throw Error(ErrorKind::Domain, "features, labels and weights differ in length");
    for (double v : w)
        if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::Domain, "instance weights must be positive");
}

DecisionTree grow(const Matrix& X, std::span<const int> y, std::span<const double> w, std::vector<std::size_t> rows,
                  std::size_t max_depth, std::size_t min_leaf, std::size_t features_per_split, Rng* rng) {
    TreeBuilder b{X, y, w, max_depth, min_leaf, features_per_split, rng, {}};
    b.build(rows, 0);
    return std::move(b.tree);
}

}  // namespace

int DecisionTree::predict_row(std::span<const double> x) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
        const auto& n = nodes[at];
        at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[at].majority();
}

TrainedModel fit_knn(const Matrix& X, std::span<const int> y, std::span<const double> w, const ClassifierSpec& spec) {
    spec.validate();
    check_inputs(X, y, w);
    if (spec.knn.k > X.rows())
        throw Error(ErrorKind::Usage, "knn: k exceeds the number of training rows");
    TrainedModel m;
    m.spec = spec;
    m.params = KnnMemory{X, std::vector<int>(y.begin(), y.end())};
    m.n_inputs = X.cols();
    return m;
}

TrainedModel fit_tree(const Matrix& X, std::span<const int> y, std::span<const double> w, const ClassifierSpec& spec) {
    spec.validate();
    check_inputs(X, y, w);
    std::vector<std::size_t> rows(X.rows());
    std::iota(rows.begin(), rows.end(), 0);
    TrainedModel m;
    m.spec = spec;
    m.params = grow(X, y, w, std::move(rows), spec.tree.max_depth, spec.tree.min_samples_leaf, X.cols(), nullptr);
    m.n_inputs = X.cols();
    return m;
}

TrainedModel fit_forest(const Matrix& X, std::span<const int> y, std::span<const double> w,
                        const ClassifierSpec& spec) {
    spec.validate();
    check_inputs(X, y, w);
    const auto& p = spec.forest;
    const std::size_t n = X.rows(), d = X.cols();
    const std::size_t per_split =
        p.max_features == 0 ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
                            : std::min(p.max_features, d);

    std::vector<double> cumulative(n);
    std::partial_sum(w.begin(), w.end(), cumulative.begin());
    const std::vector<double> unit(n, 1.0);

    ForestParamsLearned learned;
    learned.trees.resize(p.n_trees);
    for (std::size_t t = 0; t < p.n_trees; ++t) learned.tree_seeds.push_back(p.seed + t);

    auto train_one = [&](std::size_t t) {
        Rng rng(learned.tree_seeds[t]);
        std::vector<std::size_t> rows(n);
        if (p.bootstrap) {
            // Weighted bootstrap: draw n rows with probability proportional to weight.
            for (auto& r : rows) {
                const double u = rng.uniform() * cumulative.back();
                auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
                r = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), n - 1);
            }
            learned.trees[t] = grow(X, y, unit, std::move(rows), p.max_depth, p.min_samples_leaf, per_split, &rng);
        } else {
            std::iota(rows.begin(), rows.end(), 0);
            learned.trees[t] = grow(X, y, w, std::move(rows), p.max_depth, p.min_samples_leaf, per_split, &rng);
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(p.threads, static_cast<unsigned>(p.n_trees)));
    if (workers == 1) {
        for (std::size_t t = 0; t < p.n_trees; ++t) train_one(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < workers; ++k) {
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < p.n_trees; t = next++) train_one(t);
            });
        }
    }

    TrainedModel m;
    m.spec = spec;
    m.params = std::move(learned);
    m.n_inputs = d;
    return m;
}

}  // namespace dkfair
