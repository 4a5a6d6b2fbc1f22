#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dkfair/models.hpp"

namespace dkfair {
namespace {

double linear_score(std::span<const double> row, std::span<const double> theta) {
    double z = theta[0];
    for (std::size_t j = 0; j < row.size(); ++j) z += theta[j + 1] * row[j];
    return z;
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void check_inputs(const Matrix& X, std::span<const int> y, std::span<const double> w) {
    if (X.rows() == 0) throw Error(ErrorKind::Domain, "cannot train on zero rows");
    if (y.size() != X.rows() || w.size() != X.rows())
        throw Error(ErrorKind::Domain, "features, labels and weights differ in length");
    for (double v : w)
        if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::Domain, "instance weights must be positive");
}

// Loss at theta; leaves the linear scores in `z` for a following gradient.
double loss_with_scores(const Matrix& X, std::span<const int> y, std::span<const double> w,
                        std::span<const double> theta, double l2_lambda, std::vector<double>& z) {
    double loss = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        z[i] = linear_score(X.row(i), theta);
        loss += w[i] * (y[i] == 1 ? softplus(-z[i]) : softplus(z[i]));
    }
    double penalty = 0.0;
    for (std::size_t j = 1; j < theta.size(); ++j) penalty += theta[j] * theta[j];
    return loss + 0.5 * l2_lambda * penalty;
}

void gradient_from_scores(const Matrix& X, std::span<const int> y, std::span<const double> w,
                          std::span<const double> theta, double l2_lambda, std::span<const double> z,
                          std::vector<double>& g) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < X.rows(); ++i) {
        auto row = X.row(i);
        const double r = w[i] * (sigmoid(z[i]) - static_cast<double>(y[i]));
        g[0] += r;
        for (std::size_t j = 0; j < row.size(); ++j) g[j + 1] += r * row[j];
    }
    for (std::size_t j = 1; j < theta.size(); ++j) g[j] += l2_lambda * theta[j];
}

}  // namespace

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) noexcept {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logistic_loss(const Matrix& X, std::span<const int> y, std::span<const double> w,
                     std::span<const double> theta, double l2_lambda) {
    double loss = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const double z = linear_score(X.row(i), theta);
        // -log s(z) = softplus(-z), -log(1 - s(z)) = softplus(z)
        loss += w[i] * (y[i] == 1 ? softplus(-z) : softplus(z));
    }
    double penalty = 0.0;
    for (std::size_t j = 1; j < theta.size(); ++j) penalty += theta[j] * theta[j];
    return loss + 0.5 * l2_lambda * penalty;
}

std::vector<double> logistic_gradient(const Matrix& X, std::span<const int> y, std::span<const double> w,
                                      std::span<const double> theta, double l2_lambda) {
    std::vector<double> g(theta.size(), 0.0);
    for (std::size_t i = 0; i < X.rows(); ++i) {
        auto row = X.row(i);
        const double r = w[i] * (sigmoid(linear_score(row, theta)) - static_cast<double>(y[i]));
        g[0] += r;
        for (std::size_t j = 0; j < row.size(); ++j) g[j + 1] += r * row[j];
    }
    for (std::size_t j = 1; j < theta.size(); ++j) g[j] += l2_lambda * theta[j];
    return g;
}

TrainedModel fit_logistic(const Matrix& X, std::span<const int> y, std::span<const double> w,
                          const ClassifierSpec& spec, std::vector<double>* loss_trace) {
    spec.validate();
    check_inputs(X, y, w);
    const auto& p = spec.logistic;
    const std::size_t dim = X.cols() + 1;

    std::vector<double> theta(dim, 0.0);
    std::vector<double> candidate(dim);
    std::vector<double> z(X.rows()), z_trial(X.rows()), grad(dim);
    double loss = loss_with_scores(X, y, w, theta, p.l2_lambda, z);
    gradient_from_scores(X, y, w, theta, p.l2_lambda, z, grad);

    constexpr double kArmijo = 1e-4;
    // Initial step from the curvature bound of the logistic loss: s'(z) <= 1/4.
    double weight_sum = 0.0;
    for (double v : w) weight_sum += v;
    double step = 4.0 / std::max(1e-12, weight_sum * static_cast<double>(dim) + p.l2_lambda);

    FitInfo info;
    info.converged = false;
    std::size_t iter = 0;
    for (; iter < p.max_iter; ++iter) {
        const double gnorm = inf_norm(grad);
        if (gnorm < p.tol) {
            info.converged = true;
            break;
        }
        double g2 = 0.0;
        for (double g : grad) g2 += g * g;

        bool accepted = false;
        double trial_loss = loss;
        for (int halvings = 0; halvings < 60; ++halvings) {
            for (std::size_t j = 0; j < dim; ++j) candidate[j] = theta[j] - step * grad[j];
            trial_loss = loss_with_scores(X, y, w, candidate, p.l2_lambda, z_trial);
            if (!std::isfinite(trial_loss)) {
                throw Error(ErrorKind::Numeric,
                            fmt::format("logistic loss became non-finite at iteration {} (step {:g}, |theta|_inf {:g})",
                                        iter, step, inf_norm(theta)));
            }
            if (trial_loss <= loss - kArmijo * step * g2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // step underflowed: no further decrease is representable

        theta.swap(candidate);
        z.swap(z_trial);
        loss = trial_loss;
        if (loss_trace) loss_trace->push_back(loss);
        gradient_from_scores(X, y, w, theta, p.l2_lambda, z, grad);
        step *= 2.0;
    }

    info.iterations = iter;
    info.final_loss = loss;
    info.gradient_norm = inf_norm(grad);
    if (!info.converged && info.gradient_norm < p.tol) info.converged = true;

    TrainedModel m;
    m.spec = spec;
    m.params = LinearParams{std::vector<double>(theta.begin() + 1, theta.end()), theta[0]};
    m.fit_info = info;
    m.n_inputs = X.cols();
    return m;
}

}  // namespace dkfair
