#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dkfair/common.hpp"
#include "dkfair/preprocess.hpp"

namespace dkfair {

enum class Family { Logistic, Knn, Tree, Forest, LinearSvm };

const char* to_string(Family f) noexcept;
Family family_from_string(std::string_view s);
inline constexpr Family kAllFamilies[] = {Family::Logistic, Family::Knn, Family::Tree, Family::Forest,
                                          Family::LinearSvm};

struct LogisticParams {
    double l2_lambda = 1e-4;
    double tol = 1e-6;
    std::size_t max_iter = 5000;
};

struct KnnParams {
    std::size_t k = 5;
};

struct TreeParams {
    std::size_t max_depth = 8;
    std::size_t min_samples_leaf = 5;
};

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 8;
    std::size_t min_samples_leaf = 1;
    std::uint64_t seed = 42;
    bool bootstrap = true;
    std::size_t max_features = 0;  // 0 selects ceil(sqrt(d))
    unsigned threads = 1;
};

struct LinearSvmParams {
    double c = 1.0;
    std::size_t epochs = 200;
    std::uint64_t seed = 42;
};

struct ClassifierSpec {
    Family family = Family::Logistic;
    LogisticParams logistic;
    KnnParams knn;
    TreeParams tree;
    ForestParams forest;
    LinearSvmParams svm;

    /// Throws Usage when a hyperparameter is outside its domain.
    void validate() const;
};

struct LinearParams {
    std::vector<double> coef;
    double intercept = 0.0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // rows with x[feature] <= threshold go left
    int left = -1;
    int right = -1;
    double mass[2] = {0.0, 0.0};  // weighted class mass reaching the node

    bool is_leaf() const noexcept { return feature < 0; }
    int majority() const noexcept { return mass[1] >= mass[0] ? 1 : 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t depth = 0;

    int predict_row(std::span<const double> x) const;
};

struct KnnMemory {
    Matrix X;
    std::vector<int> y;
};

struct ForestParamsLearned {
    std::vector<DecisionTree> trees;
    std::vector<std::uint64_t> tree_seeds;
};

struct FitInfo {
    bool converged = true;
    std::size_t iterations = 0;
    double final_loss = 0.0;
    double gradient_norm = 0.0;
};

struct TrainedModel {
    ClassifierSpec spec;
    std::vector<std::string> feature_names;
    std::optional<StandardizationParams> standardizer;  // applied by predict when present
    std::variant<LinearParams, KnnMemory, DecisionTree, ForestParamsLearned> params;
    FitInfo fit_info;
    std::size_t n_inputs = 0;  // feature width seen at fit time

    Family family() const noexcept { return spec.family; }
};

// Weighted logistic objective over theta = [intercept, coef...]:
//   L = -sum_i w_i [y_i log s(z_i) + (1 - y_i) log(1 - s(z_i))] + lambda/2 * |coef|^2
double logistic_loss(const Matrix& X, std::span<const int> y, std::span<const double> w,
                     std::span<const double> theta, double l2_lambda);
std::vector<double> logistic_gradient(const Matrix& X, std::span<const int> y, std::span<const double> w,
                                      std::span<const double> theta, double l2_lambda);

/// Numerically stable logistic function and log(1 + exp(z)).
double sigmoid(double z) noexcept;
double softplus(double z) noexcept;

/// Full-batch gradient descent with Armijo backtracking. When `loss_trace` is
/// given, the loss after every accepted step is appended to it.
TrainedModel fit_logistic(const Matrix& X, std::span<const int> y, std::span<const double> w,
                          const ClassifierSpec& spec, std::vector<double>* loss_trace = nullptr);
/// Weights are ignored; prediction is an unweighted majority vote.
TrainedModel fit_knn(const Matrix& X, std::span<const int> y, std::span<const double> w, const ClassifierSpec& spec);
TrainedModel fit_tree(const Matrix& X, std::span<const int> y, std::span<const double> w, const ClassifierSpec& spec);
TrainedModel fit_forest(const Matrix& X, std::span<const int> y, std::span<const double> w, const ClassifierSpec& spec);
TrainedModel fit_linear_svm(const Matrix& X, std::span<const int> y, std::span<const double> w,
                            const ClassifierSpec& spec);

/// Dispatches on spec.family.
TrainedModel fit(const Matrix& X, std::span<const int> y, std::span<const double> w, const ClassifierSpec& spec);

/// Fits a standardizer on X (when `standardize`), trains on the transformed
/// rows and attaches the standardizer and feature names to the model.
TrainedModel fit_pipeline(const TabularDataset& train, const ClassifierSpec& spec, bool standardize,
                          std::span<const double> weights = {});

std::vector<int> predict(const TrainedModel& model, const Matrix& X);
/// Logistic models only.
std::vector<double> predict_proba(const TrainedModel& model, const Matrix& X);

struct ClassificationScores {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    bool precision_degenerate = false;  // no positive predictions
    bool recall_degenerate = false;     // no positive labels
};

/// Positive class is 1 ("High" risk).
ClassificationScores classification_scores(std::span<const int> y, std::span<const int> y_hat);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& doc);
inline constexpr const char* kModelFormatVersion = "dkfair-model/1";

}  // namespace dkfair
