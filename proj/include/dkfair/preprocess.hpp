#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dkfair/common.hpp"
#include "dkfair/ingest.hpp"

namespace dkfair {

struct BinarizationSpec {
    double target_percentile = 30.0;
    /// Filled in by build_dataset from the observed target column.
    std::optional<double> resolved_target_threshold;
    /// Cutoffs per protected field. Fields absent here default to the column
    /// median when the dataset is built; the resolved value is written back.
    std::map<std::string, double> protected_thresholds{{std::string(kNhWhiteField), 59.3}};
    bool ge_maps_to_one = true;
};

/// Numeric features, binary labels, binary protected columns and instance
/// weights for one set of rows.
struct TabularDataset {
    std::vector<std::string> feature_names;
    Matrix X;
    std::vector<int> y;
    std::map<std::string, std::vector<int>> protected_attrs;
    std::vector<double> weights;
    std::vector<std::string> ids;

    std::size_t size() const noexcept { return y.size(); }
    std::size_t feature_index(std::string_view name) const;
    const std::vector<int>& protected_column(std::string_view name) const;

    /// Throws Domain when shapes disagree or a value breaks the invariants.
    void validate() const;

    TabularDataset subset(std::span<const std::size_t> rows) const;
    TabularDataset select_features(std::span<const std::string> names) const;
};

struct StandardizationParams {
    std::vector<double> mean;
    std::vector<double> scale;
};

/// Linear-interpolation percentile between closest ranks (the "linear" rule:
/// position p/100 * (n - 1) in the sorted sample).
double percentile(std::span<const double> values, double pct);

struct TargetBinarization {
    std::vector<int> labels;
    double threshold = 0.0;
};

/// Labels 1 ("High") at or above the percentile cutoff, 0 ("Low") below it.
TargetBinarization binarize_target(std::span<const double> values, double pct);

std::vector<int> binarize_protected(std::span<const double> values, double threshold, bool ge_maps_to_one = true);

/// Population convention: scale = sqrt(mean squared deviation); zero-variance
/// columns get scale 1 so they map to 0.
StandardizationParams fit_standardizer(const Matrix& X_train);
Matrix apply_standardizer(const StandardizationParams& params, const Matrix& X);

struct SplitResult {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

/// Row indices of a seeded train/test split. Stratified splits allocate the
/// test size round(n * fraction) across classes by largest remainder, so the
/// per-class counts are the rounded class shares and the total is exact.
SplitResult split_indices(std::span<const int> labels, double test_fraction, std::uint64_t seed,
                          bool stratified = true);

std::pair<TabularDataset, TabularDataset> split_train_test(const TabularDataset& ds, double test_fraction,
                                                           std::uint64_t seed, bool stratified = true);

/// Builds the modelling table from complete county records. Features are the
/// explanatory fields followed by `dk_features`; every DK field is binarized
/// into a protected column. Resolved thresholds are written into `spec`.
TabularDataset build_dataset(std::span<const CountyRecord> records, BinarizationSpec& spec,
                             std::span<const std::string> dk_features);

std::vector<double> field_values(std::span<const CountyRecord> records, std::string_view field);

}  // namespace dkfair
