#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dkfair/common.hpp"

namespace dkfair {

struct GroupDefinition {
    std::string protected_name;
    int privileged_value = 1;  // high-percentage / high-income side
    int favorable_label = 0;   // "Low Risk"
};

enum class MetricName { BalancedAccuracy, StatisticalParityDifference, DisparateImpact, TheilIndex };

const char* to_string(MetricName m) noexcept;

struct FairRange {
    double lo;
    double hi;
    double ideal;

    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

/// Closed intervals: SPD [-0.1, 0.1], DI [0.8, 1.25]. Balanced accuracy and
/// Theil carry only their ideal point (1 and 0) with the full value range.
FairRange fair_range(MetricName m) noexcept;

struct MetricResult {
    MetricName name{};
    double value = 0.0;
    FairRange range{};
    bool within_fair_range = false;
    bool weighted = false;
};

struct GroupRates {
    double privileged = 0.0;
    double unprivileged = 0.0;
};

/// Weighted favorable-outcome rate per group. Empty `weights` means unit
/// weights. Throws EmptyGroup naming the group with no rows.
GroupRates group_favorable_rates(std::span<const int> outcomes, std::span<const int> protected_col,
                                 const GroupDefinition& gd, std::span<const double> weights = {});

/// rate_unprivileged - rate_privileged.
MetricResult statistical_parity_difference(std::span<const int> outcomes, std::span<const int> protected_col,
                                           const GroupDefinition& gd, std::span<const double> weights = {});

/// rate_unprivileged / rate_privileged. A zero privileged rate with a
/// positive unprivileged rate yields +infinity (out of range); 0/0 throws
/// UndefinedMetric.
MetricResult disparate_impact(std::span<const int> outcomes, std::span<const int> protected_col,
                              const GroupDefinition& gd, std::span<const double> weights = {});

/// (TPR + TNR) / 2; throws UndefinedMetric when y holds a single class.
MetricResult balanced_accuracy(std::span<const int> y, std::span<const int> y_hat);

/// Generalized entropy index with alpha = 1 over benefits b = y_hat - y + 1.
MetricResult theil_index(std::span<const int> y, std::span<const int> y_hat);

struct ReweighResult {
    double cell_weights[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // [group][class]; 0 for empty cells
    std::vector<double> instance_weights;
    bool degenerate = false;  // single group or single class: all weights left at 1
};

/// W(g, c) = count(g) * count(c) / (n * count(g, c)).
ReweighResult reweigh(std::span<const int> y, std::span<const int> protected_col);

}  // namespace dkfair
