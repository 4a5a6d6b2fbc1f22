#include "dkfair/fairness.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "dkfair/common.hpp"

namespace dkfair {
namespace {

void check_binary(std::span<const int> v, const char* what) {
    for (int x : v)
        if (x != 0 && x != 1) throw Error(ErrorKind::Domain, fmt::format("{} must contain only 0 and 1", what));
}

MetricResult make(MetricName name, double value, bool weighted) {
    MetricResult r;
    r.name = name;
    r.value = value;
    r.range = fair_range(name);
    r.within_fair_range = r.range.contains(value);
    r.weighted = weighted;
    return r;
}

}  // namespace

const char* to_string(MetricName m) noexcept {
    switch (m) {
        case MetricName::BalancedAccuracy: return "balanced_accuracy";
        case MetricName::StatisticalParityDifference: return "statistical_parity_difference";
        case MetricName::DisparateImpact: return "disparate_impact";
        case MetricName::TheilIndex: return "theil_index";
    }
    return "unknown";
}

FairRange fair_range(MetricName m) noexcept {
    switch (m) {
        case MetricName::StatisticalParityDifference: return {-0.1, 0.1, 0.0};
        case MetricName::DisparateImpact: return {0.8, 1.25, 1.0};
        case MetricName::BalancedAccuracy: return {0.0, 1.0, 1.0};
        case MetricName::TheilIndex: return {0.0, std::numeric_limits<double>::infinity(), 0.0};
    }
    return {0.0, 0.0, 0.0};
}

GroupRates group_favorable_rates(std::span<const int> outcomes, std::span<const int> protected_col,
                                 const GroupDefinition& gd, std::span<const double> weights) {
    if (outcomes.size() != protected_col.size() || (!weights.empty() && weights.size() != outcomes.size()))
        throw Error(ErrorKind::Domain, "outcomes, protected column and weights differ in length");
    if (outcomes.empty()) throw Error(ErrorKind::Domain, "no instances to compute group rates over");
    check_binary(outcomes, "outcomes");
    check_binary(protected_col, "protected column");

    double fav[2] = {0.0, 0.0}, total[2] = {0.0, 0.0};
    std::size_t count[2] = {0, 0};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        const int g = protected_col[i];
        total[g] += w;
        ++count[g];
        if (outcomes[i] == gd.favorable_label) fav[g] += w;
    }
    const int priv = gd.privileged_value, unpriv = 1 - gd.privileged_value;
    for (int g : {priv, unpriv}) {
        if (count[g] == 0 || total[g] <= 0.0) {
            throw Error(ErrorKind::EmptyGroup,
                        fmt::format("{} group ({} = {}) has no instances", g == priv ? "privileged" : "unprivileged",
                                    gd.protected_name.empty() ? "protected" : gd.protected_name, g));
        }
    }
    return {fav[priv] / total[priv], fav[unpriv] / total[unpriv]};
}

MetricResult statistical_parity_difference(std::span<const int> outcomes, std::span<const int> protected_col,
                                           const GroupDefinition& gd, std::span<const double> weights) {
    const auto r = group_favorable_rates(outcomes, protected_col, gd, weights);
    return make(MetricName::StatisticalParityDifference, r.unprivileged - r.privileged, !weights.empty());
}

MetricResult disparate_impact(std::span<const int> outcomes, std::span<const int> protected_col,
                              const GroupDefinition& gd, std::span<const double> weights) {
    const auto r = group_favorable_rates(outcomes, protected_col, gd, weights);
    if (r.privileged == 0.0) {
        if (r.unprivileged == 0.0)
            throw Error(ErrorKind::UndefinedMetric, "disparate impact undefined: neither group has a favorable outcome");
        return make(MetricName::DisparateImpact, std::numeric_limits<double>::infinity(), !weights.empty());
    }
    return make(MetricName::DisparateImpact, r.unprivileged / r.privileged, !weights.empty());
}

MetricResult balanced_accuracy(std::span<const int> y, std::span<const int> y_hat) {
    if (y.size() != y_hat.size()) throw Error(ErrorKind::Domain, "labels and predictions differ in length");
    check_binary(y, "labels");
    check_binary(y_hat, "predictions");
    std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 1) {
            ++pos;
            tp += static_cast<std::size_t>(y_hat[i] == 1);
        } else {
            ++neg;
            tn += static_cast<std::size_t>(y_hat[i] == 0);
        }
    }
    if (pos == 0 || neg == 0)
        throw Error(ErrorKind::UndefinedMetric, "balanced accuracy undefined: labels contain a single class");
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    const double tnr = static_cast<double>(tn) / static_cast<double>(neg);
    return make(MetricName::BalancedAccuracy, 0.5 * (tpr + tnr), false);
}

MetricResult theil_index(std::span<const int> y, std::span<const int> y_hat) {
    if (y.size() != y_hat.size()) throw Error(ErrorKind::Domain, "labels and predictions differ in length");
    if (y.empty()) throw Error(ErrorKind::Domain, "theil index of an empty sample");
    check_binary(y, "labels");
    check_binary(y_hat, "predictions");
    const auto n = static_cast<double>(y.size());
    double mu = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) mu += static_cast<double>(y_hat[i] - y[i] + 1);
    mu /= n;
    if (mu == 0.0) throw Error(ErrorKind::UndefinedMetric, "theil index undefined: every benefit is zero");
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double ratio = static_cast<double>(y_hat[i] - y[i] + 1) / mu;
        if (ratio > 0.0) sum += ratio * std::log(ratio);  // 0 log 0 := 0
    }
    return make(MetricName::TheilIndex, sum / n, false);
}

ReweighResult reweigh(std::span<const int> y, std::span<const int> protected_col) {
    if (y.size() != protected_col.size()) throw Error(ErrorKind::Domain, "labels and protected column differ in length");
    check_binary(y, "labels");
    check_binary(protected_col, "protected column");
    const std::size_t n = y.size();
    ReweighResult out;
    out.instance_weights.assign(n, 1.0);

    std::size_t group[2] = {0, 0}, cls[2] = {0, 0}, cell[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < n; ++i) {
        ++group[protected_col[i]];
        ++cls[y[i]];
        ++cell[protected_col[i]][y[i]];
    }
    if (group[0] == 0 || group[1] == 0 || cls[0] == 0 || cls[1] == 0) {
        out.degenerate = true;
        for (int g = 0; g < 2; ++g)
            for (int c = 0; c < 2; ++c) out.cell_weights[g][c] = cell[g][c] ? 1.0 : 0.0;
        return out;
    }
    for (int g = 0; g < 2; ++g)
        for (int c = 0; c < 2; ++c)
            if (cell[g][c])
                out.cell_weights[g][c] = static_cast<double>(group[g]) * static_cast<double>(cls[c]) /
                                         (static_cast<double>(n) * static_cast<double>(cell[g][c]));
    for (std::size_t i = 0; i < n; ++i) out.instance_weights[i] = out.cell_weights[protected_col[i]][y[i]];
    return out;
}

}  // namespace dkfair
