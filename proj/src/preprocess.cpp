#include "dkfair/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "dkfair/random.hpp"

namespace dkfair {

std::size_t TabularDataset::feature_index(std::string_view name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) throw Error(ErrorKind::Schema, "no feature named '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - feature_names.begin());
}

const std::vector<int>& TabularDataset::protected_column(std::string_view name) const {
    auto it = protected_attrs.find(std::string(name));
    if (it == protected_attrs.end())
        throw Error(ErrorKind::Schema, "no protected column named '" + std::string(name) + "'");
    return it->second;
}

void TabularDataset::validate() const {
    const std::size_t n = y.size();
    if (X.rows() != n || weights.size() != n || ids.size() != n)
        throw Error(ErrorKind::Domain, "dataset columns disagree on the number of rows");
    if (X.cols() != feature_names.size())
        throw Error(ErrorKind::Domain, "feature name count does not match the feature matrix");
    for (double v : X.data())
        if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "feature matrix contains a non-finite value");
    for (int v : y)
        if (v != 0 && v != 1) throw Error(ErrorKind::Domain, "labels must be 0 or 1");
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorKind::Domain, "instance weights must be positive");
    for (const auto& [name, col] : protected_attrs) {
        if (col.size() != n) throw Error(ErrorKind::Domain, "protected column '" + name + "' has the wrong length");
        for (int v : col)
            if (v != 0 && v != 1) throw Error(ErrorKind::Domain, "protected column '" + name + "' is not binary");
    }
}

TabularDataset TabularDataset::subset(std::span<const std::size_t> rows) const {
    TabularDataset out;
    out.feature_names = feature_names;
    out.X = X.select_rows(rows);
    out.y = gather<int>(y, rows);
    for (const auto& [name, col] : protected_attrs) out.protected_attrs[name] = gather<int>(col, rows);
    out.weights = gather<double>(weights, rows);
    out.ids = gather<std::string>(ids, rows);
    return out;
}

TabularDataset TabularDataset::select_features(std::span<const std::string> names) const {
    std::vector<std::size_t> cols;
    for (const auto& n : names) cols.push_back(feature_index(n));
    TabularDataset out = *this;
    out.feature_names.assign(names.begin(), names.end());
    out.X = X.select_cols(cols);
    return out;
}

double percentile(std::span<const double> values, double pct) {
    if (values.empty()) throw Error(ErrorKind::Domain, "percentile of an empty sample");
    if (!(pct >= 0.0 && pct <= 100.0)) throw Error(ErrorKind::Domain, "percentile must lie in [0, 100]");
    std::vector<double> sorted(values.begin(), values.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "percentile input contains a non-finite value");
    std::sort(sorted.begin(), sorted.end());
    const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

TargetBinarization binarize_target(std::span<const double> values, double pct) {
    if (values.empty()) throw Error(ErrorKind::Domain, "cannot binarize an empty target column");
    if (!(pct > 0.0 && pct < 100.0)) throw Error(ErrorKind::Domain, "target percentile must lie in (0, 100)");
    TargetBinarization out;
    out.threshold = percentile(values, pct);
    out.labels.reserve(values.size());
    for (double v : values) out.labels.push_back(v >= out.threshold ? 1 : 0);
    return out;
}

std::vector<int> binarize_protected(std::span<const double> values, double threshold, bool ge_maps_to_one) {
    if (std::isnan(threshold)) throw Error(ErrorKind::Domain, "protected threshold is NaN");
    std::vector<int> out;
    out.reserve(values.size());
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "protected attribute contains a non-finite value");
        const bool at_or_above = v >= threshold;
        out.push_back(at_or_above == ge_maps_to_one ? 1 : 0);
    }
    return out;
}

StandardizationParams fit_standardizer(const Matrix& X_train) {
    if (X_train.rows() == 0) throw Error(ErrorKind::Domain, "cannot fit a standardizer on zero rows");
    const std::size_t n = X_train.rows(), d = X_train.cols();
    StandardizationParams p{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += X_train(i, j);
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (X_train(i, j) - mean) * (X_train(i, j) - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (!std::isfinite(mean) || !std::isfinite(sd))
            throw Error(ErrorKind::Domain, fmt::format("feature column {} is not finite", j));
        // Relative floor: rounding noise on a constant column must not blow up.
        // Constant columns centre on their exact value so they map to 0 exactly.
        const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
        p.mean[j] = constant ? X_train(0, j) : mean;
        p.scale[j] = constant ? 1.0 : sd;
    }
    return p;
}

Matrix apply_standardizer(const StandardizationParams& params, const Matrix& X) {
    if (X.cols() != params.mean.size())
        throw Error(ErrorKind::Domain, "standardizer width does not match the feature matrix");
    Matrix out = X;
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = (X(i, j) - params.mean[j]) / params.scale[j];
    return out;
}

SplitResult split_indices(std::span<const int> labels, double test_fraction, std::uint64_t seed, bool stratified) {
    const std::size_t n = labels.size();
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error(ErrorKind::Usage, "test fraction must lie strictly between 0 and 1");
    if (n < 2) throw Error(ErrorKind::Domain, "need at least two rows to split");

    Rng rng(seed);
    const auto total_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    SplitResult out;

    if (!stratified) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(std::span(idx));
        out.test_rows.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(total_test));
        out.train_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(total_test), idx.end());
    } else {
        std::vector<std::size_t> by_class[2];
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::Domain, "stratified split needs 0/1 labels");
            by_class[labels[i]].push_back(i);
        }
        for (int c = 0; c < 2; ++c)
            if (by_class[c].empty())
                throw Error(ErrorKind::Domain, fmt::format("stratified split: class {} has no rows", c));

        // Largest-remainder allocation of the test rows across classes.
        std::size_t take[2];
        double rem[2];
        std::size_t allocated = 0;
        for (int c = 0; c < 2; ++c) {
            const double share = static_cast<double>(total_test) * static_cast<double>(by_class[c].size()) /
                                 static_cast<double>(n);
            take[c] = static_cast<std::size_t>(std::floor(share));
            rem[c] = share - static_cast<double>(take[c]);
            allocated += take[c];
        }
        while (allocated < total_test) {
            int c = rem[1] > rem[0] ? 1 : 0;
            if (take[c] >= by_class[c].size()) c = 1 - c;
            ++take[c];
            rem[c] = -1.0;
            ++allocated;
        }
        for (int c = 0; c < 2; ++c) {
            auto& rows = by_class[c];
            rng.shuffle(std::span(rows));
            out.test_rows.insert(out.test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take[c]));
            out.train_rows.insert(out.train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(take[c]), rows.end());
        }
    }
    std::sort(out.train_rows.begin(), out.train_rows.end());
    std::sort(out.test_rows.begin(), out.test_rows.end());
    return out;
}

std::pair<TabularDataset, TabularDataset> split_train_test(const TabularDataset& ds, double test_fraction,
                                                           std::uint64_t seed, bool stratified) {
    auto idx = split_indices(ds.y, test_fraction, seed, stratified);
    return {ds.subset(idx.train_rows), ds.subset(idx.test_rows)};
}

std::vector<double> field_values(std::span<const CountyRecord> records, std::string_view field) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        auto v = r.value(field);
        if (!v) throw Error(ErrorKind::Domain, fmt::format("county {} is missing '{}'", r.fips, field));
        out.push_back(*v);
    }
    return out;
}

TabularDataset build_dataset(std::span<const CountyRecord> records, BinarizationSpec& spec,
                             std::span<const std::string> dk_features) {
    if (records.empty()) throw Error(ErrorKind::Domain, "no county records to build a dataset from");
    TabularDataset ds;
    for (const auto& [name, v] : records.front().explanatory) ds.feature_names.push_back(name);
    for (const auto& f : dk_features) ds.feature_names.push_back(f);

    const auto target = field_values(records, kTargetField);
    auto bin = binarize_target(target, spec.target_percentile);
    spec.resolved_target_threshold = bin.threshold;
    ds.y = std::move(bin.labels);

    ds.X = Matrix(records.size(), ds.feature_names.size());
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
        const auto col = field_values(records, ds.feature_names[j]);
        for (std::size_t i = 0; i < col.size(); ++i) ds.X(i, j) = col[i];
    }

    for (std::string_view field : {kIncomeField, kAge65Field, kNhWhiteField}) {
        const auto col = field_values(records, field);
        auto [it, fresh] = spec.protected_thresholds.try_emplace(std::string(field), 0.0);
        if (fresh) it->second = percentile(col, 50.0);
        if (!std::isfinite(it->second))
            throw Error(ErrorKind::Domain, fmt::format("protected threshold for '{}' is not finite", field));
        ds.protected_attrs[std::string(field)] = binarize_protected(col, it->second, spec.ge_maps_to_one);
    }

    ds.weights.assign(records.size(), 1.0);
    for (const auto& r : records) ds.ids.push_back(r.fips);
    ds.validate();
    return ds;
}

}  // namespace dkfair
