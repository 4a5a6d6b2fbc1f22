#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "dkfair/preprocess.hpp"
#include "dkfair/random.hpp"
#include "dkfair/synth.hpp"
#include "support.hpp"

using namespace dkfair;

namespace {

// Independent percentile oracle: rank r = p(n-1)/100 over the sorted sample,
// interpolated as a weighted mean of its two neighbours.
double percentile_oracle(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double r = p * static_cast<double>(v.size() - 1) / 100.0;
    const auto below = static_cast<std::size_t>(std::floor(r));
    const auto above = static_cast<std::size_t>(std::ceil(r));
    const double frac = r - std::floor(r);
    return (1.0 - frac) * v[below] + frac * v[above];
}

}  // namespace

TEST_CASE("target binarization at the 30th percentile") {
    const std::vector<double> v{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    const auto b = binarize_target(v, 30);
    CHECK(b.threshold == doctest::Approx(37.0).epsilon(1e-15));
    CHECK(b.labels == std::vector<int>{0, 0, 0, 1, 1, 1, 1, 1, 1, 1});

    const std::vector<double> flat(7, 12.5);
    const auto f = binarize_target(flat, 30);
    CHECK(f.threshold == 12.5);
    CHECK(std::all_of(f.labels.begin(), f.labels.end(), [](int l) { return l == 1; }));

    CHECK_THROWS_AS(binarize_target(std::vector<double>{}, 30), Error);
    CHECK_THROWS_AS(binarize_target(std::vector<double>{1.0, std::nan("")}, 30), Error);
}

TEST_CASE("percentile agrees with the oracle and with reference values") {
    // Reference values from a widely used numerical library's default rule.
    const std::vector<double> v{34.29, 2.11, 22.93, 16.03, 16.83, 18.49, 5.86, 18.38, 13.94, 43.26, 21.58};
    CHECK(percentile(v, 0) == doctest::Approx(2.11));
    CHECK(percentile(v, 30) == doctest::Approx(16.03));
    CHECK(percentile(v, 50) == doctest::Approx(18.38));
    CHECK(percentile(v, 99.5) == doctest::Approx(42.8115));
    CHECK(percentile(v, 100) == doctest::Approx(43.26));

    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(1 + rng.below(60));
        for (auto& e : x) e = std::round(rng.normal() * 100.0) / 10.0;
        const double p = 100.0 * rng.uniform();
        CHECK(percentile(x, p) == doctest::Approx(percentile_oracle(x, p)).epsilon(1e-12));
    }
}

// With interpolated cutoffs the bracket holds up to one rank (1/n) of slack.
TEST_CASE("label counts bracket the percentile") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(2 + rng.below(100));
        for (auto& e : x) e = static_cast<double>(rng.below(20));  // plenty of ties
        const double p = 1.0 + 98.0 * rng.uniform();
        const auto b = binarize_target(x, p);
        const double n = static_cast<double>(x.size());
        const auto low = static_cast<double>(std::count(b.labels.begin(), b.labels.end(), 0));
        const auto ties = static_cast<double>(std::count(x.begin(), x.end(), b.threshold));
        CHECK(low / n <= p / 100.0 + 1.0 / n + 1e-12);
        CHECK(p / 100.0 <= (low + ties) / n + 1.0 / n + 1e-12);
    }
}

TEST_CASE("protected binarization") {
    const std::vector<double> v{59.3, 59.2999, 80.0, 10.0};
    CHECK(binarize_protected(v, 59.3) == std::vector<int>{1, 0, 1, 0});
    CHECK(binarize_protected(v, 59.3, false) == std::vector<int>{0, 1, 0, 1});
    CHECK(binarize_protected(v, -1e300) == std::vector<int>{1, 1, 1, 1});
    CHECK_THROWS_AS(binarize_protected(std::vector<double>{std::numeric_limits<double>::infinity()}, 1.0), Error);

    Rng rng(3);
    std::vector<double> x(200);
    for (auto& e : x) e = rng.normal();
    const auto out = binarize_protected(x, 0.1);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
            if (x[i] <= x[j]) CHECK(out[i] <= out[j]);
}

TEST_CASE("standardizer") {
    Matrix X(3, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        X(i, 0) = static_cast<double>(i + 1);
        X(i, 1) = 5.0;
    }
    const auto p = fit_standardizer(X);
    CHECK(p.mean[0] == doctest::Approx(2.0));
    CHECK(p.scale[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(p.scale[1] == 1.0);
    const auto Z = apply_standardizer(p, X);
    for (std::size_t i = 0; i < 3; ++i) CHECK(Z(i, 1) == 0.0);

    Rng rng(4);
    Matrix R(50, 4);
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t j = 0; j < 4; ++j) R(i, j) = 1000.0 * static_cast<double>(j) + rng.normal() * (j + 1.0);
    const auto Zr = apply_standardizer(fit_standardizer(R), R);
    for (std::size_t j = 0; j < 4; ++j) {
        const auto col = Zr.column(j);
        const double mean = std::accumulate(col.begin(), col.end(), 0.0) / 50.0;
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(var / 50.0 == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(fit_standardizer(Matrix()), Error);
}

TEST_CASE("stratified split sizes and cover") {
    const std::vector<int> balanced{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const auto s = split_indices(balanced, 0.3, 42, true);
    CHECK(s.test_rows.size() == 3);
    std::size_t ones = 0;
    for (auto i : s.test_rows) ones += static_cast<std::size_t>(balanced[i]);
    CHECK((ones == 1 || ones == 2));

    std::vector<int> labels(3107);
    Rng rng(11);
    for (auto& l : labels) l = rng.bernoulli(0.7) ? 1 : 0;
    for (bool strat : {true, false}) {
        const auto big = split_indices(labels, 0.3, 7, strat);
        CHECK(big.test_rows.size() == 932);
        std::set<std::size_t> all(big.train_rows.begin(), big.train_rows.end());
        for (auto i : big.test_rows) CHECK(all.insert(i).second);
        CHECK(all.size() == labels.size());
        CHECK(*all.rbegin() == labels.size() - 1);
    }
    const auto a = split_indices(labels, 0.3, 99), b = split_indices(labels, 0.3, 99);
    CHECK(a.test_rows == b.test_rows);
    CHECK(a.train_rows == b.train_rows);
    CHECK(split_indices(labels, 0.3, 100).test_rows != a.test_rows);

    CHECK_THROWS_AS(split_indices(labels, 0.0, 1), Error);
    CHECK_THROWS_AS(split_indices(labels, 1.0, 1), Error);
    CHECK_THROWS_AS(split_indices(std::vector<int>{1, 1, 1, 1}, 0.5, 1, true), Error);
    CHECK_NOTHROW(split_indices(std::vector<int>{1, 1, 1, 1}, 0.5, 1, false));
}

TEST_CASE("split carries protected columns, weights and ids") {
    SynthSpec spec;
    spec.n = 60;
    auto ds = generate_biased(spec);
    for (std::size_t i = 0; i < ds.size(); ++i) ds.weights[i] = 1.0 + static_cast<double>(i);
    const auto [train, test] = split_train_test(ds, 0.25, 3);
    CHECK(train.size() + test.size() == 60);
    CHECK(test.size() == 15);
    for (const auto* part : {&train, &test}) {
        CHECK_NOTHROW(part->validate());
        for (std::size_t i = 0; i < part->size(); ++i) {
            const auto orig = static_cast<std::size_t>(std::stoul(part->ids[i].substr(1)));
            CHECK(part->weights[i] == 1.0 + static_cast<double>(orig));
            CHECK(part->y[i] == ds.y[orig]);
            CHECK(part->protected_column(kSynthProtected)[i] == ds.protected_column(kSynthProtected)[orig]);
        }
    }
}

TEST_CASE("build_dataset resolves thresholds and orders features") {
    const auto schema = testing::shipped_schema();
    const auto recs = generate_county_like(schema.county, 101, 5);
    BinarizationSpec spec;
    const std::vector<std::string> dk{std::string(kIncomeField), std::string(kNhWhiteField)};
    const auto ds = build_dataset(recs, spec, dk);
    CHECK_NOTHROW(ds.validate());
    CHECK(ds.feature_names.size() == 22);
    CHECK(ds.feature_names[20] == kIncomeField);
    CHECK(ds.feature_names[21] == kNhWhiteField);
    CHECK(ds.protected_attrs.size() == 3);
    CHECK(spec.protected_thresholds.at(std::string(kNhWhiteField)) == 59.3);
    const auto income = field_values(recs, kIncomeField);
    CHECK(spec.protected_thresholds.at(std::string(kIncomeField)) == percentile(income, 50));
    CHECK(*spec.resolved_target_threshold == percentile(field_values(recs, kTargetField), 30));
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(ds.protected_column(kNhWhiteField)[i] == (*recs[i].pct_nh_white >= 59.3 ? 1 : 0));
}
