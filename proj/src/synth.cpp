#include "dkfair/synth.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dkfair/random.hpp"

namespace dkfair {

void SynthSpec::validate() const {
    if (!(delta >= 0.0 && delta < 0.5)) throw Error(ErrorKind::Usage, "synth: delta must lie in [0, 0.5)");
    if (n < 4) throw Error(ErrorKind::Usage, "synth: n must be at least 4");
    if (!std::isfinite(class_mean)) throw Error(ErrorKind::Usage, "synth: class_mean must be finite");
}

TabularDataset generate_biased(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    TabularDataset ds;
    for (std::size_t k = 0; k < spec.d_informative; ++k) ds.feature_names.push_back(fmt::format("inf_{}", k));
    for (std::size_t k = 0; k < spec.d_noise; ++k) ds.feature_names.push_back(fmt::format("noise_{}", k));
    const std::size_t d = ds.feature_names.size();
    ds.X = Matrix(spec.n, d);
    auto& g = ds.protected_attrs[kSynthProtected];
    g.resize(spec.n);
    ds.y.resize(spec.n);

    for (std::size_t i = 0; i < spec.n; ++i) {
        g[i] = rng.bernoulli(0.5) ? 1 : 0;
        const double p1 = g[i] == 1 ? 0.5 + spec.delta : 0.5 - spec.delta;
        ds.y[i] = rng.bernoulli(p1) ? 1 : 0;
        const double centre = ds.y[i] == 1 ? spec.class_mean : -spec.class_mean;
        for (std::size_t k = 0; k < spec.d_informative; ++k) ds.X(i, k) = centre + rng.normal();
        for (std::size_t k = spec.d_informative; k < d; ++k) ds.X(i, k) = rng.normal();
        ds.ids.push_back(fmt::format("s{:06}", i));
    }
    ds.weights.assign(spec.n, 1.0);
    return ds;
}

ExpectedLabelMetrics expected_label_metrics(const SynthSpec& spec, const GroupDefinition& gd) {
    spec.validate();
    auto rate = [&](int group) {
        const double p1 = group == 1 ? 0.5 + spec.delta : 0.5 - spec.delta;
        return gd.favorable_label == 1 ? p1 : 1.0 - p1;
    };
    const double priv = rate(gd.privileged_value), unpriv = rate(1 - gd.privileged_value);
    return {unpriv - priv, unpriv / priv};
}

std::vector<CountyRecord> generate_county_like(const TableSchema& county_schema, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    const auto clamp = [](double v, double lo, double hi) { return std::clamp(v, lo, hi); };
    const auto round1 = [](double v) { return std::round(v * 10.0) / 10.0; };

    std::vector<const ColumnSpec*> explanatory;
    for (const auto& c : county_schema.columns)
        if (c.role == ColumnRole::Explanatory) explanatory.push_back(&c);

    std::vector<CountyRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        CountyRecord r;
        r.fips = fmt::format("{:05}", 1001 + i);
        r.state = fmt::format("S{:02}", i % 48);
        r.county = fmt::format("County {}", i + 1);

        const double latent = rng.normal();  // shared rural/affluence factor
        const double nhw = clamp(78.0 + 16.0 * latent + 8.0 * rng.normal(), 1.0, 99.0);
        const double age65 = clamp(19.5 + 0.09 * (nhw - 78.0) + 4.0 * rng.normal(), 5.0, 50.0);
        const double income = clamp(29000.0 + 60.0 * (nhw - 78.0) + 6500.0 * rng.normal(), 12000.0, 90000.0);
        r.pct_nh_white = round1(nhw);
        r.pct_age_65_plus = round1(age65);
        r.per_capita_income = std::round(income);

        for (std::size_t k = 0; k < explanatory.size(); ++k) {
            const auto& col = *explanatory[k];
            const double loading = (k % 3 == 0 ? 0.6 : k % 3 == 1 ? -0.4 : 0.2);
            const double z = loading * latent + rng.normal();
            double v = 0.0;
            switch (col.unit) {
                case UnitClass::Percent: v = round1(clamp(25.0 + 3.0 * static_cast<double>(k % 5) + 8.0 * z, 0.0, 100.0)); break;
                case UnitClass::Index: v = round1(clamp(5.0 + 1.5 * z, 0.0, 10.0)); break;
                case UnitClass::Usd: v = std::round(clamp(55000.0 + 12000.0 * z, 15000.0, 160000.0)); break;
                case UnitClass::Count: v = std::round(clamp(250.0 + 120.0 * z, 0.0, 5000.0)); break;
                default: v = round1(z); break;
            }
            r.explanatory.emplace_back(col.field, v);
        }
        // Risk rises with the share of non-Hispanic white residents and with
        // distance of income from its centre.
        const double target = 20.0 + 0.12 * (nhw - 78.0) + 0.00012 * std::abs(income - 30000.0) +
                              0.8 * (r.explanatory.empty() ? 0.0 : (*r.explanatory.front().second - 25.0) / 8.0) +
                              6.0 * rng.normal();
        r.alcohol_impaired_death_pct = round1(clamp(target, 0.0, 80.0));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace dkfair
