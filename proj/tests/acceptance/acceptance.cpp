// Acceptance run: one line per criterion. Hard criteria decide the exit code;
// the reproduction checks need the published county tables and only report.
//
//   acceptance [county.csv [domain_knowledge.csv]]
//
// The tables can also come from DKFAIR_COUNTY / DKFAIR_DK; DKFAIR_SCHEMA
// overrides the shipped schema.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "dkfair/config.hpp"
#include "dkfair/experiment.hpp"
#include "dkfair/explore.hpp"
#include "dkfair/fairness.hpp"
#include "dkfair/models.hpp"
#include "dkfair/random.hpp"
#include "dkfair/synth.hpp"

using namespace dkfair;
namespace fs = std::filesystem;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
    Outcome outcome;
    std::string detail;
};

Verdict fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Verdict verdict(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

struct Tally {
    int hard_failures = 0;
    int soft_failures = 0;
};

void run(Tally& tally, int id, bool hard, const char* title, const std::function<Verdict()>& body) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        v = body();
    } catch (const std::exception& e) {
        v = fail(fmt::format("exception: {}", e.what()));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Skip ? "SKIP" : "FAIL";
    fmt::print("[{}] {:>2} {}{} ({:.2f}s): {}\n", tag, id, title, hard ? "" : " (best effort)", secs, v.detail);
    std::fflush(stdout);
    if (v.outcome == Outcome::Fail) ++(hard ? tally.hard_failures : tally.soft_failures);
}

const GroupDefinition kG{"g", 1, 0};

// ---------------------------------------------------------------- hard suite

Verdict reweighing_exactness() {
    Rng rng(20240101);
    double worst_spd = 0.0, worst_sum = 0.0;
    int datasets = 0;
    while (datasets < 200) {
        SynthSpec s;
        s.n = 20 + rng.below(1981);
        s.delta = 0.4 * rng.uniform();
        s.seed = rng.next();
        const auto ds = generate_biased(s);
        const auto& g = ds.protected_column("g");
        std::size_t cells[2][2] = {};
        for (std::size_t i = 0; i < ds.size(); ++i) ++cells[g[i]][ds.y[i]];
        if (!cells[0][0] || !cells[0][1] || !cells[1][0] || !cells[1][1]) continue;
        ++datasets;
        const auto r = reweigh(ds.y, g);
        const double sum = std::accumulate(r.instance_weights.begin(), r.instance_weights.end(), 0.0);
        worst_sum = std::max(worst_sum, std::abs(sum - static_cast<double>(s.n)));
        worst_spd = std::max(worst_spd, std::abs(statistical_parity_difference(ds.y, g, kG, r.instance_weights).value));
    }
    return verdict(worst_spd < 1e-9 && worst_sum < 1e-9,
                   fmt::format("200 datasets, max |SPD| {:.3g}, max |sum w - n| {:.3g}", worst_spd, worst_sum));
}

Verdict reweigh_point() {
    const std::vector<int> g{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
    const std::vector<int> y{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
    const double w = reweigh(y, g).cell_weights[1][1];
    return verdict(w == 0.5, fmt::format("W(1,1) = {}", w));
}

Verdict theil_fixtures() {
    const std::vector<int> y{1, 0, 1, 1};
    const double perfect = theil_index(y, y).value;
    const double split = theil_index(std::vector<int>{1, 0}, std::vector<int>{0, 1}).value;
    const double mixed = theil_index(std::vector<int>{0, 0}, std::vector<int>{0, 1}).value;
    const bool ok = perfect == 0.0 && std::abs(split - std::numbers::ln2) < 1e-12 && std::abs(mixed - 0.0566) < 1e-4;
    return verdict(ok, fmt::format("perfect {}, benefits 0/2 {:.15f}, benefits 1/2 {:.6f}", perfect, split, mixed));
}

Verdict fair_ranges() {
    const auto spd = fair_range(MetricName::StatisticalParityDifference);
    const auto di = fair_range(MetricName::DisparateImpact);
    const bool ok = spd.contains(0.1) && spd.contains(-0.1) && di.contains(0.8) && di.contains(1.25) &&
                    !spd.contains(0.101) && !di.contains(0.799) && !di.contains(1.251);
    return verdict(ok, "SPD 0.1 and DI 0.8/1.25 inside; SPD 0.101 and DI 0.799/1.251 outside");
}

Verdict gradient_check() {
    Rng rng(5);
    const std::size_t n = 60, d = 4;
    Matrix X(n, d);
    std::vector<int> y(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) X(i, j) = rng.normal();
        y[i] = rng.bernoulli(0.5) ? 1 : 0;
        w[i] = 0.2 + 2.0 * rng.uniform();
    }
    const double lambda = 0.3;
    double worst = 0.0;
    for (int p = 0; p < 5; ++p) {
        std::vector<double> theta(d + 1);
        for (auto& t : theta) t = 2.0 * rng.normal();
        const auto g = logistic_gradient(X, y, w, theta, lambda);
        double diff = 0.0, norm = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
            auto up = theta, down = theta;
            up[k] += h;
            down[k] -= h;
            const double fd = (logistic_loss(X, y, w, up, lambda) - logistic_loss(X, y, w, down, lambda)) / (2.0 * h);
            diff += (g[k] - fd) * (g[k] - fd);
            norm += fd * fd;
        }
        worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
    }
    return verdict(worst < 1e-4, fmt::format("max relative error {:.3g} over 5 points", worst));
}

Verdict classifier_sanity() {
    SynthSpec s;
    s.n = 400;
    s.delta = 0.0;
    s.class_mean = 2.0;
    const auto data = prepare_synth_data(s);
    ExperimentConfig cfg;
    const auto split = experiment_split(data, cfg);
    const auto train = data.full.subset(split.train_rows), test = data.full.subset(split.test_rows);
    std::string detail;
    bool ok = true;
    for (Family f : kAllFamilies) {
        const auto model = fit_pipeline(train, cfg.resolved_classifier(f), true);
        const double acc = classification_scores(test.y, predict(model, test.X)).accuracy;
        ok = ok && acc >= 0.95;
        detail += fmt::format("{}{} {:.3f}", detail.empty() ? "" : ", ", to_string(f), acc);
    }
    return verdict(ok, detail);
}

const MetricEntry& find_metric(const AuditCell& cell, Surface surface, MetricName name) {
    for (const auto& s : cell.surfaces)
        if (s.surface == surface)
            for (const auto& m : s.metrics)
                if (m.name == name) return m;
    throw std::runtime_error(fmt::format("no {} on the {} surface", to_string(name), to_string(surface)));
}

const AuditCell& find_cell(const std::vector<GridRun>& grid, const std::string& subset, bool mitigated,
                           std::string_view attribute) {
    for (const auto& run : grid)
        if (run.subset.label == subset && run.mitigated == mitigated)
            for (const auto& cell : run.audits)
                if (cell.attribute == attribute) return cell;
    throw std::runtime_error(fmt::format("grid has no cell {}/{}/{}", subset, mitigated, attribute));
}

double value_of(const MetricEntry& m) {
    if (!m.result) throw std::runtime_error(fmt::format("{} undefined: {}", to_string(m.name), m.note));
    return m.result->value;
}

Verdict mitigation_efficacy() {
    SynthSpec s;
    s.n = 5000;
    s.delta = 0.2;
    s.seed = 42;
    const auto data = prepare_synth_data(s);
    ExperimentConfig cfg;
    cfg.seed = 42;
    cfg.dk_subsets = {DkSubset{"g", {"g"}}};
    const auto grid = run_mitigation_grid(data, cfg);
    const auto& before = find_cell(grid, "g", false, "g");
    const auto& after = find_cell(grid, "g", true, "g");

    auto pick = [&](Surface surf) {
        struct {
            double spd0, spd1, ba0, ba1;
        } r{value_of(find_metric(before, surf, MetricName::StatisticalParityDifference)),
            value_of(find_metric(after, surf, MetricName::StatisticalParityDifference)),
            value_of(find_metric(before, surf, MetricName::BalancedAccuracy)),
            value_of(find_metric(after, surf, MetricName::BalancedAccuracy))};
        return r;
    };
    // Judged on the training surface, where the reweighing weights define the
    // population; the held-out numbers are shown for comparison.
    const auto tr = pick(Surface::Train);
    const auto te = pick(Surface::Test);
    const bool ok = std::abs(tr.spd0) > 0.1 && std::abs(tr.spd1) <= 0.5 * std::abs(tr.spd0) && tr.ba0 - tr.ba1 <= 0.10;
    return verdict(ok, fmt::format("train SPD {:.4f} -> {:.4f}, BA {:.4f} -> {:.4f}; "
                                   "test SPD {:.4f} -> {:.4f}, BA {:.4f} -> {:.4f}",
                                   tr.spd0, tr.spd1, tr.ba0, tr.ba1, te.spd0, te.spd1, te.ba0, te.ba1));
}

Verdict sign_consistency() {
    Rng rng(8);
    int checked = 0;
    bool ok = true;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 10 + rng.below(200);
        std::vector<int> out(n), g(n);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = rng.bernoulli(0.5) ? 1 : 0;
            g[i] = rng.bernoulli(0.3 + 0.4 * rng.uniform()) ? 1 : 0;
        }
        // Both groups present with at least one favorable outcome each, so DI is finite and nonzero.
        g[0] = 0, g[1] = 1, out[0] = 0, out[1] = 0;
        const GroupDefinition gd{"g", 1, 0}, swapped{"g", 0, 0};
        const double spd = statistical_parity_difference(out, g, gd).value;
        const double di = disparate_impact(out, g, gd).value;
        const double back = disparate_impact(out, g, swapped).value;
        ok = ok && ((spd > 0) == (di > 1)) && ((spd < 0) == (di < 1)) && std::abs(back * di - 1.0) < 1e-12;
        ++checked;
    }
    return verdict(ok, fmt::format("{} assignments", checked));
}

fs::path schema_path() {
    if (const char* s = std::getenv("DKFAIR_SCHEMA")) return s;
    return fs::path(DKFAIR_SOURCE_DIR) / "data/schema/county_health_v1.json";
}

ExperimentData county_like(std::size_t n, std::uint64_t seed) {
    const auto schema = load_schema(schema_path());
    const auto records = generate_county_like(schema.county, n, seed);
    return prepare_county_data(records, BinarizationSpec{});
}

Verdict determinism() {
    const auto data = county_like(500, 21);
    ExperimentConfig cfg;
    const auto a = run_experiment(data, cfg);
    const auto b = run_experiment(data, cfg);
    cfg.jobs = 3;
    const auto c = run_experiment(data, cfg);
    bool ok = true;
    std::string hashes;
    for (auto f : {ReportFormat::Markdown, ReportFormat::Struct, ReportFormat::Table}) {
        const auto ra = emit_report(a, f);
        ok = ok && ra == emit_report(b, f) && ra == emit_report(c, f);
        hashes += sha256_hex(ra).substr(0, 12) + " ";
    }
    return verdict(ok, fmt::format("3 runs (jobs 1, 1, 3) agree byte for byte; report digests {}", hashes));
}

// ---------------------------------------------------------- reproduction suite

struct RealData {
    LoadedRecords loaded;
    ExperimentData data;
};

std::optional<RealData> load_real(int argc, char** argv) {
    std::optional<fs::path> county, dk;
    if (argc > 1) county = argv[1];
    else if (const char* c = std::getenv("DKFAIR_COUNTY")) county = c;
    if (argc > 2) dk = argv[2];
    else if (const char* d = std::getenv("DKFAIR_DK")) dk = d;
    if (!county) return std::nullopt;
    RealData real{load_county_records(schema_path(), *county, dk), {}};
    real.data = prepare_county_data(real.loaded.records, BinarizationSpec{}, real.loaded.provenance);
    return real;
}

Verdict near(double got, double want, double tol, const std::string& what) {
    return verdict(std::abs(got - want) <= tol, fmt::format("{} = {:.4f}, expected {} +- {}", what, got, want, tol));
}

Verdict combine(const std::vector<Verdict>& parts) {
    bool ok = true;
    std::string detail;
    for (const auto& p : parts) {
        ok = ok && p.outcome == Outcome::Pass;
        detail += fmt::format("{}{}{}", detail.empty() ? "" : "; ", p.outcome == Outcome::Pass ? "" : "MISS ", p.detail);
    }
    return verdict(ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
    Tally tally;
    run(tally, 1, true, "reweighing makes labels independent of the group", reweighing_exactness);
    run(tally, 2, true, "reweigh cell weight on the ten-row fixture", reweigh_point);
    run(tally, 3, true, "Theil index fixtures", theil_fixtures);
    run(tally, 4, true, "fair-range boundaries", fair_ranges);
    run(tally, 5, true, "logistic gradient against finite differences", gradient_check);
    run(tally, 6, true, "all classifiers separate the easy fixture", classifier_sanity);
    run(tally, 7, true, "reweighed retraining shrinks parity gap", mitigation_efficacy);
    run(tally, 8, true, "SPD/DI sign agreement and DI reciprocal", sign_consistency);
    run(tally, 9, true, "repeated grid runs are byte-identical", determinism);

    std::optional<RealData> real;
    std::string skip_reason = "county tables not provided (pass paths or set DKFAIR_COUNTY / DKFAIR_DK)";
    try {
        real = load_real(argc, argv);
    } catch (const std::exception& e) {
        skip_reason = fmt::format("county tables unreadable: {}", e.what());
    }
    auto with_data = [&](const std::function<Verdict(const RealData&)>& body) -> std::function<Verdict()> {
        return [&, body] { return real ? body(*real) : Verdict{Outcome::Skip, skip_reason}; };
    };

    ExperimentConfig cfg;
    std::vector<GridRun> grid;
    auto ensure_grid = [&](const RealData& r) -> const std::vector<GridRun>& {
        if (grid.empty()) {
            auto c = cfg;
            c.dk_subsets = {parse_dk_subset("income"), parse_dk_subset("nhw"), parse_dk_subset("all")};
            grid = run_mitigation_grid(r.data, c);
        }
        return grid;
    };

    run(tally, 10, false, "30th-percentile target threshold", with_data([](const RealData& r) {
            return near(*r.data.binarization.resolved_target_threshold, 21.0, 0.5, "threshold");
        }));
    run(tally, 11, false, "Pearson correlations", with_data([](const RealData& r) {
            const auto& rec = r.loaded.records;
            auto corr = [&](std::string_view a, std::string_view b) {
                return pearson(field_values(rec, a), field_values(rec, b));
            };
            return combine({near(corr(kNhWhiteField, kAge65Field), 0.36, 0.03, "nhw~age65"),
                            near(corr("physically_inactive", kTargetField), -0.15, 0.03, "inactive~target"),
                            near(corr("uninsured_adults", kTargetField), -0.15, 0.03, "uninsured~target"),
                            near(corr(kNhWhiteField, "high_school_completion"), 0.47, 0.03, "nhw~high school")});
        }));
    run(tally, 12, false, "classifier accuracy spread", with_data([&](const RealData& r) {
            double lo = 1.0, hi = 0.0;
            std::string detail;
            for (const auto& row : compare_algorithms(r.data, cfg)) {
                lo = std::min(lo, row.scores.accuracy);
                hi = std::max(hi, row.scores.accuracy);
                detail += fmt::format(" {} {:.3f}", to_string(row.family), row.scores.accuracy);
            }
            return verdict(hi - lo <= 0.15, fmt::format("spread {:.4f} <= 0.15;{}", hi - lo, detail));
        }));
    run(tally, 13, false, "accuracy with and without all DK fields", with_data([&](const RealData& r) {
            auto c = cfg;
            c.dk_subsets = {parse_dk_subset("none"), parse_dk_subset("all")};
            const auto rows = run_ablation(r.data, c);
            const double gap = std::abs(rows.at(1).scores.accuracy - rows.at(0).scores.accuracy);
            return verdict(gap <= 0.05, fmt::format("none {:.4f}, all {:.4f}, gap {:.4f} <= 0.05",
                                                    rows.at(0).scores.accuracy, rows.at(1).scores.accuracy, gap));
        }));
    run(tally, 14, false, "statistical parity difference, test surface", with_data([&](const RealData& r) {
            const auto& g = ensure_grid(r);
            auto spd = [&](const char* subset, bool mit) {
                return value_of(find_metric(find_cell(g, subset, mit, kIncomeField), Surface::Test,
                                            MetricName::StatisticalParityDifference));
            };
            const double alone0 = spd("income", false), alone1 = spd("income", true);
            return combine({near(spd("all", false), 0.090, 0.05, "all-DK income SPD before"),
                            near(spd("all", true), 0.079, 0.05, "all-DK income SPD after"),
                            verdict(alone0 > 0.13 && alone1 > 0.13,
                                    fmt::format("income-only SPD {:.4f} / {:.4f} > 0.13", alone0, alone1))});
        }));
    run(tally, 15, false, "disparate impact, test surface", with_data([&](const RealData& r) {
            const auto& g = ensure_grid(r);
            auto di = [&](const char* subset, bool mit) {
                return value_of(find_metric(find_cell(g, subset, mit, kIncomeField), Surface::Test,
                                            MetricName::DisparateImpact));
            };
            return combine({near(di("income", false), 1.89, 0.25, "income-only DI before"),
                            near(di("income", true), 0.81, 0.15, "income-only DI after"),
                            near(di("all", true), 1.35, 0.25, "all-DK income DI after")});
        }));
    run(tally, 16, false, "Theil index after reweighing, nhw", with_data([&](const RealData& r) {
            const double t = value_of(find_metric(find_cell(ensure_grid(r), "nhw", true, kNhWhiteField),
                                                  Surface::Train, MetricName::TheilIndex));
            return verdict(t <= 0.02, fmt::format("training-surface Theil {:.4f} <= 0.02", t));
        }));
    run(tally, 17, false, "full grid on about 3k rows in under 60 s", [&] {
        // Timed on the real tables when present, otherwise on county-shaped synthetic rows.
        const auto data = real ? real->data : county_like(3107, 17);
        const auto t0 = std::chrono::steady_clock::now();
        const auto report = run_experiment(data, cfg);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return verdict(secs < 60.0, fmt::format("{} rows ({}), single thread, {:.1f}s", data.full.size(),
                                                real ? "county tables" : "synthetic", secs));
    });

    fmt::print("hard failures: {}, best-effort misses: {}\n", tally.hard_failures, tally.soft_failures);
    return tally.hard_failures == 0 ? 0 : 1;
}
