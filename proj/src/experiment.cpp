#include "dkfair/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dkfair/random.hpp"

namespace dkfair {
namespace {

using nlohmann::json;

constexpr MetricName kMetricOrder[] = {MetricName::BalancedAccuracy, MetricName::StatisticalParityDifference,
                                       MetricName::DisparateImpact, MetricName::TheilIndex};

const std::map<std::string, std::string, std::less<>>& dk_aliases() {
    static const std::map<std::string, std::string, std::less<>> aliases{
        {"income", std::string(kIncomeField)},
        {"age65", std::string(kAge65Field)},
        {"nhw", std::string(kNhWhiteField)},
    };
    return aliases;
}

std::vector<std::string> subset_features(const ExperimentData& data, const DkSubset& subset, bool include_dk) {
    std::vector<std::string> out = data.base_features;
    if (include_dk)
        for (const auto& f : subset.fields) out.push_back(f);
    return out;
}

void check_subset(const ExperimentData& data, const DkSubset& subset) {
    for (const auto& f : subset.fields)
        if (std::find(data.dk_fields.begin(), data.dk_fields.end(), f) == data.dk_fields.end())
            throw Error(ErrorKind::Usage, fmt::format("subset '{}' names unknown domain-knowledge field '{}'",
                                                      subset.label, f));
}

std::vector<DkSubset> dedupe(const std::vector<DkSubset>& subsets, std::vector<std::string>* warnings) {
    std::vector<DkSubset> out;
    for (const auto& s : subsets) {
        auto sorted = s.fields;
        std::sort(sorted.begin(), sorted.end());
        bool dup = std::any_of(out.begin(), out.end(), [&](const DkSubset& o) {
            auto other = o.fields;
            std::sort(other.begin(), other.end());
            return other == sorted;
        });
        if (dup) {
            if (warnings) warnings->push_back(fmt::format("duplicate domain-knowledge subset '{}' ignored", s.label));
            continue;
        }
        out.push_back(s);
    }
    return out;
}

template <typename F>
MetricEntry guarded(MetricName name, F&& compute) {
    MetricEntry e;
    e.name = name;
    try {
        e.result = compute();
    } catch (const Error& err) {
        if (err.kind() != ErrorKind::UndefinedMetric && err.kind() != ErrorKind::EmptyGroup) throw;
        e.note = err.what();
    }
    return e;
}

std::vector<MetricEntry> four_metrics(std::span<const int> y, std::span<const int> y_hat, std::span<const int> g,
                                      const GroupDefinition& gd, std::span<const double> w) {
    return {
        guarded(MetricName::BalancedAccuracy, [&] { return balanced_accuracy(y, y_hat); }),
        guarded(MetricName::StatisticalParityDifference,
                [&] { return statistical_parity_difference(y_hat, g, gd, w); }),
        guarded(MetricName::DisparateImpact, [&] { return disparate_impact(y_hat, g, gd, w); }),
        guarded(MetricName::TheilIndex, [&] { return theil_index(y, y_hat); }),
    };
}

std::vector<MetricEntry> failed_metrics(const std::string& why) {
    std::vector<MetricEntry> out;
    for (MetricName m : kMetricOrder) out.push_back({m, std::nullopt, why});
    return out;
}

struct Partition {
    TabularDataset train;
    TabularDataset test;
};

AuditCell evaluate(const TrainedModel* model, const std::string& failure, const Partition& part,
                   const std::string& attribute, double threshold, bool is_feature,
                   std::span<const double> train_weights, const ExperimentConfig& config) {
    AuditCell cell;
    cell.attribute = attribute;
    cell.threshold = threshold;
    cell.attribute_is_feature = is_feature;
    cell.n_test = part.test.size();
    for (double w : part.test.weights) cell.test_weight_sum += w;

    const GroupDefinition gd{attribute, config.privileged_value, config.favorable_label};
    const auto& g_train = part.train.protected_column(attribute);
    const auto& g_test = part.test.protected_column(attribute);

    cell.label_metrics = {
        guarded(MetricName::StatisticalParityDifference,
                [&] { return statistical_parity_difference(part.train.y, g_train, gd, train_weights); }),
        guarded(MetricName::DisparateImpact,
                [&] { return disparate_impact(part.train.y, g_train, gd, train_weights); }),
    };

    std::vector<Surface> surfaces;
    if (config.evaluation_surface != Surface::Train) surfaces.push_back(Surface::Test);
    if (config.evaluation_surface != Surface::Test) surfaces.push_back(Surface::Train);

    if (!model) {
        cell.notes.push_back(failure);
        for (Surface s : surfaces) cell.surfaces.push_back({s, failed_metrics(failure)});
        return cell;
    }
    const auto yhat_test = predict(*model, part.test.X);
    cell.test_scores = classification_scores(part.test.y, yhat_test);
    for (Surface s : surfaces) {
        if (s == Surface::Test) {
            cell.surfaces.push_back({s, four_metrics(part.test.y, yhat_test, g_test, gd, {})});
        } else {
            const auto yhat_train = predict(*model, part.train.X);
            cell.surfaces.push_back({s, four_metrics(part.train.y, yhat_train, g_train, gd, train_weights)});
        }
    }
    if (!model->fit_info.converged)
        cell.notes.push_back(fmt::format("logistic fit stopped after {} iterations (gradient norm {:.3g})",
                                         model->fit_info.iterations, model->fit_info.gradient_norm));
    return cell;
}

void attach_changes(AuditCell& after, const AuditCell& before) {
    auto link = [](std::vector<MetricEntry>& a, const std::vector<MetricEntry>& b) {
        for (std::size_t k = 0; k < a.size() && k < b.size(); ++k)
            if (a[k].result && b[k].result) a[k].change = a[k].result->value - b[k].result->value;
    };
    for (std::size_t s = 0; s < after.surfaces.size() && s < before.surfaces.size(); ++s)
        link(after.surfaces[s].metrics, before.surfaces[s].metrics);
    link(after.label_metrics, before.label_metrics);
}

std::vector<GridRun> grid_for_subset(const ExperimentData& data, const ExperimentConfig& config,
                                     const DkSubset& subset, const SplitResult& split) {
    const auto audited = audited_fields(subset, data);
    std::vector<std::string> features = data.base_features;
    for (const auto& f : subset.fields) {
        const bool audited_here = std::find(audited.begin(), audited.end(), f) != audited.end();
        if (config.audited_as_feature || !audited_here) features.push_back(f);
    }
    const TabularDataset table = data.full.select_features(features);
    const Partition part{table.subset(split.train_rows), table.subset(split.test_rows)};
    const ClassifierSpec spec = config.resolved_classifier(Family::Logistic);

    auto threshold_of = [&](const std::string& f) {
        auto it = data.binarization.protected_thresholds.find(f);
        return it == data.binarization.protected_thresholds.end() ? std::nan("") : it->second;
    };
    auto is_feature = [&](const std::string& f) {
        return std::find(features.begin(), features.end(), f) != features.end();
    };

    std::vector<GridRun> runs;
    const GridRun* baseline = nullptr;
    if (config.mitigation != MitigationMode::On) {
        GridRun run{subset, false, {}};
        std::optional<TrainedModel> model;
        std::string failure;
        try {
            model = fit_pipeline(part.train, spec, config.standardize);
        } catch (const Error& e) {
            failure = fmt::format("training failed ({}): {}", to_string(e.kind()), e.what());
        }
        for (const auto& attr : audited)
            run.audits.push_back(evaluate(model ? &*model : nullptr, failure, part, attr, threshold_of(attr),
                                          is_feature(attr), {}, config));
        runs.push_back(std::move(run));
        baseline = &runs.back();
    }
    if (config.mitigation != MitigationMode::Off) {
        GridRun run{subset, true, {}};
        for (const auto& attr : audited) {
            ReweighResult rw = reweigh(part.train.y, part.train.protected_column(attr));
            std::optional<TrainedModel> model;
            std::string failure;
            try {
                model = fit_pipeline(part.train, spec, config.standardize, rw.instance_weights);
            } catch (const Error& e) {
                failure = fmt::format("training failed ({}): {}", to_string(e.kind()), e.what());
            }
            AuditCell cell = evaluate(model ? &*model : nullptr, failure, part, attr, threshold_of(attr),
                                      is_feature(attr), rw.instance_weights, config);
            if (baseline) attach_changes(cell, baseline->audits[run.audits.size()]);
            if (rw.degenerate)
                cell.notes.push_back("reweighing degenerate (single group or single class); weights left at 1");
            rw.instance_weights.clear();
            cell.reweighing = std::move(rw);
            run.audits.push_back(std::move(cell));
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

std::string dataset_fingerprint(const TabularDataset& ds) {
    std::string buf;
    for (const auto& f : ds.feature_names) buf += f + ",";
    buf += "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        buf += ds.ids[i];
        for (double v : ds.X.row(i)) buf += fmt::format(",{}", v);
        buf += fmt::format(",{}", ds.y[i]);
        for (const auto& [name, col] : ds.protected_attrs) buf += fmt::format(",{}", col[i]);
        buf += "\n";
    }
    return sha256_hex(buf);
}

json scores_json(const ClassificationScores& s) {
    return {{"accuracy", s.accuracy}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
            {"tp", s.tp},             {"fp", s.fp},               {"tn", s.tn},         {"fn", s.fn},
            {"precision_degenerate", s.precision_degenerate},     {"recall_degenerate", s.recall_degenerate}};
}

json fit_json(const FitInfo& f) {
    return {{"converged", f.converged},
            {"iterations", f.iterations},
            {"final_loss", f.final_loss},
            {"gradient_norm", f.gradient_norm}};
}

json value_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

json metric_json(const MetricEntry& e) {
    json j = {{"name", to_string(e.name)}};
    if (e.result) {
        const auto& r = *e.result;
        j["value"] = value_json(r.value);
        j["fair_range"] = {value_json(r.range.lo), value_json(r.range.hi)};
        j["ideal"] = r.range.ideal;
        j["within_fair_range"] = r.within_fair_range;
        j["weighted"] = r.weighted;
        if (e.change) j["change"] = value_json(*e.change);
    } else {
        j["value"] = nullptr;
        j["undefined"] = e.note;
    }
    return j;
}

std::string metric_text(const MetricEntry& e) {
    if (!e.result) return fmt::format("undefined ({})", e.note);
    return format_value(e.result->value);
}

std::string verdict_text(const MetricEntry& e) {
    if (!e.result) return "undefined";
    switch (e.name) {
        case MetricName::StatisticalParityDifference:
        case MetricName::DisparateImpact: return e.result->within_fair_range ? "fair" : "out of range";
        default: return "-";
    }
}

std::string range_text(const MetricEntry& e) {
    const auto r = fair_range(e.name);
    switch (e.name) {
        case MetricName::StatisticalParityDifference:
        case MetricName::DisparateImpact: return fmt::format("[{}, {}]", format_value(r.lo), format_value(r.hi));
        default: return fmt::format("ideal {}", format_value(r.ideal));
    }
}

std::string change_text(const MetricEntry& e) {
    if (!e.change) return "";
    return (*e.change > 0 ? "+" : "") + format_value(*e.change);
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::vector<DkSubset> default_dk_subsets() {
    return {
        {"none", {}},
        {"income", {std::string(kIncomeField)}},
        {"age65", {std::string(kAge65Field)}},
        {"nhw", {std::string(kNhWhiteField)}},
        {"all", {std::string(kIncomeField), std::string(kAge65Field), std::string(kNhWhiteField)}},
    };
}

DkSubset parse_dk_subset(std::string_view token) {
    std::string t(token);
    if (t == "none" || t.empty()) return {"none", {}};
    if (t == "all") return default_dk_subsets().back();
    DkSubset s{t, {}};
    std::size_t start = 0;
    while (start <= t.size()) {
        const std::size_t end = std::min(t.find('+', start), t.size());
        const std::string part = t.substr(start, end - start);
        auto it = dk_aliases().find(part);
        std::string field = it != dk_aliases().end() ? it->second : part;
        if (std::find(s.fields.begin(), s.fields.end(), field) == s.fields.end()) s.fields.push_back(field);
        start = end + 1;
    }
    return s;
}

const char* to_string(Surface s) noexcept {
    switch (s) {
        case Surface::Test: return "test";
        case Surface::Train: return "train";
        case Surface::Both: return "both";
    }
    return "unknown";
}

MitigationMode mitigation_from_string(std::string_view s) {
    if (s == "off") return MitigationMode::Off;
    if (s == "on") return MitigationMode::On;
    if (s == "both") return MitigationMode::Both;
    throw Error(ErrorKind::Usage, fmt::format("mitigation must be off, on or both, not '{}'", s));
}

Surface surface_from_string(std::string_view s) {
    if (s == "test") return Surface::Test;
    if (s == "train") return Surface::Train;
    if (s == "both") return Surface::Both;
    throw Error(ErrorKind::Usage, fmt::format("evaluation surface must be test, train or both, not '{}'", s));
}

std::uint64_t ExperimentConfig::split_seed() const { return derive_seed(seed, "split"); }

std::uint64_t ExperimentConfig::model_seed(std::string_view family) const {
    return derive_seed(seed, std::string("model:") + std::string(family));
}

ClassifierSpec ExperimentConfig::resolved_classifier(Family family) const {
    ClassifierSpec s = classifier;
    s.family = family;
    s.forest.seed = model_seed("forest");
    s.svm.seed = model_seed("linear_svm");
    return s;
}

ExperimentData prepare_county_data(std::span<const CountyRecord> records, const BinarizationSpec& binarization,
                                   DataProvenance provenance) {
    ExperimentData data;
    data.binarization = binarization;
    data.dk_fields = {std::string(kIncomeField), std::string(kAge65Field), std::string(kNhWhiteField)};
    data.full = build_dataset(records, data.binarization, data.dk_fields);
    for (const auto& [name, v] : records.front().explanatory) data.base_features.push_back(name);
    data.provenance = std::move(provenance);
    data.provenance.rows_used = data.full.size();
    data.provenance.fingerprint = dataset_fingerprint(data.full);
    return data;
}

ExperimentData prepare_synth_data(const SynthSpec& spec) {
    ExperimentData data;
    TabularDataset ds = generate_biased(spec);
    data.base_features = ds.feature_names;
    const auto& g = ds.protected_attrs.at(kSynthProtected);
    Matrix X(ds.size(), ds.X.cols() + 1);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto src = ds.X.row(i);
        std::copy(src.begin(), src.end(), X.row(i).begin());
        X(i, ds.X.cols()) = static_cast<double>(g[i]);
    }
    ds.X = std::move(X);
    ds.feature_names.push_back(kSynthProtected);
    data.dk_fields = {kSynthProtected};
    data.binarization.protected_thresholds = {{kSynthProtected, 1.0}};
    data.binarization.resolved_target_threshold = std::nullopt;
    data.full = std::move(ds);
    data.provenance.source = fmt::format("synthetic n={} delta={} seed={}", spec.n, spec.delta, spec.seed);
    data.provenance.rows_parsed = spec.n;
    data.provenance.rows_used = spec.n;
    data.provenance.fingerprint = dataset_fingerprint(data.full);
    return data;
}

SplitResult experiment_split(const ExperimentData& data, const ExperimentConfig& config) {
    if (data.full.size() == 0) throw Error(ErrorKind::Domain, "experiment dataset is empty");
    return split_indices(data.full.y, config.test_fraction, config.split_seed(), config.stratified);
}

std::vector<AlgorithmRow> compare_algorithms(const ExperimentData& data, const ExperimentConfig& config) {
    const auto split = experiment_split(data, config);
    const TabularDataset table = data.full.select_features(data.base_features);
    const TabularDataset train = table.subset(split.train_rows), test = table.subset(split.test_rows);
    std::vector<AlgorithmRow> rows;
    for (Family f : kAllFamilies) {
        auto model = fit_pipeline(train, config.resolved_classifier(f), config.standardize);
        rows.push_back({f, classification_scores(test.y, predict(model, test.X)), model.fit_info});
    }
    return rows;
}

std::vector<AblationRow> run_ablation(const ExperimentData& data, const ExperimentConfig& config,
                                      std::vector<std::string>* warnings) {
    const auto split = experiment_split(data, config);
    std::vector<AblationRow> rows;
    for (const auto& subset : dedupe(config.dk_subsets, warnings)) {
        check_subset(data, subset);
        const TabularDataset table = data.full.select_features(subset_features(data, subset, true));
        const TabularDataset train = table.subset(split.train_rows), test = table.subset(split.test_rows);
        auto model = fit_pipeline(train, config.resolved_classifier(Family::Logistic), config.standardize);
        rows.push_back({subset, table.feature_names.size(), classification_scores(test.y, predict(model, test.X)),
                        model.fit_info});
    }
    return rows;
}

std::vector<std::string> audited_fields(const DkSubset& subset, const ExperimentData& data) {
    return subset.fields.empty() ? data.dk_fields : subset.fields;
}

std::vector<GridRun> run_mitigation_grid(const ExperimentData& data, const ExperimentConfig& config,
                                         std::vector<std::string>* warnings) {
    const auto split = experiment_split(data, config);
    const auto subsets = dedupe(config.dk_subsets, warnings);
    for (const auto& s : subsets) check_subset(data, s);

    std::vector<std::vector<GridRun>> slots(subsets.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(config.jobs, static_cast<unsigned>(subsets.size())));
    if (workers == 1) {
        for (std::size_t k = 0; k < subsets.size(); ++k) slots[k] = grid_for_subset(data, config, subsets[k], split);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(subsets.size());
        {
            std::vector<std::jthread> pool;
            for (unsigned t = 0; t < workers; ++t) {
                pool.emplace_back([&] {
                    for (std::size_t k = next++; k < subsets.size(); k = next++) {
                        try {
                            slots[k] = grid_for_subset(data, config, subsets[k], split);
                        } catch (...) {
                            errors[k] = std::current_exception();
                        }
                    }
                });
            }
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    std::vector<GridRun> runs;
    for (auto& slot : slots)
        for (auto& r : slot) runs.push_back(std::move(r));
    return runs;
}

nlohmann::json config_to_json(const ExperimentConfig& config, const BinarizationSpec& resolved) {
    json subsets = json::array();
    for (const auto& s : config.dk_subsets) subsets.push_back({{"label", s.label}, {"fields", s.fields}});
    json thresholds = json::object();
    for (const auto& [k, v] : resolved.protected_thresholds) thresholds[k] = v;
    const auto& c = config.classifier;
    return {
        {"seed", config.seed},
        {"split_seed", config.split_seed()},
        {"test_fraction", config.test_fraction},
        {"stratified", config.stratified},
        {"standardize", config.standardize},
        {"audited_as_feature", config.audited_as_feature},
        {"privileged_value", config.privileged_value},
        {"favorable_label", config.favorable_label},
        {"mitigation", config.mitigation == MitigationMode::Off  ? "off"
                       : config.mitigation == MitigationMode::On ? "on"
                                                                  : "both"},
        {"evaluation_surface", to_string(config.evaluation_surface)},
        {"dk_subsets", subsets},
        {"binarization",
         {{"target_percentile", resolved.target_percentile},
          {"resolved_target_threshold",
           resolved.resolved_target_threshold ? json(*resolved.resolved_target_threshold) : json(nullptr)},
          {"protected_thresholds", thresholds},
          {"ge_maps_to_one", resolved.ge_maps_to_one}}},
        {"classifiers",
         {{"logistic", {{"l2_lambda", c.logistic.l2_lambda}, {"tol", c.logistic.tol}, {"max_iter", c.logistic.max_iter}}},
          {"knn", {{"k", c.knn.k}}},
          {"tree", {{"max_depth", c.tree.max_depth}, {"min_samples_leaf", c.tree.min_samples_leaf}}},
          {"forest",
           {{"n_trees", c.forest.n_trees},
            {"max_depth", c.forest.max_depth},
            {"min_samples_leaf", c.forest.min_samples_leaf},
            {"bootstrap", c.forest.bootstrap},
            {"max_features", c.forest.max_features},
            {"seed", config.model_seed("forest")}}},
          {"linear_svm", {{"c", c.svm.c}, {"epochs", c.svm.epochs}, {"seed", config.model_seed("linear_svm")}}}}},
    };
}

FairnessReport run_experiment(const ExperimentData& data, const ExperimentConfig& config) {
    FairnessReport r;
    r.config_echo = config_to_json(config, data.binarization);
    r.provenance = data.provenance;
    const auto split = experiment_split(data, config);
    r.n_train = split.train_rows.size();
    r.n_test = split.test_rows.size();
    r.algorithms = compare_algorithms(data, config);
    r.ablation = run_ablation(data, config, &r.warnings);
    r.grid = run_mitigation_grid(data, config, nullptr);
    return r;
}

ReportFormat report_format_from_string(std::string_view s) {
    if (s == "md") return ReportFormat::Markdown;
    if (s == "struct") return ReportFormat::Struct;
    if (s == "table") return ReportFormat::Table;
    throw Error(ErrorKind::Usage, fmt::format("format must be md, struct or table, not '{}'", s));
}

std::string format_value(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // also folds -0
    return fmt::format("{:.6g}", v);
}

std::string emit_report(const FairnessReport& report, ReportFormat format) {
    if (format == ReportFormat::Struct) {
        json doc;
        doc["format"] = "dkfair-report/1";
        doc["config"] = report.config_echo;
        const auto& p = report.provenance;
        doc["provenance"] = {{"fingerprint", p.fingerprint}, {"source", p.source},
                             {"rows_parsed", p.rows_parsed}, {"rows_unmatched_dk", p.rows_unmatched_dk},
                             {"rows_dropped", p.rows_dropped}, {"rows_used", p.rows_used},
                             {"n_train", report.n_train},    {"n_test", report.n_test}};
        json algs = json::array();
        for (const auto& a : report.algorithms)
            algs.push_back({{"family", to_string(a.family)}, {"scores", scores_json(a.scores)}, {"fit", fit_json(a.fit_info)}});
        doc["algorithms"] = algs;
        json abl = json::array();
        for (const auto& a : report.ablation)
            abl.push_back({{"subset", a.subset.label},
                           {"fields", a.subset.fields},
                           {"n_features", a.n_features},
                           {"scores", scores_json(a.scores)},
                           {"fit", fit_json(a.fit_info)}});
        doc["ablation"] = abl;
        json grid = json::array();
        for (const auto& run : report.grid) {
            json audits = json::array();
            for (const auto& c : run.audits) {
                json a = {{"attribute", c.attribute},
                          {"threshold", value_json(c.threshold)},
                          {"attribute_is_feature", c.attribute_is_feature},
                          {"n_test", c.n_test},
                          {"test_weight_sum", c.test_weight_sum},
                          {"notes", c.notes}};
                a["test_scores"] = c.test_scores ? scores_json(*c.test_scores) : json(nullptr);
                json surfaces = json::object();
                for (const auto& s : c.surfaces) {
                    json ms = json::array();
                    for (const auto& m : s.metrics) ms.push_back(metric_json(m));
                    surfaces[to_string(s.surface)] = ms;
                }
                a["metrics"] = surfaces;
                json lm = json::array();
                for (const auto& m : c.label_metrics) lm.push_back(metric_json(m));
                a["label_metrics"] = lm;
                if (c.reweighing) {
                    const auto& w = c.reweighing->cell_weights;
                    a["reweighing"] = {{"cell_weights",
                                        {{"g0_y0", w[0][0]}, {"g0_y1", w[0][1]}, {"g1_y0", w[1][0]}, {"g1_y1", w[1][1]}}},
                                       {"degenerate", c.reweighing->degenerate}};
                }
                audits.push_back(a);
            }
            grid.push_back({{"subset", run.subset.label},
                            {"fields", run.subset.fields},
                            {"mitigation", run.mitigated ? "reweighed" : "baseline"},
                            {"audits", audits}});
        }
        doc["grid"] = grid;
        doc["warnings"] = report.warnings;
        return doc.dump(2) + "\n";
    }

    if (format == ReportFormat::Table) return report_tables(report).at("fairness_metrics.csv");

    std::string md = "# Fairness report\n\n## Configuration\n\n";
    const auto& cfg = report.config_echo;
    md += fmt::format("- seed: {} (split seed {})\n", cfg.at("seed").get<std::uint64_t>(),
                      cfg.at("split_seed").get<std::uint64_t>());
    md += fmt::format("- test fraction: {}, stratified: {}, standardize: {}\n",
                      format_value(cfg.at("test_fraction").get<double>()), cfg.at("stratified").get<bool>(),
                      cfg.at("standardize").get<bool>());
    const auto& b = cfg.at("binarization");
    md += fmt::format("- target percentile: {}, resolved target threshold: {}\n",
                      format_value(b.at("target_percentile").get<double>()),
                      b.at("resolved_target_threshold").is_null()
                          ? std::string("n/a")
                          : format_value(b.at("resolved_target_threshold").get<double>()));
    for (const auto& [k, v] : b.at("protected_thresholds").items())
        md += fmt::format("- protected threshold {}: {}\n", k, format_value(v.get<double>()));
    md += fmt::format("- privileged value: {}, favorable label: {}\n", cfg.at("privileged_value").get<int>(),
                      cfg.at("favorable_label").get<int>());
    md += fmt::format("- classifiers: {}\n", cfg.at("classifiers").dump());

    const auto& p = report.provenance;
    md += "\n## Data\n\n";
    md += fmt::format("- source: {}\n- fingerprint: {}\n", p.source.empty() ? "n/a" : p.source, p.fingerprint);
    md += fmt::format("- rows parsed: {}, unmatched domain knowledge: {}, dropped incomplete: {}, used: {}\n",
                      p.rows_parsed, p.rows_unmatched_dk, p.rows_dropped, p.rows_used);
    md += fmt::format("- train rows: {}, test rows: {}\n", report.n_train, report.n_test);

    if (!report.algorithms.empty()) {
        md += "\n## Algorithm comparison (no domain knowledge)\n\n| family | accuracy | precision | recall | f1 |\n|---|---|---|---|---|\n";
        for (const auto& a : report.algorithms)
            md += fmt::format("| {} | {} | {} | {} | {} |\n", to_string(a.family), format_value(a.scores.accuracy),
                              format_value(a.scores.precision), format_value(a.scores.recall), format_value(a.scores.f1));
    }
    if (!report.ablation.empty()) {
        md += "\n## Domain-knowledge ablation (logistic regression)\n\n| subset | features | accuracy | precision | recall | f1 |\n|---|---|---|---|---|---|\n";
        for (const auto& a : report.ablation)
            md += fmt::format("| {} | {} | {} | {} | {} | {} |\n", a.subset.label, a.n_features,
                              format_value(a.scores.accuracy), format_value(a.scores.precision),
                              format_value(a.scores.recall), format_value(a.scores.f1));
    }
    if (!report.grid.empty()) {
        md += "\n## Bias mitigation grid\n";
        for (const auto& run : report.grid) {
            md += fmt::format("\n### subset {} / {}\n", run.subset.label, run.mitigated ? "reweighed" : "baseline");
            for (const auto& c : run.audits) {
                md += fmt::format("\nAudited attribute `{}` (threshold {}, {}model feature)\n\n", c.attribute,
                                  format_value(c.threshold), c.attribute_is_feature ? "" : "not a ");
                md += "| surface | metric | value | fair range | verdict | change |\n|---|---|---|---|---|---|\n";
                for (const auto& s : c.surfaces)
                    for (const auto& m : s.metrics)
                        md += fmt::format("| {} | {} | {} | {} | {} | {} |\n", to_string(s.surface),
                                          to_string(m.name), metric_text(m), range_text(m), verdict_text(m),
                                          change_text(m));
                for (const auto& m : c.label_metrics)
                    md += fmt::format("| train labels | {} | {} | {} | {} | {} |\n", to_string(m.name),
                                      metric_text(m), range_text(m), verdict_text(m), change_text(m));
                for (const auto& n : c.notes) md += fmt::format("\nNote: {}\n", n);
            }
        }
    }
    if (!report.warnings.empty()) {
        md += "\n## Warnings\n\n";
        for (const auto& w : report.warnings) md += "- " + w + "\n";
    }
    return md;
}

std::map<std::string, std::string> report_tables(const FairnessReport& report) {
    std::map<std::string, std::string> out;
    std::string algs = "family,accuracy,precision,recall,f1,tp,fp,tn,fn\n";
    for (const auto& a : report.algorithms)
        algs += fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(a.family), format_value(a.scores.accuracy),
                            format_value(a.scores.precision), format_value(a.scores.recall),
                            format_value(a.scores.f1), a.scores.tp, a.scores.fp, a.scores.tn, a.scores.fn);
    out["algorithms.csv"] = algs;

    std::string abl = "subset,n_features,accuracy,precision,recall,f1\n";
    for (const auto& a : report.ablation)
        abl += fmt::format("{},{},{},{},{},{}\n", csv_cell(a.subset.label), a.n_features,
                           format_value(a.scores.accuracy), format_value(a.scores.precision),
                           format_value(a.scores.recall), format_value(a.scores.f1));
    out["ablation.csv"] = abl;

    std::string met = "subset,mitigation,attribute,surface,metric,value,fair_range,verdict,change\n";
    for (const auto& run : report.grid)
        for (const auto& c : run.audits) {
            auto row = [&](const std::string& surface, const MetricEntry& m) {
                met += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_cell(run.subset.label),
                                   run.mitigated ? "reweighed" : "baseline", c.attribute, surface, to_string(m.name),
                                   csv_cell(metric_text(m)), csv_cell(range_text(m)), csv_cell(verdict_text(m)),
                                   change_text(m));
            };
            for (const auto& s : c.surfaces)
                for (const auto& m : s.metrics) row(to_string(s.surface), m);
            for (const auto& m : c.label_metrics) row("train_labels", m);
        }
    out["fairness_metrics.csv"] = met;
    return out;
}

}  // namespace dkfair
