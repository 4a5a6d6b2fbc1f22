// Command-line front end: ingest, explore, train, audit, mitigate, grid, synth.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dkfair/config.hpp"
#include "dkfair/explore.hpp"
#include "dkfair/experiment.hpp"
#include "dkfair/ingest.hpp"
#include "dkfair/synth.hpp"

#ifndef DKFAIR_DEFAULT_SCHEMA
#define DKFAIR_DEFAULT_SCHEMA "data/schema/county_health_v1.json"
#endif

namespace fs = std::filesystem;
using namespace dkfair;

namespace {

constexpr int kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3;

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Usage: return kExitUsage;
        case ErrorKind::Numeric:
        case ErrorKind::UndefinedMetric: return kExitNumeric;
        default: return kExitData;
    }
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "md";
    std::string schema;
    std::string county;
    std::string dk;
    std::optional<unsigned> jobs;
};

void add_common(CLI::App* app, Common& c, bool data = true) {
    app->add_option("--config", c.config, "INI run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Master seed (overrides the config)");
    app->add_option("--out", c.out, "Output file or directory");
    if (!data) return;
    app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"md", "struct", "table"}));
    app->add_option("--schema", c.schema, "Schema JSON");
    app->add_option("--county", c.county, "County table CSV");
    app->add_option("--dk", c.dk, "Domain-knowledge table CSV");
    app->add_option("--jobs", c.jobs, "Worker threads for the grid");
}

RunConfig resolve(const Common& c) {
    RunConfig rc = c.config.empty() ? RunConfig{} : load_run_config(c.config);
    if (c.seed) rc.experiment.seed = *c.seed;
    if (c.jobs) rc.experiment.jobs = *c.jobs;
    if (!c.schema.empty()) rc.schema = c.schema;
    if (!c.county.empty()) rc.county_table = c.county;
    if (!c.dk.empty()) rc.domain_knowledge_table = c.dk;
    if (!rc.schema) rc.schema = fs::path(DKFAIR_DEFAULT_SCHEMA);
    return rc;
}

const fs::path& require_county(const RunConfig& rc) {
    if (!rc.county_table) throw Error(ErrorKind::Usage, "no county table given (--county or [data] county_table)");
    return *rc.county_table;
}

ExperimentData load(const RunConfig& rc) {
    return load_experiment_data(*rc.schema, require_county(rc), rc.domain_knowledge_table,
                                rc.experiment.binarization);
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
    const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size();
    std::fclose(f);
    if (!ok) throw Error(ErrorKind::Io, "short write to " + path.string());
}

void emit(const std::string& out, const std::string& content) {
    if (out.empty() || out == "-") std::cout << content;
    else write_file(out, content);
}

const char* report_name(ReportFormat f) {
    switch (f) {
        case ReportFormat::Markdown: return "report.md";
        case ReportFormat::Struct: return "report.json";
        case ReportFormat::Table: return "fairness_metrics.csv";
    }
    return "report";
}

/// Report to stdout, or report + tables + config echo + manifest into a directory.
void publish(const FairnessReport& report, const Common& c) {
    const ReportFormat fmt_kind = report_format_from_string(c.format);
    const std::string text = emit_report(report, fmt_kind);
    if (c.out.empty() || c.out == "-") {
        std::cout << text;
        return;
    }
    auto files = report_tables(report);
    files[report_name(fmt_kind)] = text;
    files["config.json"] = report.config_echo.dump(2) + "\n";
    write_artifacts(c.out, files);
    std::cerr << fmt::format("wrote {} files and manifest.json to {}\n", files.size(), c.out);
}

int cmd_ingest(const Common& c) {
    const RunConfig rc = resolve(c);
    const SchemaBundle schema = load_schema(*rc.schema);
    auto loaded = load_county_records(*rc.schema, require_county(rc), rc.domain_knowledge_table);
    const auto& p = loaded.provenance;
    std::cerr << fmt::format("parsed {} rows, {} without domain knowledge, dropped {} incomplete, kept {}\n",
                             p.rows_parsed, p.rows_unmatched_dk, p.rows_dropped, p.rows_used);
    emit(c.out, serialize_county_table(loaded.records, schema.county));
    return kExitOk;
}

int cmd_explore(const Common& c) {
    const RunConfig rc = resolve(c);
    const SchemaBundle schema = load_schema(*rc.schema);
    auto loaded = load_county_records(*rc.schema, require_county(rc), rc.domain_knowledge_table);
    if (c.out.empty()) throw Error(ErrorKind::Usage, "explore needs --out DIR");
    const auto& recs = loaded.records;

    std::vector<NamedColumn> cols;
    for (const auto& f : schema.county.explanatory_fields()) cols.push_back({f, field_values(recs, f)});
    for (auto f : {kIncomeField, kAge65Field, kNhWhiteField, kTargetField})
        cols.push_back({std::string(f), field_values(recs, f)});

    std::map<std::string, std::string> files;
    files["correlation.csv"] = correlation_csv(correlation_matrix(cols));

    BinarizationSpec spec = rc.experiment.binarization;
    const auto data = prepare_county_data(recs, spec);
    const auto target = field_values(recs, kTargetField);
    for (const auto& f : data.dk_fields) {
        const auto& g = data.full.protected_column(f);
        const auto d1 = density_1d(target, g);
        const std::string title = fmt::format("{} by {} group", kTargetField, f);
        files[fmt::format("density_{}.csv", f)] = density_1d_csv(d1);
        files[fmt::format("histogram_{}.svg", f)] = histogram_svg(d1, title);
        files[fmt::format("smoothed_{}.svg", f)] = smoothed_svg(d1, title);
        const auto d2 = density_2d(field_values(recs, f), target);
        files[fmt::format("density2d_{}.csv", f)] = density_2d_csv(d2);
        files[fmt::format("density2d_{}.svg", f)] = density_2d_svg(d2, fmt::format("{} vs {}", kTargetField, f));
    }
    write_artifacts(c.out, files);
    std::cerr << fmt::format("wrote {} files and manifest.json to {}\n", files.size(), c.out);
    return kExitOk;
}

int cmd_train(const Common& c, const std::string& family, const std::string& subset_token) {
    const RunConfig rc = resolve(c);
    const ExperimentData data = load(rc);
    const auto& cfg = rc.experiment;
    const DkSubset subset = parse_dk_subset(subset_token);
    std::vector<std::string> features = data.base_features;
    features.insert(features.end(), subset.fields.begin(), subset.fields.end());
    const auto split = experiment_split(data, cfg);
    const auto table = data.full.select_features(features);
    const auto train = table.subset(split.train_rows), test = table.subset(split.test_rows);
    const auto model = fit_pipeline(train, cfg.resolved_classifier(family_from_string(family)), cfg.standardize);
    const auto s = classification_scores(test.y, predict(model, test.X));
    std::cerr << fmt::format("{} on subset {}: accuracy {} precision {} recall {} f1 {}\n", family, subset.label,
                             format_value(s.accuracy), format_value(s.precision), format_value(s.recall),
                             format_value(s.f1));
    if (!c.out.empty()) write_file(c.out, model_to_json(model).dump(2) + "\n");
    return kExitOk;
}

int cmd_fairness(const Common& c, MitigationMode mode, const std::vector<std::string>& subsets) {
    RunConfig rc = resolve(c);
    rc.experiment.mitigation = mode;
    if (!subsets.empty()) {
        rc.experiment.dk_subsets.clear();
        for (const auto& s : subsets) rc.experiment.dk_subsets.push_back(parse_dk_subset(s));
    }
    const ExperimentData data = load(rc);
    FairnessReport report;
    report.config_echo = config_to_json(rc.experiment, data.binarization);
    report.provenance = data.provenance;
    const auto split = experiment_split(data, rc.experiment);
    report.n_train = split.train_rows.size();
    report.n_test = split.test_rows.size();
    report.grid = run_mitigation_grid(data, rc.experiment, &report.warnings);
    publish(report, c);
    return kExitOk;
}

int cmd_grid(const Common& c) {
    const RunConfig rc = resolve(c);
    const ExperimentData data = load(rc);
    publish(run_experiment(data, rc.experiment), c);
    return kExitOk;
}

int cmd_synth(const Common& c, const std::string& kind, std::size_t n, double delta, std::string schema_path) {
    const std::uint64_t seed = c.seed.value_or(42);
    if (c.out.empty()) throw Error(ErrorKind::Usage, "synth needs --out DIR");
    std::map<std::string, std::string> files;
    if (kind == "county") {
        if (schema_path.empty()) schema_path = DKFAIR_DEFAULT_SCHEMA;
        const SchemaBundle schema = load_schema(schema_path);
        auto records = generate_county_like(schema.county, n, seed);
        files["domain_knowledge.csv"] = serialize_county_table(records, schema.domain_knowledge);
        for (auto& r : records)
            for (auto f : {kIncomeField, kAge65Field, kNhWhiteField}) r.set_value(f, std::nullopt);
        files["county.csv"] = serialize_county_table(records, schema.county);
    } else {
        SynthSpec spec;
        spec.n = n;
        spec.delta = delta;
        spec.seed = seed;
        const auto ds = generate_biased(spec);
        std::string csv = "id";
        for (const auto& f : ds.feature_names) csv += "," + f;
        csv += fmt::format(",{},y\n", kSynthProtected);
        const auto& g = ds.protected_attrs.at(kSynthProtected);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            csv += ds.ids[i];
            for (double v : ds.X.row(i)) csv += fmt::format(",{}", v);
            csv += fmt::format(",{},{}\n", g[i], ds.y[i]);
        }
        files["biased.csv"] = csv;
    }
    write_artifacts(c.out, files);
    std::cerr << fmt::format("wrote {} files and manifest.json to {}\n", files.size(), c.out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-knowledge fairness experiments on county health data", "dkfair"};
    app.require_subcommand(1);

    Common c;
    std::string family = "logistic", subset = "none", kind = "county", synth_schema;
    std::vector<std::string> subsets;
    std::size_t n = 3107;
    double delta = 0.2;

    auto* ingest = app.add_subcommand("ingest", "Parse, merge and clean the input tables");
    add_common(ingest, c);
    auto* explore = app.add_subcommand("explore", "Correlations and group densities");
    add_common(explore, c);
    auto* train = app.add_subcommand("train", "Fit one classifier and save it as JSON");
    add_common(train, c);
    train->add_option("--family", family, "logistic, knn, tree, forest or linear_svm");
    train->add_option("--subset", subset, "Domain-knowledge subset, e.g. none, nhw, income+age65, all");
    auto* audit = app.add_subcommand("audit", "Fairness metrics of the baseline model");
    add_common(audit, c);
    audit->add_option("--subset", subsets, "Domain-knowledge subsets to audit");
    auto* mitigate = app.add_subcommand("mitigate", "Fairness metrics before and after reweighing");
    add_common(mitigate, c);
    mitigate->add_option("--subset", subsets, "Domain-knowledge subsets to audit");
    auto* grid = app.add_subcommand("grid", "Algorithm comparison, ablation and the full mitigation grid");
    add_common(grid, c);
    auto* synth = app.add_subcommand("synth", "Write synthetic tables");
    add_common(synth, c, false);
    synth->add_option("--kind", kind, "county or biased")->check(CLI::IsMember({"county", "biased"}));
    synth->add_option("--n", n, "Rows");
    synth->add_option("--delta", delta, "Label bias strength (biased only)");
    synth->add_option("--schema", synth_schema, "Schema JSON (county only)");

    if (argc < 2) {
        std::cerr << app.help();
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*ingest) return cmd_ingest(c);
        if (*explore) return cmd_explore(c);
        if (*train) return cmd_train(c, family, subset);
        if (*audit) return cmd_fairness(c, MitigationMode::Off, subsets);
        if (*mitigate) return cmd_fairness(c, MitigationMode::Both, subsets);
        if (*grid) return cmd_grid(c);
        if (*synth) return cmd_synth(c, kind, n, delta, synth_schema);
    } catch (const Error& e) {
        std::cerr << fmt::format("error ({}): {}\n", to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
