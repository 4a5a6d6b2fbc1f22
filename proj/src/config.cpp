#include "dkfair/config.hpp"

#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "dkfair/csv.hpp"
#include "dkfair/ingest.hpp"

namespace dkfair {
namespace {

namespace pt = boost::property_tree;

class Reader {
public:
    explicit Reader(const pt::ptree& tree) : tree_(tree) {}

    template <typename T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
        if (!v) return;
        out = convert<T>(key, csv::trim(*v));
    }

    std::optional<std::string> raw(const std::string& key) {
        seen_.insert(key);
        auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return std::string(csv::trim(*v));
    }

    void reject_unknown() const {
        for (const auto& [section, body] : tree_) {
            if (body.empty()) throw Error(ErrorKind::Usage, fmt::format("config: key '{}' outside a section", section));
            for (const auto& [key, value] : body) {
                const std::string full = section + "." + key;
                if (!seen_.count(full) && !full.starts_with("thresholds."))
                    throw Error(ErrorKind::Usage, fmt::format("config: unknown key '{}'", full));
            }
        }
    }

private:
    template <typename T>
    static T convert(const std::string& key, const std::string& s) {
        try {
            if constexpr (std::is_same_v<T, bool>) {
                const auto l = csv::to_lower(s);
                if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
                if (l == "false" || l == "0" || l == "no" || l == "off") return false;
                throw std::invalid_argument(s);
            } else if constexpr (std::is_same_v<T, double>) {
                std::size_t pos = 0;
                const double v = std::stod(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return v;
            } else if constexpr (std::is_same_v<T, int>) {
                std::size_t pos = 0;
                const int v = std::stoi(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return v;
            } else {
                if (s.empty() || s.front() == '-') throw std::invalid_argument(s);
                std::size_t pos = 0;
                const unsigned long long v = std::stoull(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return static_cast<T>(v);
            }
        } catch (const std::logic_error&) {
            throw Error(ErrorKind::Usage, fmt::format("config: '{}' has invalid value '{}'", key, s));
        }
    }

    const pt::ptree& tree_;
    std::set<std::string> seen_;
};

std::string field_for_alias(const std::string& key) {
    if (key == "income") return std::string(kIncomeField);
    if (key == "age65") return std::string(kAge65Field);
    if (key == "nhw") return std::string(kNhWhiteField);
    return key;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::Usage, fmt::format("config: {} (line {})", e.message(), e.line()));
    }
    Reader r(tree);
    RunConfig rc;
    auto& e = rc.experiment;

    r.get("experiment.seed", e.seed);
    r.get("experiment.test_fraction", e.test_fraction);
    r.get("experiment.stratified", e.stratified);
    r.get("experiment.standardize", e.standardize);
    r.get("experiment.audited_as_feature", e.audited_as_feature);
    r.get("experiment.privileged_value", e.privileged_value);
    r.get("experiment.favorable_label", e.favorable_label);
    r.get("experiment.jobs", e.jobs);
    if (auto v = r.raw("experiment.mitigation")) e.mitigation = mitigation_from_string(*v);
    if (auto v = r.raw("experiment.evaluation_surface")) e.evaluation_surface = surface_from_string(*v);
    if (auto v = r.raw("experiment.dk_subsets")) {
        e.dk_subsets.clear();
        std::stringstream ss(*v);
        for (std::string tok; std::getline(ss, tok, ',');) {
            const std::string t(csv::trim(tok));
            if (!t.empty()) e.dk_subsets.push_back(parse_dk_subset(t));
        }
    }

    r.get("binarization.target_percentile", e.binarization.target_percentile);
    r.get("binarization.ge_maps_to_one", e.binarization.ge_maps_to_one);
    if (auto th = tree.get_child_optional("thresholds"))
        for (const auto& [key, value] : *th) {
            double v = 0.0;
            r.get("thresholds." + key, v);
            e.binarization.protected_thresholds[field_for_alias(key)] = v;
        }

    auto& c = e.classifier;
    r.get("logistic.l2_lambda", c.logistic.l2_lambda);
    r.get("logistic.tol", c.logistic.tol);
    r.get("logistic.max_iter", c.logistic.max_iter);
    r.get("knn.k", c.knn.k);
    r.get("tree.max_depth", c.tree.max_depth);
    r.get("tree.min_samples_leaf", c.tree.min_samples_leaf);
    r.get("forest.n_trees", c.forest.n_trees);
    r.get("forest.max_depth", c.forest.max_depth);
    r.get("forest.min_samples_leaf", c.forest.min_samples_leaf);
    r.get("forest.bootstrap", c.forest.bootstrap);
    r.get("forest.max_features", c.forest.max_features);
    r.get("forest.threads", c.forest.threads);
    r.get("linear_svm.c", c.svm.c);
    r.get("linear_svm.epochs", c.svm.epochs);

    auto path = [&](const char* key, std::optional<std::filesystem::path>& out) {
        if (auto v = r.raw(key); v && !v->empty()) {
            std::filesystem::path p(*v);
            out = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
        }
    };
    path("data.schema", rc.schema);
    path("data.county_table", rc.county_table);
    path("data.domain_knowledge_table", rc.domain_knowledge_table);

    r.reject_unknown();
    c.validate();
    if (!(e.test_fraction > 0.0 && e.test_fraction < 1.0))
        throw Error(ErrorKind::Usage, "config: experiment.test_fraction must lie in (0, 1)");
    if (e.privileged_value != 0 && e.privileged_value != 1)
        throw Error(ErrorKind::Usage, "config: experiment.privileged_value must be 0 or 1");
    if (e.favorable_label != 0 && e.favorable_label != 1)
        throw Error(ErrorKind::Usage, "config: experiment.favorable_label must be 0 or 1");
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_text_file(path), path.parent_path());
}

LoadedRecords load_county_records(const std::filesystem::path& schema_path,
                                  const std::filesystem::path& county_table,
                                  const std::optional<std::filesystem::path>& domain_knowledge_table) {
    const SchemaBundle schema = load_schema(schema_path);
    DataProvenance prov;
    auto records = parse_county_table(read_text_file(county_table), schema.county);
    prov.rows_parsed = records.size();
    prov.source = county_table.filename().string();
    if (domain_knowledge_table) {
        auto merged = merge_domain_knowledge(std::move(records), read_text_file(*domain_knowledge_table),
                                             schema.domain_knowledge);
        prov.rows_unmatched_dk = merged.unmatched;
        records = std::move(merged.records);
        prov.source += " + " + domain_knowledge_table->filename().string();
    }
    auto kept = drop_incomplete(std::move(records), complete_case_fields(schema.county, schema.domain_knowledge),
                                schema.county.explanatory_fields());
    prov.rows_dropped = kept.dropped;
    if (kept.records.empty()) throw Error(ErrorKind::Domain, "no complete rows remain after dropping missing values");
    prov.rows_used = kept.records.size();
    return {std::move(kept.records), std::move(prov)};
}

ExperimentData load_experiment_data(const std::filesystem::path& schema_path,
                                    const std::filesystem::path& county_table,
                                    const std::optional<std::filesystem::path>& domain_knowledge_table,
                                    const BinarizationSpec& binarization) {
    auto loaded = load_county_records(schema_path, county_table, domain_knowledge_table);
    return prepare_county_data(loaded.records, binarization, std::move(loaded.provenance));
}

}  // namespace dkfair
