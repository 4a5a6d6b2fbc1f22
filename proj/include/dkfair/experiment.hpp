#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dkfair/fairness.hpp"
#include "dkfair/models.hpp"
#include "dkfair/preprocess.hpp"
#include "dkfair/synth.hpp"

namespace dkfair {

/// A named set of domain-knowledge fields. The empty set is the baseline.
struct DkSubset {
    std::string label;
    std::vector<std::string> fields;

    friend bool operator==(const DkSubset&, const DkSubset&) = default;
};

/// none, income, age65, nhw, all (in that order).
std::vector<DkSubset> default_dk_subsets();
/// Parses "none", "income", "age65", "nhw", "all" or a '+'-joined list such as "income+nhw".
DkSubset parse_dk_subset(std::string_view token);

enum class MitigationMode { Off, On, Both };
enum class Surface { Test, Train, Both };

const char* to_string(Surface s) noexcept;
MitigationMode mitigation_from_string(std::string_view s);
Surface surface_from_string(std::string_view s);

struct ExperimentConfig {
    std::vector<DkSubset> dk_subsets = default_dk_subsets();
    MitigationMode mitigation = MitigationMode::Both;
    Surface evaluation_surface = Surface::Both;
    ClassifierSpec classifier;  // family ignored by compare_algorithms, which runs all five
    std::uint64_t seed = 42;
    double test_fraction = 0.3;
    bool stratified = true;
    bool standardize = true;
    /// Audited columns also enter the model as features when their subset is active.
    bool audited_as_feature = true;
    int privileged_value = 1;
    int favorable_label = 0;
    unsigned jobs = 1;
    BinarizationSpec binarization;

    /// Seeds derived from `seed` and a purpose tag.
    std::uint64_t split_seed() const;
    std::uint64_t model_seed(std::string_view family) const;
    /// Classifier spec with the derived forest/SVM seeds filled in.
    ClassifierSpec resolved_classifier(Family family) const;
};

struct DataProvenance {
    std::string fingerprint;  // SHA-256 of the modelling table
    std::size_t rows_parsed = 0;
    std::size_t rows_unmatched_dk = 0;
    std::size_t rows_dropped = 0;
    std::size_t rows_used = 0;
    std::string source;
};

/// Everything the experiment runs need: the full table (base features plus a
/// feature column per DK field), which columns are base features, and which
/// DK fields exist. Each DK field is also a binary protected column.
struct ExperimentData {
    TabularDataset full;
    std::vector<std::string> base_features;
    std::vector<std::string> dk_fields;
    BinarizationSpec binarization;  // resolved thresholds
    DataProvenance provenance;
};

ExperimentData prepare_county_data(std::span<const CountyRecord> records, const BinarizationSpec& binarization,
                                   DataProvenance provenance = {});

/// Synthetic data with the protected column "g" doubling as the single DK field.
ExperimentData prepare_synth_data(const SynthSpec& spec);

struct AlgorithmRow {
    Family family{};
    ClassificationScores scores;
    FitInfo fit_info;
};

struct AblationRow {
    DkSubset subset;
    std::size_t n_features = 0;
    ClassificationScores scores;
    FitInfo fit_info;
};

struct MetricEntry {
    MetricName name{};
    std::optional<MetricResult> result;
    std::string note;  // reason when result is empty
    std::optional<double> change;  // reweighed minus baseline, when both exist
};

struct SurfaceMetrics {
    Surface surface{};
    std::vector<MetricEntry> metrics;  // always all four, in canonical order
};

struct AuditCell {
    std::string attribute;
    double threshold = 0.0;
    bool attribute_is_feature = false;
    std::optional<ClassificationScores> test_scores;
    std::vector<SurfaceMetrics> surfaces;
    /// SPD and DI of the training labels under the training weights in force.
    std::vector<MetricEntry> label_metrics;
    std::optional<ReweighResult> reweighing;  // mitigated runs only; instance weights dropped
    double test_weight_sum = 0.0;
    std::size_t n_test = 0;
    std::vector<std::string> notes;
};

struct GridRun {
    DkSubset subset;
    bool mitigated = false;
    std::vector<AuditCell> audits;
};

struct FairnessReport {
    nlohmann::json config_echo;
    DataProvenance provenance;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<AlgorithmRow> algorithms;
    std::vector<AblationRow> ablation;
    std::vector<GridRun> grid;
    std::vector<std::string> warnings;
};

/// Train/test split shared by every run of an experiment.
SplitResult experiment_split(const ExperimentData& data, const ExperimentConfig& config);

std::vector<AlgorithmRow> compare_algorithms(const ExperimentData& data, const ExperimentConfig& config);

/// Duplicate subsets are removed; a warning is appended to `warnings` for each.
std::vector<AblationRow> run_ablation(const ExperimentData& data, const ExperimentConfig& config,
                                      std::vector<std::string>* warnings = nullptr);

std::vector<GridRun> run_mitigation_grid(const ExperimentData& data, const ExperimentConfig& config,
                                         std::vector<std::string>* warnings = nullptr);

/// Fields audited for a subset: its own fields, or every DK field for the empty subset.
std::vector<std::string> audited_fields(const DkSubset& subset, const ExperimentData& data);

nlohmann::json config_to_json(const ExperimentConfig& config, const BinarizationSpec& resolved);

/// Runs all three stages and assembles the report.
FairnessReport run_experiment(const ExperimentData& data, const ExperimentConfig& config);

enum class ReportFormat { Markdown, Struct, Table };
ReportFormat report_format_from_string(std::string_view s);

/// Deterministic serialization. Table yields the fairness-metric table; the
/// other tables come from report_tables().
std::string emit_report(const FairnessReport& report, ReportFormat format);

/// File name -> CSV content for the algorithm, ablation and metric tables.
std::map<std::string, std::string> report_tables(const FairnessReport& report);

std::string format_value(double v);
std::string sha256_hex(std::string_view bytes);

/// Writes `files` (relative path -> content) under `dir` plus manifest.json
/// listing each file with its SHA-256. Returns the manifest text.
std::string write_artifacts(const std::filesystem::path& dir, const std::map<std::string, std::string>& files);

}  // namespace dkfair
