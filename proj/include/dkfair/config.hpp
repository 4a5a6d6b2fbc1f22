#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dkfair/experiment.hpp"

namespace dkfair {

/// Experiment settings plus the input locations a run reads from. Paths in a
/// config file are resolved relative to the file's directory.
struct RunConfig {
    ExperimentConfig experiment;
    std::optional<std::filesystem::path> schema;
    std::optional<std::filesystem::path> county_table;
    std::optional<std::filesystem::path> domain_knowledge_table;
};

/// Reads an INI file. Unknown keys are rejected so typos do not silently
/// fall back to defaults.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});

struct LoadedRecords {
    std::vector<CountyRecord> records;  // complete rows only
    DataProvenance provenance;
};

LoadedRecords load_county_records(const std::filesystem::path& schema_path,
                                  const std::filesystem::path& county_table,
                                  const std::optional<std::filesystem::path>& domain_knowledge_table);

/// Parse, merge, drop incomplete rows and build the modelling table. The DK
/// table is optional; without it every row must carry the DK fields itself.
ExperimentData load_experiment_data(const std::filesystem::path& schema_path,
                                    const std::filesystem::path& county_table,
                                    const std::optional<std::filesystem::path>& domain_knowledge_table,
                                    const BinarizationSpec& binarization);

}  // namespace dkfair
