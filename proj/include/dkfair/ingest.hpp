#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dkfair {

// Canonical field names of the non-explanatory record fields.
inline constexpr std::string_view kTargetField = "alcohol_impaired_death_pct";
inline constexpr std::string_view kIncomeField = "per_capita_income";
inline constexpr std::string_view kAge65Field = "pct_age_65_plus";
inline constexpr std::string_view kNhWhiteField = "pct_nh_white";

enum class ColumnRole { Key, Label, Explanatory, Target, DomainKnowledge, Ignored };

/// Governs range checks on a numeric column. Percent columns must hold values
/// in [0, 100]; a column that looks fraction-scaled (all values in [0, 1]) is
/// rejected rather than rescaled.
enum class UnitClass { Percent, Usd, Index, Count, Real, Text };

struct ColumnSpec {
    std::string header;  // as published; matched trimmed and case-insensitively
    ColumnRole role = ColumnRole::Ignored;
    UnitClass unit = UnitClass::Real;
    std::string field;   // canonical record field name
    bool required = true;
};

struct TableSchema {
    std::string version;
    std::vector<ColumnSpec> columns;
    std::vector<std::string> missing_tokens{"", "NA"};

    const ColumnSpec* find_header(std::string_view header) const;
    const ColumnSpec* find_field(std::string_view field) const;
    std::vector<std::string> explanatory_fields() const;

    /// Exactly one key column; exactly one target when `require_target`.
    void validate(bool require_target) const;
};

struct SchemaBundle {
    std::string version;
    TableSchema county;
    TableSchema domain_knowledge;
};

SchemaBundle schema_from_json(const nlohmann::json& doc);
SchemaBundle load_schema(const std::filesystem::path& path);

struct CountyRecord {
    std::string fips;
    std::string state;
    std::string county;
    std::vector<std::pair<std::string, std::optional<double>>> explanatory;
    std::optional<double> alcohol_impaired_death_pct;
    std::optional<double> per_capita_income;
    std::optional<double> pct_age_65_plus;
    std::optional<double> pct_nh_white;

    /// Looks up any numeric field by canonical name. Throws Schema on unknown names.
    std::optional<double> value(std::string_view field) const;
    bool has_field(std::string_view field) const;
    void set_value(std::string_view field, std::optional<double> v);

    friend bool operator==(const CountyRecord&, const CountyRecord&) = default;
};

std::vector<CountyRecord> parse_county_table(std::string_view raw_text, const TableSchema& schema);

struct MergeResult {
    std::vector<CountyRecord> records;
    std::size_t matched = 0;
    std::size_t unmatched = 0;
};

MergeResult merge_domain_knowledge(std::vector<CountyRecord> base, std::string_view dk_text,
                                   const TableSchema& dk_schema);

struct DropResult {
    std::vector<CountyRecord> records;
    std::size_t dropped = 0;
};

/// Keeps records whose `required` fields are all present. Field names are
/// validated against the fixed fields plus `known_explanatory` (or, when that
/// is empty, the explanatory names carried by the records).
DropResult drop_incomplete(std::vector<CountyRecord> records, const std::set<std::string>& required,
                           std::span<const std::string> known_explanatory = {});

/// Every numeric field the schema defines: explanatory, target and DK.
std::set<std::string> complete_case_fields(const TableSchema& county_schema,
                                           const TableSchema& dk_schema);

/// Writes records back out with the schema's headers (ignored columns omitted).
std::string serialize_county_table(std::span<const CountyRecord> records, const TableSchema& schema);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace dkfair
