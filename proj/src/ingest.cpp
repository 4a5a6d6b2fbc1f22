#include "dkfair/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dkfair/common.hpp"
#include "dkfair/csv.hpp"

namespace dkfair {
namespace {

ColumnRole parse_role(const std::string& s) {
    static const std::map<std::string, ColumnRole> roles{
        {"key", ColumnRole::Key},
        {"label", ColumnRole::Label},
        {"explanatory", ColumnRole::Explanatory},
        {"target", ColumnRole::Target},
        {"domain_knowledge", ColumnRole::DomainKnowledge},
        {"ignored", ColumnRole::Ignored},
    };
    auto it = roles.find(s);
    if (it == roles.end()) throw Error(ErrorKind::Schema, "unknown column role '" + s + "'");
    return it->second;
}

UnitClass parse_unit(const std::string& s) {
    static const std::map<std::string, UnitClass> units{
        {"percent", UnitClass::Percent}, {"usd", UnitClass::Usd},   {"index", UnitClass::Index},
        {"count", UnitClass::Count},     {"real", UnitClass::Real}, {"text", UnitClass::Text},
    };
    auto it = units.find(s);
    if (it == units.end()) throw Error(ErrorKind::Schema, "unknown unit class '" + s + "'");
    return it->second;
}

bool is_dk_field(std::string_view f) {
    return f == kIncomeField || f == kAge65Field || f == kNhWhiteField;
}

std::string normalize_fips(const std::string& raw, std::size_t row) {
    std::string token = csv::trim(raw);
    if (token.empty() || token.size() > 5 ||
        !std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw Error(ErrorKind::Parse, fmt::format("row {}: '{}' is not a FIPS county code", row, raw));
    }
    // Spreadsheet exports commonly drop the leading zero of two-digit state codes.
    return std::string(5 - token.size(), '0') + token;
}

struct BoundTable {
    std::vector<const ColumnSpec*> by_position;  // nullptr never occurs; unknown headers throw
    std::vector<csv::Row> rows;
};

BoundTable bind(std::string_view raw_text, const TableSchema& schema) {
    auto rows = csv::parse(raw_text);
    if (rows.empty()) throw Error(ErrorKind::Schema, "table has no header row");
    BoundTable bound;
    const auto& header = rows.front();
    std::unordered_set<const ColumnSpec*> seen;
    for (const auto& name : header) {
        const ColumnSpec* spec = schema.find_header(name);
        if (!spec) throw Error(ErrorKind::Schema, fmt::format("column '{}' is not in the schema", csv::trim(name)));
        if (!seen.insert(spec).second)
            throw Error(ErrorKind::Schema, fmt::format("column '{}' appears twice in the header", csv::trim(name)));
        bound.by_position.push_back(spec);
    }
    for (const auto& col : schema.columns) {
        if (col.required && col.role != ColumnRole::Ignored && !seen.contains(&col))
            throw Error(ErrorKind::Schema, fmt::format("schema column '{}' is missing from the header", col.header));
    }
    bound.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
    return bound;
}

std::optional<double> parse_number(const std::string& raw, const ColumnSpec& col, const TableSchema& schema,
                                   std::size_t row) {
    std::string token = csv::trim(raw);
    for (const auto& m : schema.missing_tokens)
        if (token == m) return std::nullopt;

    // Thousands separators appear in published income columns.
    if (col.unit == UnitClass::Usd || col.unit == UnitClass::Count) {
        token.erase(std::remove(token.begin(), token.end(), ','), token.end());
        if (col.unit == UnitClass::Usd && token.starts_with('$')) token.erase(0, 1);
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) {
        throw Error(ErrorKind::Parse,
                    fmt::format("row {}, column '{}': '{}' is not a finite number", row, col.header, raw));
    }
    if (col.unit == UnitClass::Percent && (v < 0.0 || v > 100.0)) {
        throw Error(ErrorKind::Parse,
                    fmt::format("row {}, column '{}': percentage {} outside [0, 100]", row, col.header, v));
    }
    if (col.unit == UnitClass::Count && v < 0.0) {
        throw Error(ErrorKind::Parse, fmt::format("row {}, column '{}': negative count {}", row, col.header, v));
    }
    return v;
}

void reject_fraction_scaled(std::span<const CountyRecord> records, const TableSchema& schema) {
    for (const auto& col : schema.columns) {
        if (col.unit != UnitClass::Percent || col.role == ColumnRole::Ignored || col.field.empty()) continue;
        std::size_t present = 0;
        bool all_unit = true;
        bool any_fractional = false;
        for (const auto& r : records) {
            auto v = r.value(col.field);
            if (!v) continue;
            ++present;
            if (*v > 1.0) all_unit = false;
            if (*v != std::floor(*v)) any_fractional = true;
        }
        if (present >= 2 && all_unit && any_fractional) {
            throw Error(ErrorKind::Schema,
                        fmt::format("column '{}' looks fraction-scaled (all values in [0, 1]); "
                                    "percentages must be given on a 0-100 scale",
                                    col.header));
        }
    }
}

std::string format_number(double v) {
    return fmt::format("{}", v);  // shortest round-trip representation
}

}  // namespace

const ColumnSpec* TableSchema::find_header(std::string_view header) const {
    const std::string key = csv::to_lower(csv::trim(header));
    for (const auto& c : columns)
        if (csv::to_lower(csv::trim(c.header)) == key) return &c;
    return nullptr;
}

const ColumnSpec* TableSchema::find_field(std::string_view field) const {
    for (const auto& c : columns)
        if (c.field == field) return &c;
    return nullptr;
}

std::vector<std::string> TableSchema::explanatory_fields() const {
    std::vector<std::string> out;
    for (const auto& c : columns)
        if (c.role == ColumnRole::Explanatory) out.push_back(c.field);
    return out;
}

void TableSchema::validate(bool require_target) const {
    std::size_t keys = 0, targets = 0;
    std::unordered_set<std::string> fields;
    for (const auto& c : columns) {
        if (c.role == ColumnRole::Key) ++keys;
        if (c.role == ColumnRole::Target) ++targets;
        if (c.role == ColumnRole::Ignored) continue;
        if (c.field.empty()) throw Error(ErrorKind::Schema, "column '" + c.header + "' has no field name");
        if (!fields.insert(c.field).second)
            throw Error(ErrorKind::Schema, "field '" + c.field + "' is mapped by more than one column");
        if (c.role == ColumnRole::Target && c.field != kTargetField)
            throw Error(ErrorKind::Schema, "target column must map to field '" + std::string(kTargetField) + "'");
        if (c.role == ColumnRole::DomainKnowledge && !is_dk_field(c.field))
            throw Error(ErrorKind::Schema, "'" + c.field + "' is not a domain-knowledge field");
        if (c.role == ColumnRole::Label && c.field != "state" && c.field != "county")
            throw Error(ErrorKind::Schema, "label columns map to 'state' or 'county', not '" + c.field + "'");
        if (c.role == ColumnRole::Explanatory &&
            (c.field == kTargetField || is_dk_field(c.field) || c.field == "state" || c.field == "county" ||
             c.field == "fips"))
            throw Error(ErrorKind::Schema, "explanatory field name '" + c.field + "' is reserved");
    }
    if (keys != 1) throw Error(ErrorKind::Schema, fmt::format("schema needs exactly one key column, found {}", keys));
    if (require_target && targets != 1)
        throw Error(ErrorKind::Schema, fmt::format("schema needs exactly one target column, found {}", targets));
    if (targets > 1) throw Error(ErrorKind::Schema, "schema has more than one target column");
}

SchemaBundle schema_from_json(const nlohmann::json& doc) {
    auto table = [&](const nlohmann::json& t) {
        TableSchema s;
        s.version = doc.value("version", "");
        if (t.contains("missing_tokens")) s.missing_tokens = t.at("missing_tokens").get<std::vector<std::string>>();
        for (const auto& c : t.at("columns")) {
            ColumnSpec col;
            col.header = c.at("header").get<std::string>();
            col.role = parse_role(c.at("role").get<std::string>());
            col.unit = parse_unit(c.value("unit", std::string(col.role == ColumnRole::Key ||
                                                                      col.role == ColumnRole::Label
                                                                  ? "text"
                                                                  : "real")));
            col.field = c.value("field", col.role == ColumnRole::Key ? std::string("fips") : std::string());
            col.required = c.value("required", true);
            s.columns.push_back(std::move(col));
        }
        return s;
    };
    try {
        SchemaBundle b;
        b.version = doc.at("version").get<std::string>();
        b.county = table(doc.at("county_table"));
        b.domain_knowledge = table(doc.at("domain_knowledge_table"));
        b.county.validate(true);
        b.domain_knowledge.validate(false);
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed schema file: ") + e.what());
    }
}

SchemaBundle load_schema(const std::filesystem::path& path) {
    try {
        return schema_from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Schema, "cannot parse schema " + path.string() + ": " + e.what());
    }
}

std::optional<double> CountyRecord::value(std::string_view field) const {
    if (field == kTargetField) return alcohol_impaired_death_pct;
    if (field == kIncomeField) return per_capita_income;
    if (field == kAge65Field) return pct_age_65_plus;
    if (field == kNhWhiteField) return pct_nh_white;
    for (const auto& [name, v] : explanatory)
        if (name == field) return v;
    throw Error(ErrorKind::Schema, "unknown field '" + std::string(field) + "'");
}

bool CountyRecord::has_field(std::string_view field) const {
    if (field == kTargetField || is_dk_field(field)) return true;
    return std::any_of(explanatory.begin(), explanatory.end(), [&](const auto& p) { return p.first == field; });
}

void CountyRecord::set_value(std::string_view field, std::optional<double> v) {
    if (field == kTargetField) { alcohol_impaired_death_pct = v; return; }
    if (field == kIncomeField) { per_capita_income = v; return; }
    if (field == kAge65Field) { pct_age_65_plus = v; return; }
    if (field == kNhWhiteField) { pct_nh_white = v; return; }
    for (auto& [name, slot] : explanatory) {
        if (name == field) { slot = v; return; }
    }
    explanatory.emplace_back(std::string(field), v);
}

std::vector<CountyRecord> parse_county_table(std::string_view raw_text, const TableSchema& schema) {
    schema.validate(true);
    BoundTable bound = bind(raw_text, schema);
    const auto explanatory_names = schema.explanatory_fields();

    std::vector<CountyRecord> records;
    records.reserve(bound.rows.size());
    std::unordered_map<std::string, std::size_t> seen_keys;

    for (std::size_t r = 0; r < bound.rows.size(); ++r) {
        const auto& row = bound.rows[r];
        const std::size_t line = r + 2;  // 1-based, after the header
        if (row.size() != bound.by_position.size()) {
            throw Error(ErrorKind::Parse, fmt::format("row {}: expected {} fields, found {}", line,
                                                      bound.by_position.size(), row.size()));
        }
        CountyRecord rec;
        for (const auto& name : explanatory_names) rec.explanatory.emplace_back(name, std::nullopt);

        for (std::size_t c = 0; c < row.size(); ++c) {
            const ColumnSpec& col = *bound.by_position[c];
            switch (col.role) {
                case ColumnRole::Ignored: break;
                case ColumnRole::Key: rec.fips = normalize_fips(row[c], line); break;
                case ColumnRole::Label:
                    (col.field == "state" ? rec.state : rec.county) = csv::trim(row[c]);
                    break;
                default: rec.set_value(col.field, parse_number(row[c], col, schema, line)); break;
            }
        }
        if (auto [it, fresh] = seen_keys.emplace(rec.fips, line); !fresh) {
            throw Error(ErrorKind::DuplicateKey,
                        fmt::format("duplicate county key {} on rows {} and {}", rec.fips, it->second, line));
        }
        records.push_back(std::move(rec));
    }
    reject_fraction_scaled(records, schema);
    return records;
}

MergeResult merge_domain_knowledge(std::vector<CountyRecord> base, std::string_view dk_text,
                                   const TableSchema& dk_schema) {
    dk_schema.validate(false);
    MergeResult out;

    struct DkRow {
        std::vector<std::pair<std::string, std::optional<double>>> values;
    };
    std::unordered_map<std::string, DkRow> dk;
    std::unordered_map<std::string, std::size_t> dk_lines;

    if (!csv::trim(dk_text).empty()) {
        BoundTable bound = bind(dk_text, dk_schema);
        for (std::size_t r = 0; r < bound.rows.size(); ++r) {
            const auto& row = bound.rows[r];
            const std::size_t line = r + 2;
            if (row.size() != bound.by_position.size()) {
                throw Error(ErrorKind::Parse, fmt::format("domain-knowledge row {}: expected {} fields, found {}",
                                                          line, bound.by_position.size(), row.size()));
            }
            std::string key;
            DkRow values;
            for (std::size_t c = 0; c < row.size(); ++c) {
                const ColumnSpec& col = *bound.by_position[c];
                if (col.role == ColumnRole::Key) {
                    key = normalize_fips(row[c], line);
                } else if (col.role == ColumnRole::DomainKnowledge) {
                    values.values.emplace_back(col.field, parse_number(row[c], col, dk_schema, line));
                }
            }
            if (auto [it, fresh] = dk_lines.emplace(key, line); !fresh) {
                throw Error(ErrorKind::DuplicateKey,
                            fmt::format("duplicate county key {} in domain-knowledge rows {} and {}", key,
                                        it->second, line));
            }
            dk.emplace(std::move(key), std::move(values));
        }
    }

    for (auto& rec : base) {
        auto it = dk.find(rec.fips);
        if (it == dk.end()) {
            ++out.unmatched;
            continue;
        }
        ++out.matched;
        for (const auto& [field, v] : it->second.values) rec.set_value(field, v);
    }
    out.records = std::move(base);
    return out;
}

DropResult drop_incomplete(std::vector<CountyRecord> records, const std::set<std::string>& required,
                           std::span<const std::string> known_explanatory) {
    std::unordered_set<std::string> known{std::string(kTargetField), std::string(kIncomeField),
                                          std::string(kAge65Field), std::string(kNhWhiteField)};
    if (!known_explanatory.empty()) {
        known.insert(known_explanatory.begin(), known_explanatory.end());
    } else {
        for (const auto& r : records)
            for (const auto& [name, v] : r.explanatory) known.insert(name);
    }
    for (const auto& f : required)
        if (!known.contains(f)) throw Error(ErrorKind::Usage, "required field '" + f + "' is not a known field");

    DropResult out;
    out.records.reserve(records.size());
    for (auto& r : records) {
        bool complete = std::all_of(required.begin(), required.end(), [&](const std::string& f) {
            return r.has_field(f) && r.value(f).has_value();
        });
        if (complete) out.records.push_back(std::move(r));
        else ++out.dropped;
    }
    return out;
}

std::set<std::string> complete_case_fields(const TableSchema& county_schema, const TableSchema& dk_schema) {
    std::set<std::string> out;
    for (const auto* s : {&county_schema, &dk_schema})
        for (const auto& c : s->columns)
            if (c.role == ColumnRole::Explanatory || c.role == ColumnRole::Target ||
                c.role == ColumnRole::DomainKnowledge)
                out.insert(c.field);
    return out;
}

std::string serialize_county_table(std::span<const CountyRecord> records, const TableSchema& schema) {
    std::vector<const ColumnSpec*> cols;
    csv::Row header;
    for (const auto& c : schema.columns) {
        if (c.role == ColumnRole::Ignored) continue;
        cols.push_back(&c);
        header.push_back(c.header);
    }
    std::string out = csv::join(header) + "\n";
    for (const auto& r : records) {
        csv::Row row;
        for (const auto* c : cols) {
            switch (c->role) {
                case ColumnRole::Key: row.push_back(r.fips); break;
                case ColumnRole::Label: row.push_back(c->field == "state" ? r.state : r.county); break;
                default: {
                    auto v = r.has_field(c->field) ? r.value(c->field) : std::nullopt;
                    row.push_back(v ? format_number(*v) : std::string());
                }
            }
        }
        out += csv::join(row) + "\n";
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace dkfair
