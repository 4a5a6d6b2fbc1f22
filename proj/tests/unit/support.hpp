#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "dkfair/ingest.hpp"

namespace testing {

inline std::filesystem::path source_path(const std::string& rel) {
    return std::filesystem::path(DKFAIR_SOURCE_DIR) / rel;
}

inline dkfair::SchemaBundle shipped_schema() {
    return dkfair::load_schema(source_path("data/schema/county_health_v1.json"));
}

// Two explanatory columns, the target and the DK fields; small enough to write
// fixtures by hand.
inline dkfair::SchemaBundle mini_schema() {
    const char* text = R"({
      "version": "mini/1",
      "county_table": {
        "missing_tokens": ["", "NA"],
        "columns": [
          {"header": "FIPS", "role": "key"},
          {"header": "State", "role": "label", "field": "state"},
          {"header": "County", "role": "label", "field": "county"},
          {"header": "Adult Obesity", "role": "explanatory", "field": "adult_obesity", "unit": "percent"},
          {"header": "Median Household Income", "role": "explanatory", "field": "median_household_income", "unit": "usd"},
          {"header": "Alcohol-Impaired Driving Deaths", "role": "target", "field": "alcohol_impaired_death_pct", "unit": "percent"}
        ]
      },
      "domain_knowledge_table": {
        "missing_tokens": ["", "NA"],
        "columns": [
          {"header": "FIPS", "role": "key"},
          {"header": "Per Capita Income", "role": "domain_knowledge", "field": "per_capita_income", "unit": "usd"},
          {"header": "Percentage of Population Age 65+", "role": "domain_knowledge", "field": "pct_age_65_plus", "unit": "percent"},
          {"header": "Non-Hispanic White Population Percentage", "role": "domain_knowledge", "field": "pct_nh_white", "unit": "percent"}
        ]
      }
    })";
    return dkfair::schema_from_json(nlohmann::json::parse(text));
}

}  // namespace testing
