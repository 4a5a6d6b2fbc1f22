#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dkfair/fairness.hpp"
#include "dkfair/ingest.hpp"
#include "dkfair/preprocess.hpp"

namespace dkfair {

inline constexpr const char* kSynthProtected = "g";

struct SynthSpec {
    std::size_t n = 1000;
    double delta = 0.0;  // bias strength in [0, 0.5)
    std::size_t d_informative = 2;
    std::size_t d_noise = 2;
    std::uint64_t seed = 42;
    double class_mean = 1.0;  // informative features are N(+-class_mean, 1) by class

    void validate() const;
};

/// g ~ Bernoulli(1/2); P(y = 1 | g) = 1/2 + delta for g = 1 and 1/2 - delta for
/// g = 0. Features are named inf_<k> and noise_<k>; the protected column is "g".
TabularDataset generate_biased(const SynthSpec& spec);

struct ExpectedLabelMetrics {
    double spd = 0.0;
    double di = 1.0;
};

/// Population label SPD/DI of generate_biased under `gd`.
ExpectedLabelMetrics expected_label_metrics(const SynthSpec& spec, const GroupDefinition& gd);

/// County-shaped records for exercising the full pipeline without the
/// published tables. Explanatory fields follow `county_schema`; values respect
/// each column's unit class. The three DK fields are always filled.
std::vector<CountyRecord> generate_county_like(const TableSchema& county_schema, std::size_t n, std::uint64_t seed);

}  // namespace dkfair
