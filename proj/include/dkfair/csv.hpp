#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dkfair::csv {

using Row = std::vector<std::string>;

/// Splits comma-delimited text into rows of fields. Handles double-quoted
/// fields (with "" escapes), CRLF line endings and a leading UTF-8 BOM.
/// Blank lines are skipped.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote or line break.
std::string escape(std::string_view field);

std::string join(const Row& row);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace dkfair::csv
