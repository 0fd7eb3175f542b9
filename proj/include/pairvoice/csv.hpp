#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pairvoice::csv {

using Row = std::vector<std::string>;

// Comma separated, optional double quotes with "" escapes, CRLF tolerated,
// blank lines skipped. A UTF-8 byte order mark on the first line is dropped.
std::vector<Row> read(const std::filesystem::path& path);
std::vector<Row> parse(std::string_view text);

std::string escape(std::string_view field);
std::string join(const Row& row);

// Shortest representation that round-trips exactly.
std::string format_double(double v);
// Locale-independent parse of the whole field; nullopt if it is not a number.
// "nan"/"inf" spellings parse to the corresponding non-finite values.
std::optional<double> parse_double(std::string_view s);

std::string trim(std::string_view s);
std::string lower(std::string_view s);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace pairvoice::csv
