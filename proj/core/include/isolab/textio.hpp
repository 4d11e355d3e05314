#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace isolab {

// Locale-independent float/int formatting built on std::to_chars. Every text
// artifact the library writes (embedding files, CSV, SVG, JSON values that
// bypass the JSON library) goes through these so outputs are byte-stable.

// Shortest representation that round-trips the exact double.
std::string format_double(double v);

// Fixed decimal places, for human-facing summaries.
std::string format_fixed(double v, int precision);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

}  // namespace isolab
