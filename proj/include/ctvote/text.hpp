#pragma once

// Small text helpers shared by the line-oriented file formats.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctvote::text {

// Fixed-point rendering with `decimals` digits, correctly rounded from the
// binary value (exact ties round half to even).
std::string fixed(double value, int decimals = 6);

// Shortest text that parses back to the same double ("%.17g" semantics).
std::string exact(double value);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

std::string_view trim(std::string_view s);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

// Natural-order comparison: digit runs compare as integers, everything else
// byte-wise; full ties fall back to plain lexicographic order.
bool natural_less(std::string_view a, std::string_view b);

}  // namespace ctvote::text
