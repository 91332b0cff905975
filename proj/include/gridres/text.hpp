#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gridres {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);

/// Lower-cases, trims and collapses internal whitespace runs to one space.
std::string normalize_label(std::string_view s);

/// Shortest round-trip representation; identical on every conforming platform.
std::string format_double(double v);

/// Fixed number of significant digits (general format), for report tables.
std::string format_sig(double v, int significant = 10);

/// Replaces tabs, CR and LF with spaces so a value fits in one TSV cell.
std::string tsv_safe(std::string_view s);

}  // namespace gridres
