#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridres {

/// A header plus data rows read from comma- or tab-delimited text.
///
/// The delimiter is detected from the header line: a tab anywhere in the
/// header selects TSV, otherwise CSV. Double-quoted fields (with "" escapes)
/// are supported in both. Blank lines and lines starting with '#' are skipped.
struct DelimitedTable {
    char delimiter = ',';
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line for each row

    /// Case/whitespace-insensitive header lookup.
    std::optional<std::size_t> column(std::string_view name) const;
};

/// Throws MalformedRow when a data row's cell count differs from the header.
DelimitedTable read_delimited(std::istream& in);
DelimitedTable read_delimited_file(const std::string& path);

std::vector<std::string> split_delimited_line(std::string_view line, char delimiter);

}  // namespace gridres
