#include "gridres/delimited.hpp"

#include <fstream>
#include <istream>

#include "gridres/errors.hpp"
#include "gridres/text.hpp"

namespace gridres {

std::optional<std::size_t> DelimitedTable::column(std::string_view name) const {
    const auto wanted = normalize_label(name);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (normalize_label(header[i]) == wanted) return i;
    }
    return std::nullopt;
}

std::vector<std::string> split_delimited_line(std::string_view line, char delimiter) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            cells.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

DelimitedTable read_delimited(std::istream& in) {
    DelimitedTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line.front() == '#') continue;
        if (!have_header) {
            table.delimiter = line.find('\t') != std::string::npos ? '\t' : ',';
            for (auto& h : split_delimited_line(line, table.delimiter)) {
                table.header.emplace_back(trim(h));
            }
            have_header = true;
            continue;
        }
        auto cells = split_delimited_line(line, table.delimiter);
        if (cells.size() != table.header.size()) {
            throw MalformedRow("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(table.header.size()) + " cells, found " +
                               std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw MissingColumn("input has no header line");
    return table;
}

DelimitedTable read_delimited_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_delimited(in);
}

}  // namespace gridres
