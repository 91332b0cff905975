#include "gridres/keyvalue.hpp"

#include <fstream>
#include <istream>

#include "gridres/errors.hpp"
#include "gridres/text.hpp"

namespace gridres {

KeyValueMap parse_key_values(std::istream& in, const std::string& source_name) {
    KeyValueMap out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected key = value");
        }
        std::string key(trim(t.substr(0, eq)));
        std::string value(trim(t.substr(eq + 1)));
        if (key.empty()) {
            throw ConfigError(source_name + ":" + std::to_string(line_no) + ": empty key");
        }
        if (!out.emplace(key, value).second) {
            throw ConfigError(source_name + ":" + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
        }
    }
    return out;
}

KeyValueMap read_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return parse_key_values(in, path);
}

}  // namespace gridres
