#pragma once

#include <iosfwd>
#include <map>
#include <string>

namespace gridres {

/// Flat `key = value` text: one entry per line, '#' starts a comment line,
/// surrounding whitespace is ignored. Duplicate keys are an error.
/// Keys keep their original spelling; callers normalize if they need to.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap parse_key_values(std::istream& in, const std::string& source_name);
KeyValueMap read_key_value_file(const std::string& path);

}  // namespace gridres
