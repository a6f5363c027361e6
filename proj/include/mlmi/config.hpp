#pragma once

#include <map>
#include <string>
#include <vector>

#include "mlmi/errors.hpp"

namespace mlmi {

// Flat key=value text file: one pair per line, '#' starts a comment, blank
// lines are ignored, whitespace around keys and values is trimmed. Duplicate
// keys are an error.
struct KeyValueFile {
  std::vector<std::string> order;  // keys in file order
  std::map<std::string, std::string> entries;

  bool has(const std::string& key) const { return entries.count(key) != 0; }
  const std::string& get(const std::string& key) const;
};

KeyValueFile read_key_value_file(const std::string& path);
KeyValueFile parse_key_value_text(const std::string& text,
                                  const std::string& origin);

void write_key_value_file(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& pairs);

// Strict scalar parsers used for config values; the key names the error.
double parse_double_value(const std::string& key, const std::string& text);
int parse_int_value(const std::string& key, const std::string& text);
bool parse_bool_value(const std::string& key, const std::string& text);

// Splits on commas and trims; empty items are an error.
std::vector<std::string> split_list(const std::string& key,
                                    const std::string& text);

std::string trim(const std::string& s);

}  // namespace mlmi
