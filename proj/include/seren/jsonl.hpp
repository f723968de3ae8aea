#pragma once
// JSON Lines IO. One record per line, UTF-8; parse errors carry line numbers.

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seren/common.hpp"

namespace seren {

using Json = nlohmann::json;

// Invokes fn(record, line_no) per non-empty line. Throws ParseError on bad JSON.
void for_each_jsonl(const std::string& path,
                    const std::function<void(const Json&, size_t)>& fn);

std::vector<Json> read_jsonl(const std::string& path);

void write_jsonl(const std::string& path, const std::vector<Json>& records);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Fetches a required field, reporting path:line on absence or wrong type.
template <typename T>
T get_field(const Json& rec, const char* key, const std::string& path, size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) {
    throw ParseError(path, line, std::string("missing field '") + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw ParseError(path, line, std::string("field '") + key + "' has wrong type");
  }
}

}  // namespace seren
