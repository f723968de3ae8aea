#include "seren/jsonl.hpp"

#include <fstream>
#include <sstream>

namespace seren {

void for_each_jsonl(const std::string& path,
                    const std::function<void(const Json&, size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw SerenError("cannot open file: " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Tolerate a trailing \r from CRLF sources.
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Json rec = Json::parse(line, nullptr, false);
    if (rec.is_discarded()) throw ParseError(path, line_no, "malformed JSON record");
    fn(rec, line_no);
  }
}

std::vector<Json> read_jsonl(const std::string& path) {
  std::vector<Json> out;
  for_each_jsonl(path, [&](const Json& rec, size_t) { out.push_back(rec); });
  return out;
}

void write_jsonl(const std::string& path, const std::vector<Json>& records) {
  std::ofstream out(path);
  if (!out) throw SerenError("cannot open file for writing: " + path);
  for (const auto& rec : records) out << rec.dump() << '\n';
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SerenError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SerenError("cannot open file for writing: " + path);
  out << content;
}

}  // namespace seren
