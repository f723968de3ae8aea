#include "seren/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace seren {

namespace {

constexpr const char* kMagic = "SERENPOLICY 1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

}  // namespace

TabularPolicy::TabularPolicy(std::vector<std::string> vocab,
                             std::vector<std::string> prompt_keys, int max_len,
                             std::uint64_t init_seed, double init_scale)
    : vocab_(std::move(vocab)), prompt_keys_(std::move(prompt_keys)),
      max_len_(max_len) {
  if (vocab_.empty()) throw ValidationError("policy vocabulary is empty");
  if (max_len_ <= 0) throw ValidationError("policy max_len must be positive");
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i].empty()) throw ValidationError("policy vocabulary has an empty token");
    auto [it, inserted] = token_ids_.emplace(vocab_[i], static_cast<int>(i));
    if (!inserted) throw ValidationError("duplicate vocabulary token: " + vocab_[i]);
  }
  for (std::size_t i = 0; i < prompt_keys_.size(); ++i) {
    auto [it, inserted] = prompt_rows_.emplace(prompt_keys_[i], static_cast<int>(i));
    if (!inserted) throw ValidationError("duplicate prompt key: " + prompt_keys_[i]);
  }
  theta_.assign(static_cast<std::size_t>(rows()) * max_len_ * vocab_.size(), 0.0);
  if (init_scale > 0.0) {
    Rng rng(init_seed);
    for (auto& v : theta_) v = rng.uniform(-init_scale, init_scale);
  }
}

bool TabularPolicy::has_prompt(const std::string& key) const {
  return prompt_rows_.count(key) != 0;
}

int TabularPolicy::row_of(const std::string& key) const {
  auto it = prompt_rows_.find(key);
  return it == prompt_rows_.end() ? background_row() : it->second;
}

int TabularPolicy::token_id(const std::string& token) const {
  auto it = token_ids_.find(token);
  return it == token_ids_.end() ? -1 : it->second;
}

const std::string& TabularPolicy::token(int id) const {
  if (id < 0 || id >= vocab_size()) {
    throw ValidationError("token id out of range: " + std::to_string(id));
  }
  return vocab_[static_cast<std::size_t>(id)];
}

std::vector<int> TabularPolicy::encode(const std::vector<std::string>& tokens) const {
  if (static_cast<int>(tokens.size()) > max_len_) {
    throw ValidationError("response has " + std::to_string(tokens.size()) +
                          " tokens but max_len is " + std::to_string(max_len_));
  }
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    int id = token_id(t);
    if (id < 0) throw ValidationError("token not in vocabulary: " + t);
    ids.push_back(id);
  }
  return ids;
}

std::vector<std::string> TabularPolicy::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(token(id));
  return out;
}

void TabularPolicy::check_row(int row) const {
  if (row < 0 || row >= rows()) {
    throw ValidationError("prompt row out of range: " + std::to_string(row));
  }
}

std::size_t TabularPolicy::index_of(int row, int pos, int tok) const {
  check_row(row);
  if (pos < 0 || pos >= max_len_) {
    throw ValidationError("position out of range: " + std::to_string(pos));
  }
  if (tok < 0 || tok >= vocab_size()) {
    throw ValidationError("token id out of range: " + std::to_string(tok));
  }
  return (static_cast<std::size_t>(row) * max_len_ + pos) * vocab_.size() + tok;
}

double TabularPolicy::logit(int row, int pos, int tok) const {
  return theta_[index_of(row, pos, tok)];
}

double& TabularPolicy::logit(int row, int pos, int tok) {
  return theta_[index_of(row, pos, tok)];
}

std::span<const double> TabularPolicy::logits(int row, int pos) const {
  return {theta_.data() + index_of(row, pos, 0), vocab_.size()};
}

std::vector<double> TabularPolicy::probs(int row, int pos) const {
  auto slice = logits(row, pos);
  double max_logit = *std::max_element(slice.begin(), slice.end());
  std::vector<double> p(slice.size());
  double total = 0.0;
  for (std::size_t i = 0; i < slice.size(); ++i) {
    p[i] = std::exp(slice[i] - max_logit);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> TabularPolicy::log_probs(int row, int pos) const {
  auto slice = logits(row, pos);
  double max_logit = *std::max_element(slice.begin(), slice.end());
  double total = 0.0;
  for (double v : slice) total += std::exp(v - max_logit);
  double log_z = max_logit + std::log(total);
  std::vector<double> lp(slice.size());
  for (std::size_t i = 0; i < slice.size(); ++i) lp[i] = slice[i] - log_z;
  return lp;
}

double TabularPolicy::logprob(const std::string& prompt_key,
                              std::span<const int> response) const {
  return logprob(row_of(prompt_key), response);
}

double TabularPolicy::logprob(int row, std::span<const int> response) const {
  check_row(row);
  if (response.empty()) throw ValidationError("logprob of an empty response");
  if (static_cast<int>(response.size()) > max_len_) {
    throw ValidationError("response has " + std::to_string(response.size()) +
                          " tokens but max_len is " + std::to_string(max_len_));
  }
  double total = 0.0;
  for (std::size_t t = 0; t < response.size(); ++t) {
    int tok = response[t];
    if (tok < 0 || tok >= vocab_size()) {
      throw ValidationError("token id out of range: " + std::to_string(tok));
    }
    auto lp = log_probs(row, static_cast<int>(t));
    total += lp[static_cast<std::size_t>(tok)];
  }
  return total;
}

void TabularPolicy::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SerenError("cannot open for writing: " + path.string());
  nlohmann::json header{{"vocab", vocab_},
                        {"prompts", prompt_keys_},
                        {"max_len", max_len_},
                        {"meta", meta}};
  out << kMagic << '\n' << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(theta_.data()),
            static_cast<std::streamsize>(theta_.size() * sizeof(double)));
  if (!out) throw SerenError("failed writing checkpoint: " + path.string());
}

TabularPolicy TabularPolicy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SerenError("cannot open checkpoint: " + path.string());
  std::string magic;
  if (!std::getline(in, magic) || magic != kMagic) {
    throw ValidationError("not a policy checkpoint (bad magic): " + path.string());
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw ValidationError("checkpoint is missing its header line: " + path.string());
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint header is not valid JSON: " + path.string() +
                          ": " + e.what());
  }
  std::vector<std::string> vocab, prompts;
  int max_len = 0;
  std::string meta;
  try {
    vocab = header.at("vocab").get<std::vector<std::string>>();
    prompts = header.at("prompts").get<std::vector<std::string>>();
    max_len = header.at("max_len").get<int>();
    meta = header.value("meta", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint header is missing fields: " +
                          path.string() + ": " + e.what());
  }
  TabularPolicy policy(std::move(vocab), std::move(prompts), max_len);
  policy.meta = std::move(meta);
  auto expected_bytes =
      static_cast<std::streamsize>(policy.theta_.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(policy.theta_.data()), expected_bytes);
  if (in.gcount() != expected_bytes) {
    throw ValidationError("checkpoint is truncated: " + path.string());
  }
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0) {
    throw ValidationError("checkpoint has trailing bytes: " + path.string());
  }
  return policy;
}

bool TabularPolicy::operator==(const TabularPolicy& other) const {
  return vocab_ == other.vocab_ && prompt_keys_ == other.prompt_keys_ &&
         max_len_ == other.max_len_ && theta_ == other.theta_ &&
         meta == other.meta;
}

}  // namespace seren
