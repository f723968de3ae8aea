#pragma once
// Tabular autoregressive policy: an explicit logit table over
// (prompt row, position, token). Small enough to differentiate exactly,
// which is what the alignment losses and their finite-difference checks
// are built on. Prompts outside the known set share one background row.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seren/common.hpp"

namespace seren {

class TabularPolicy {
 public:
  // vocab: token strings, all distinct and non-empty.
  // prompt_keys: known prompts, all distinct; one extra background row is
  // appended for unseen prompts.
  // init_scale > 0 draws initial logits uniformly from [-scale, scale)
  // using init_seed; init_scale == 0 starts from all-zero logits
  // (uniform distributions at every position).
  TabularPolicy(std::vector<std::string> vocab,
                std::vector<std::string> prompt_keys, int max_len,
                std::uint64_t init_seed = 0, double init_scale = 0.0);

  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  int max_len() const { return max_len_; }
  int rows() const { return static_cast<int>(prompt_keys_.size()) + 1; }
  int background_row() const { return rows() - 1; }

  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<std::string>& prompt_keys() const { return prompt_keys_; }

  bool has_prompt(const std::string& key) const;
  int row_of(const std::string& key) const;  // background row if unknown
  int token_id(const std::string& token) const;  // -1 if out of vocabulary
  const std::string& token(int id) const;

  // Strict encoding: throws ValidationError on out-of-vocabulary tokens or
  // responses longer than max_len.
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

  double logit(int row, int pos, int tok) const;
  double& logit(int row, int pos, int tok);
  std::span<const double> logits(int row, int pos) const;

  // Numerically stable softmax / log-softmax over one (row, pos) slice.
  std::vector<double> probs(int row, int pos) const;
  std::vector<double> log_probs(int row, int pos) const;

  // Sum over positions t of log softmax(theta[row, t])[response[t]].
  // Empty responses are rejected; so are responses longer than max_len.
  double logprob(const std::string& prompt_key, std::span<const int> response) const;
  double logprob(int row, std::span<const int> response) const;

  std::vector<double>& params() { return theta_; }
  const std::vector<double>& params() const { return theta_; }
  std::size_t param_count() const { return theta_.size(); }
  std::size_t index_of(int row, int pos, int tok) const;

  // Free-form metadata (e.g. the loss configuration used to train this
  // checkpoint); persisted verbatim in the header.
  std::string meta;

  // Checkpoint layout: one magic line, one JSON header line (vocab, prompt
  // keys, max_len, meta), then rows*max_len*vocab float64 logits,
  // little-endian, row-major.
  void save(const std::filesystem::path& path) const;
  static TabularPolicy load(const std::filesystem::path& path);

  bool operator==(const TabularPolicy& other) const;

 private:
  void check_row(int row) const;

  std::vector<std::string> vocab_;
  std::vector<std::string> prompt_keys_;
  int max_len_ = 0;
  std::unordered_map<std::string, int> token_ids_;
  std::unordered_map<std::string, int> prompt_rows_;
  std::vector<double> theta_;  // rows * max_len * vocab, row-major
};

}  // namespace seren
