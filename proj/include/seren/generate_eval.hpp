#pragma once
// Generation-side evaluation: seeded sampling from a TabularPolicy,
// title-token matching, rank construction against candidate sets, and the
// serendipity/diversity metric reports, plus a tiny inference timer.

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "seren/policy.hpp"

namespace seren {

struct SampleParams {
  int n = 1;                        // sequences to draw
  double temperature = 0.95;        // 0 = greedy argmax (ties: lowest id)
  double repetition_penalty = 1.05; // >= 1; 1 = off
  std::uint64_t seed = 0;
};

// Ancestral sampling over the prompt's row. Repetition penalty divides
// positive logits of already-emitted tokens by the penalty and multiplies
// negative ones, before temperature scaling; draws use an inverse-CDF walk
// over an explicitly seeded stream, so results are identical across
// platforms. Each sequence has max_len tokens.
std::vector<std::vector<std::string>> sample_policy(const TabularPolicy& policy,
                                                    const std::string& prompt_key,
                                                    const SampleParams& params);

// Token-set Jaccard similarity. Both sides empty -> 1, one side empty -> 0.
double title_similarity(const std::vector<std::string>& a,
                        const std::vector<std::string>& b);

struct Candidate {
  std::string item_id;
  std::vector<std::string> title_tokens;
  bool is_positive = false;
};

struct RankedCandidates {
  std::vector<std::string> ordered_ids;  // best match first
  std::vector<double> scores;            // aligned with ordered_ids
  int positive_rank = 0;                 // 1-based
};

// Scores every candidate against the generated title and sorts descending;
// ties keep input order (stable), so the ranking is deterministic. Exactly
// one candidate must be marked positive and ids must be distinct.
RankedCandidates rank_candidates(const std::vector<std::string>& generated_title_tokens,
                                 const std::vector<Candidate>& candidates);

struct MetricReport {
  std::vector<int> ks;
  std::map<int, double> hr;    // mean 1[rank <= K]
  std::map<int, double> ndcg;  // mean 1[rank <= K] / log2(1 + rank)
  std::map<int, double> map;   // mean 1[rank <= K] / rank
  std::size_t sample_count = 0;
};

// ranks are 1-based positive ranks, one per evaluation sample.
MetricReport seren_metrics(const std::vector<int>& ranks,
                           const std::vector<int>& ks = {1, 3, 5, 10});

void write_metrics_csv(const std::filesystem::path& path,
                       const MetricReport& report);

struct DiversityReport {
  double avg_title_cnt = 0.0;  // mean distinct generated titles per user
  double avg_cate_cnt = 0.0;   // mean distinct retrieved categories per user
  double hit_rate = 0.0;       // fraction of users whose target category was covered
  std::size_t user_count = 0;
};

// samples_per_user[u] holds that user's generated titles (token vectors).
// retrieve_categories maps one title to the categories it retrieves.
// target_category_per_user[u] is the category the user's held-out
// serendipitous item belongs to.
DiversityReport diversity_metrics(
    const std::vector<std::vector<std::vector<std::string>>>& samples_per_user,
    const std::function<std::set<std::string>(const std::vector<std::string>&)>&
        retrieve_categories,
    const std::vector<std::string>& target_category_per_user);

// Mean wall-clock seconds per call over `trials` timed runs (after one
// untimed warmup call). The callable should bind the model handle and the
// candidate set it evaluates.
double time_inference(const std::function<void()>& call, int trials);

}  // namespace seren
