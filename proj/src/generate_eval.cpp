#include "seren/generate_eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace seren {

std::vector<std::vector<std::string>> sample_policy(const TabularPolicy& policy,
                                                    const std::string& prompt_key,
                                                    const SampleParams& params) {
  if (params.n <= 0) throw ValidationError("sample count must be positive");
  if (params.temperature < 0.0) {
    throw ValidationError("temperature must be non-negative");
  }
  if (params.repetition_penalty < 1.0) {
    throw ValidationError("repetition penalty must be >= 1");
  }
  int row = policy.row_of(prompt_key);
  Rng rng(Rng::derive(params.seed, "sample", prompt_key));
  int vocab = policy.vocab_size();

  std::vector<std::vector<std::string>> sequences;
  sequences.reserve(static_cast<std::size_t>(params.n));
  std::vector<double> adjusted(static_cast<std::size_t>(vocab));
  std::vector<int> seen_count(static_cast<std::size_t>(vocab));
  for (int s = 0; s < params.n; ++s) {
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(policy.max_len()));
    std::fill(seen_count.begin(), seen_count.end(), 0);
    for (int pos = 0; pos < policy.max_len(); ++pos) {
      auto base = policy.logits(row, pos);
      for (int v = 0; v < vocab; ++v) {
        double logit = base[static_cast<std::size_t>(v)];
        if (seen_count[static_cast<std::size_t>(v)] > 0 &&
            params.repetition_penalty > 1.0) {
          logit = logit > 0.0 ? logit / params.repetition_penalty
                              : logit * params.repetition_penalty;
        }
        adjusted[static_cast<std::size_t>(v)] = logit;
      }
      int chosen;
      if (params.temperature == 0.0) {
        chosen = static_cast<int>(std::max_element(adjusted.begin(), adjusted.end()) -
                                  adjusted.begin());
      } else {
        double max_logit = *std::max_element(adjusted.begin(), adjusted.end());
        double total = 0.0;
        for (auto& v : adjusted) {
          v = std::exp((v - max_logit) / params.temperature);
          total += v;
        }
        double u = rng.u01() * total;
        double acc = 0.0;
        chosen = vocab - 1;  // guards against floating-point undershoot
        for (int v = 0; v < vocab; ++v) {
          acc += adjusted[static_cast<std::size_t>(v)];
          if (u < acc) {
            chosen = v;
            break;
          }
        }
      }
      seen_count[static_cast<std::size_t>(chosen)] += 1;
      tokens.push_back(policy.token(chosen));
    }
    sequences.push_back(std::move(tokens));
  }
  return sequences;
}

double title_similarity(const std::vector<std::string>& a,
                        const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  if (sa.empty() || sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

RankedCandidates rank_candidates(const std::vector<std::string>& generated_title_tokens,
                                 const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw ValidationError("empty candidate set");
  std::set<std::string> ids;
  int positives = 0;
  for (const auto& c : candidates) {
    if (!ids.insert(c.item_id).second) {
      throw ValidationError("duplicate candidate id: " + c.item_id);
    }
    positives += c.is_positive ? 1 : 0;
  }
  if (positives != 1) {
    throw ValidationError("candidate set must contain exactly one positive, got " +
                          std::to_string(positives));
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = title_similarity(generated_title_tokens, candidates[i].title_tokens);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  RankedCandidates out;
  out.ordered_ids.reserve(candidates.size());
  out.scores.reserve(candidates.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto& c = candidates[order[rank]];
    out.ordered_ids.push_back(c.item_id);
    out.scores.push_back(scores[order[rank]]);
    if (c.is_positive) out.positive_rank = static_cast<int>(rank) + 1;
  }
  return out;
}

MetricReport seren_metrics(const std::vector<int>& ranks,
                           const std::vector<int>& ks) {
  if (ranks.empty()) throw ValidationError("no ranks to aggregate");
  if (ks.empty()) throw ValidationError("no cutoffs given");
  for (int k : ks) {
    if (k <= 0) throw ValidationError("cutoff must be positive");
  }
  for (int r : ranks) {
    if (r <= 0) throw ValidationError("ranks are 1-based and positive");
  }
  MetricReport report;
  report.ks = ks;
  std::sort(report.ks.begin(), report.ks.end());
  report.ks.erase(std::unique(report.ks.begin(), report.ks.end()), report.ks.end());
  report.sample_count = ranks.size();
  double n = static_cast<double>(ranks.size());
  for (int k : report.ks) {
    double hr = 0.0, ndcg = 0.0, map = 0.0;
    for (int r : ranks) {
      if (r <= k) {
        hr += 1.0;
        ndcg += 1.0 / std::log2(1.0 + static_cast<double>(r));
        map += 1.0 / static_cast<double>(r);
      }
    }
    report.hr[k] = hr / n;
    report.ndcg[k] = ndcg / n;
    report.map[k] = map / n;
  }
  return report;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw SerenError("cannot open for writing: " + path.string());
  out << "k,hr,ndcg,map\n";
  out.precision(17);
  for (int k : report.ks) {
    out << k << ',' << report.hr.at(k) << ',' << report.ndcg.at(k) << ','
        << report.map.at(k) << '\n';
  }
  if (!out) throw SerenError("failed writing metrics: " + path.string());
}

DiversityReport diversity_metrics(
    const std::vector<std::vector<std::vector<std::string>>>& samples_per_user,
    const std::function<std::set<std::string>(const std::vector<std::string>&)>&
        retrieve_categories,
    const std::vector<std::string>& target_category_per_user) {
  if (samples_per_user.empty()) throw ValidationError("no users to evaluate");
  if (samples_per_user.size() != target_category_per_user.size()) {
    throw ValidationError("one target category is needed per user");
  }
  DiversityReport report;
  report.user_count = samples_per_user.size();
  double title_sum = 0.0, cate_sum = 0.0, hits = 0.0;
  for (std::size_t u = 0; u < samples_per_user.size(); ++u) {
    const auto& samples = samples_per_user[u];
    if (samples.empty()) throw ValidationError("user without generated samples");
    std::set<std::string> distinct_titles;
    std::set<std::string> categories;
    for (const auto& title : samples) {
      distinct_titles.insert(join_tokens(title));
      auto cats = retrieve_categories(title);
      categories.insert(cats.begin(), cats.end());
    }
    title_sum += static_cast<double>(distinct_titles.size());
    cate_sum += static_cast<double>(categories.size());
    if (categories.count(target_category_per_user[u]) > 0) hits += 1.0;
  }
  double n = static_cast<double>(report.user_count);
  report.avg_title_cnt = title_sum / n;
  report.avg_cate_cnt = cate_sum / n;
  report.hit_rate = hits / n;
  return report;
}

double time_inference(const std::function<void()>& call, int trials) {
  if (!call) throw ValidationError("time_inference needs a callable");
  if (trials <= 0) throw ValidationError("trials must be positive");
  call();  // warmup, untimed
  auto started = std::chrono::steady_clock::now();
  for (int i = 0; i < trials; ++i) call();
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                               started)
                     .count();
  return elapsed / static_cast<double>(trials);
}

}  // namespace seren
