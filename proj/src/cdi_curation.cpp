#include "seren/cdi_curation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "seren/jsonl.hpp"

namespace seren {

const char* to_string(EscalationRecord::Kind kind) {
  switch (kind) {
    case EscalationRecord::Kind::denoise: return "denoise";
    case EscalationRecord::Kind::pair: return "pair";
  }
  return "denoise";
}

EscalationRecord::Kind escalation_kind_from_string(const std::string& s) {
  if (s == "denoise") return EscalationRecord::Kind::denoise;
  if (s == "pair") return EscalationRecord::Kind::pair;
  throw ValidationError("unknown escalation kind: " + s);
}

namespace {

void append_context_lines(std::ostream& out, const Catalog& catalog,
                          const std::vector<InteractionEvent>& context,
                          int before_day = -1) {
  for (const auto& ev : context) {
    if (ev.item_id.empty()) continue;
    // When a cutoff day is known, history from the target's own day is
    // excluded: novelty is judged against what the user saw on earlier days.
    if (before_day >= 0 && ev.day >= before_day) continue;
    const Item& item = catalog.item(ev.item_id);
    out << "context_category: "
        << catalog.tree.node(item.atomic_category_id).name << '\n';
    out << "context_title: " << item.title << '\n';
  }
}

}  // namespace

std::string render_judge_prompt(const Catalog& catalog, const SerenSample& sample) {
  std::ostringstream out;
  out << "task: judge_serendipity\n";
  out << "user: " << sample.user_id << '\n';
  append_context_lines(out, catalog, sample.context, sample.target_day);
  const Item& target = catalog.item(sample.target_item_id);
  out << "target_category: "
      << catalog.tree.node(target.atomic_category_id).name << '\n';
  out << "target_title: " << target.title << '\n';
  return out.str();
}

std::string render_score_prompt(const Catalog& catalog,
                                const std::vector<InteractionEvent>& context,
                                const std::vector<std::string>& response_tokens) {
  std::ostringstream out;
  out << "task: score_serendipity\n";
  append_context_lines(out, catalog, context);
  out << "response: " << join_tokens(response_tokens) << '\n';
  return out.str();
}

DenoiseResult cdi_denoise(const Catalog& catalog,
                          const std::vector<SerenSample>& samples,
                          Gateway& judge, double conf_min) {
  if (conf_min < 0.0 || conf_min > 1.0) {
    throw ValidationError("conf_min must be in [0, 1]");
  }
  DenoiseResult result;
  for (const auto& sample : samples) {
    VerdictPayload verdict;
    try {
      verdict = judge.judge(render_judge_prompt(catalog, sample));
    } catch (const GatewayError&) {
      EscalationRecord rec;
      rec.kind = EscalationRecord::Kind::denoise;
      rec.payload = sample_to_json(sample);
      result.escalations.push_back(std::move(rec));
      continue;
    }
    if (verdict.confidence < conf_min) {
      EscalationRecord rec;
      rec.kind = EscalationRecord::Kind::denoise;
      rec.payload = sample_to_json(sample);
      rec.payload["judge_rationale"] = verdict.rationale;
      rec.payload["judge_confidence"] = verdict.confidence;
      result.escalations.push_back(std::move(rec));
    } else if (verdict.is_serendipitous) {
      result.clean.push_back(sample);
    } else {
      result.dropped.push_back(sample);
    }
  }
  return result;
}

PairResult cdi_pair(const Catalog& catalog,
                    const std::vector<InteractionEvent>& context,
                    const std::string& prompt,
                    const std::vector<std::vector<std::string>>& responses,
                    Gateway& teacher, int delta, int max_pairs) {
  if (responses.size() < 2) throw ValidationError("need at least 2 responses to pair");
  if (delta < 1) throw ValidationError("delta must be >= 1");
  if (max_pairs < 1) throw ValidationError("max_pairs must be >= 1");

  PairResult result;
  result.scores.reserve(responses.size());
  for (const auto& response : responses) {
    try {
      result.scores.push_back(
          teacher.score(render_score_prompt(catalog, context, response)).score);
    } catch (const GatewayError& e) {
      // Teacher failure: the whole prompt is escalated, nothing is paired.
      EscalationRecord rec;
      rec.kind = EscalationRecord::Kind::pair;
      nlohmann::json resp_json = nlohmann::json::array();
      for (const auto& r : responses) resp_json.push_back(join_tokens(r));
      rec.payload = nlohmann::json{{"prompt", prompt},
                                   {"responses", std::move(resp_json)},
                                   {"error", e.what()}};
      PairResult failed;
      failed.escalations.push_back(std::move(rec));
      return failed;
    }
  }

  struct OrderedPair {
    int gap;
    std::size_t winner, loser;
  };
  std::vector<OrderedPair> keep, close;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    for (std::size_t j = 0; j < responses.size(); ++j) {
      if (i == j) continue;
      int gap = result.scores[i] - result.scores[j];
      if (gap <= 0) continue;  // gap 0 discarded; negatives are the mirror pair
      if (responses[i] == responses[j]) continue;  // degenerate text pair
      if (gap >= delta) keep.push_back({gap, i, j});
      else close.push_back({gap, i, j});
    }
  }
  auto by_gap_desc = [](const OrderedPair& a, const OrderedPair& b) {
    if (a.gap != b.gap) return a.gap > b.gap;
    if (a.winner != b.winner) return a.winner < b.winner;
    return a.loser < b.loser;
  };
  std::sort(keep.begin(), keep.end(), by_gap_desc);
  std::sort(close.begin(), close.end(), by_gap_desc);
  if (static_cast<int>(keep.size()) > max_pairs) {
    keep.resize(static_cast<std::size_t>(max_pairs));
  }
  for (const auto& op : keep) {
    PreferencePair pair;
    pair.prompt = prompt;
    pair.preferred = responses[op.winner];
    pair.dispreferred = responses[op.loser];
    pair.score_w = result.scores[op.winner];
    pair.score_l = result.scores[op.loser];
    result.pairs.push_back(std::move(pair));
  }
  for (const auto& op : close) {
    EscalationRecord rec;
    rec.kind = EscalationRecord::Kind::pair;
    rec.payload = nlohmann::json{
        {"prompt", prompt},
        {"response_w", join_tokens(responses[op.winner])},
        {"response_l", join_tokens(responses[op.loser])},
        {"score_w", result.scores[op.winner]},
        {"score_l", result.scores[op.loser]}};
    result.escalations.push_back(std::move(rec));
  }
  return result;
}

std::pair<std::vector<SerenSample>, std::vector<SerenSample>> split_sft_pref(
    const std::vector<SerenSample>& dataset, std::pair<int, int> ratio,
    std::uint64_t seed) {
  if (ratio.first < 0 || ratio.second < 0 || ratio.first + ratio.second == 0) {
    throw ValidationError("split ratio parts must be non-negative and not both zero");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::derive(seed, "split_sft_pref"));
  rng.shuffle(order);
  // ceil(n * a / (a + b)): the first part gets the remainder.
  std::size_t n = dataset.size();
  std::size_t first_count =
      (n * static_cast<std::size_t>(ratio.first) +
       static_cast<std::size_t>(ratio.first + ratio.second) - 1) /
      static_cast<std::size_t>(ratio.first + ratio.second);
  std::pair<std::vector<SerenSample>, std::vector<SerenSample>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < first_count) out.first.push_back(dataset[order[i]]);
    else out.second.push_back(dataset[order[i]]);
  }
  return out;
}

void write_escalations(const std::string& path,
                       const std::vector<EscalationRecord>& records) {
  std::vector<nlohmann::json> recs;
  recs.reserve(records.size());
  for (const auto& rec : records) {
    nlohmann::json j{{"kind", to_string(rec.kind)}, {"payload", rec.payload}};
    if (rec.resolution) j["resolution"] = *rec.resolution;
    recs.push_back(std::move(j));
  }
  write_jsonl(path, recs);
}

std::vector<EscalationRecord> read_escalations(const std::string& path) {
  std::vector<EscalationRecord> out;
  for_each_jsonl(path, [&](const nlohmann::json& j, size_t line) {
    EscalationRecord rec;
    try {
      rec.kind = escalation_kind_from_string(j.at("kind").get<std::string>());
      rec.payload = j.at("payload");
      if (j.contains("resolution") && !j.at("resolution").is_null()) {
        rec.resolution = j.at("resolution");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line, std::string("malformed escalation: ") + e.what());
    }
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<SerenSample> resolved_denoise_samples(
    const std::vector<EscalationRecord>& records) {
  std::vector<SerenSample> out;
  for (const auto& rec : records) {
    if (rec.kind != EscalationRecord::Kind::denoise || !rec.resolution) continue;
    bool verdict = false;
    try {
      verdict = rec.resolution->at("is_serendipitous").get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(
          std::string("denoise resolution needs is_serendipitous: ") + e.what());
    }
    if (verdict) out.push_back(sample_from_json(rec.payload));
  }
  return out;
}

std::vector<PreferencePair> resolved_pairs(
    const std::vector<EscalationRecord>& records, int delta) {
  if (delta < 1) throw ValidationError("delta must be >= 1");
  std::vector<PreferencePair> out;
  for (const auto& rec : records) {
    if (rec.kind != EscalationRecord::Kind::pair || !rec.resolution) continue;
    if (!rec.payload.contains("response_w")) continue;  // whole-prompt escalations
    int score_w = 0, score_l = 0;
    try {
      score_w = rec.resolution->at("score_w").get<int>();
      score_l = rec.resolution->at("score_l").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("pair resolution needs score_w/score_l: ") +
                            e.what());
    }
    if (score_w < 1 || score_w > 6 || score_l < 1 || score_l > 6) {
      throw ValidationError("resolved scores must be in [1, 6]");
    }
    // The human scores re-enter the same gap rule.
    if (score_w - score_l < delta) continue;
    PreferencePair pair;
    pair.prompt = rec.payload.at("prompt").get<std::string>();
    pair.preferred = tokenize(rec.payload.at("response_w").get<std::string>());
    pair.dispreferred = tokenize(rec.payload.at("response_l").get<std::string>());
    pair.score_w = score_w;
    pair.score_l = score_l;
    if (pair.preferred == pair.dispreferred) continue;
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace seren
