#pragma once
// Collaborative data intervention: judge-based denoising of serendipity
// samples, teacher-scored preference-pair construction, an escalation file
// workflow standing in for human annotation, and the SFT/preference split.

#include <string>
#include <utility>
#include <vector>

#include "seren/llm_gateway.hpp"
#include "seren/seren_label.hpp"

namespace seren {

struct PreferencePair {
  std::string prompt;
  std::vector<std::string> preferred;     // y_w tokens
  std::vector<std::string> dispreferred;  // y_l tokens
  int score_w = 0;  // in [1, 6], > score_l
  int score_l = 0;

  bool operator==(const PreferencePair&) const = default;
};

struct EscalationRecord {
  enum class Kind { denoise, pair };

  Kind kind = Kind::denoise;
  nlohmann::json payload;                 // the ambiguous sample / responses
  std::optional<nlohmann::json> resolution;  // human-supplied
};

const char* to_string(EscalationRecord::Kind kind);
EscalationRecord::Kind escalation_kind_from_string(const std::string& s);

// Prompt renderers for the judge and teacher roles (the micro-format the
// heuristic backend parses; scripted backends key on the exact text).
std::string render_judge_prompt(const Catalog& catalog, const SerenSample& sample);
std::string render_score_prompt(const Catalog& catalog,
                                const std::vector<InteractionEvent>& context,
                                const std::vector<std::string>& response_tokens);

struct DenoiseResult {
  std::vector<SerenSample> clean;
  std::vector<SerenSample> dropped;
  std::vector<EscalationRecord> escalations;
};

// Verdict true with confidence >= conf_min -> clean; verdict false with
// confidence >= conf_min -> dropped; confidence < conf_min or judge failure
// -> escalated. Input order is preserved within each part, so
// |clean| + |dropped| + |escalations| == |samples| exactly.
DenoiseResult cdi_denoise(const Catalog& catalog,
                          const std::vector<SerenSample>& samples,
                          Gateway& judge, double conf_min = 0.7);

struct PairResult {
  std::vector<PreferencePair> pairs;
  std::vector<EscalationRecord> escalations;
  std::vector<int> scores;  // teacher score per response, input order
};

// Teacher scores each response in [1, 6]; ordered pairs with gap >= delta
// become PreferencePairs sorted by descending gap (ties: by winner then loser
// input position), capped at max_pairs; 0 < gap < delta escalates the pair;
// gap 0 is discarded. A teacher failure escalates the whole prompt.
PairResult cdi_pair(const Catalog& catalog,
                    const std::vector<InteractionEvent>& context,
                    const std::string& prompt,
                    const std::vector<std::vector<std::string>>& responses,
                    Gateway& teacher, int delta = 2, int max_pairs = 3);

// Seeded, disjoint, exhaustive partition; the first part receives
// ceil(n * a / (a + b)) samples ("first part gets the remainder").
std::pair<std::vector<SerenSample>, std::vector<SerenSample>> split_sft_pref(
    const std::vector<SerenSample>& dataset, std::pair<int, int> ratio,
    std::uint64_t seed);

// Escalation files: one JSON record per line with an optional `resolution`.
void write_escalations(const std::string& path,
                       const std::vector<EscalationRecord>& records);
std::vector<EscalationRecord> read_escalations(const std::string& path);

// Re-entry of resolved escalations. Denoise records resolved with
// {"is_serendipitous": true} rejoin the clean set; pair records resolved with
// {"score_w": int, "score_l": int} rejoin pair construction under the same
// gap rule (so every emitted pair still satisfies score_w - score_l >= delta).
// Unresolved records are skipped.
std::vector<SerenSample> resolved_denoise_samples(
    const std::vector<EscalationRecord>& records);
std::vector<PreferencePair> resolved_pairs(
    const std::vector<EscalationRecord>& records, int delta);

}  // namespace seren
