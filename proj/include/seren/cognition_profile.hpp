#pragma once
// Multi-level user cognition profiles: a static rendered text, a short-term
// tag list extracted from recent behavior and filtered through a per-user
// tag pool (prior + posterior approval checks), and a long-term tag list
// mined from the short-term history under admission criteria, all assembled
// into a generation prompt.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seren/catalog.hpp"
#include "seren/llm_gateway.hpp"
#include "seren/tags.hpp"

namespace seren {

struct TagCandidate {
  std::string text;
  TagKind kind = TagKind::interest;
  std::string rationale;
  int window_start_day = 0;
  int window_end_day = 0;

  bool operator==(const TagCandidate&) const = default;
};

struct TagKey {
  TagKind kind;
  std::string text;
  auto operator<=>(const TagKey&) const = default;
};

struct PoolEntry {
  int frequency = 0;  // extraction windows containing the tag
  int first_seen_day = 0;
  int last_seen_day = 0;
  std::string rationale;  // from the latest upsert

  bool operator==(const PoolEntry& other) const = default;
};

// Per-user store of approved ("credible") tags. Tags are identified by
// (kind, text); upserts only ever add or refresh entries.
class TagPool {
 public:
  bool contains(const TagKey& key) const { return entries_.count(key) > 0; }
  bool contains(TagKind kind, const std::string& text) const {
    return contains(TagKey{kind, text});
  }
  // Inserts with frequency 1 or increments frequency; last_seen_day is the
  // given day (days must not move backwards for the same tag).
  void upsert(const TagCandidate& candidate, int day);
  const std::map<TagKey, PoolEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  nlohmann::json to_json() const;
  static TagPool from_json(const nlohmann::json& j);

 private:
  std::map<TagKey, PoolEntry> entries_;
};

struct ScoredTag {
  TagCandidate tag;
  double score = 0.0;
  int frequency = 0;

  bool operator==(const ScoredTag&) const = default;
};

struct LongTermCriteria {
  int f_min = 3;    // minimum distinct periods containing the tag
  int r_of_last = 2;  // present in >= this many of the last `periods` periods
  int periods = 4;    // R, the recency horizon in periods
};

struct ProfileConfig {
  int short_window_days = 28;   // recent-behavior window for extraction
  double theta_rel = 0.5;       // posterior-check relevance threshold
  double half_life_days = 30.0; // H in the recency-decay score
  int top_k = 10;               // ranked tags kept per level
  int top_j = 3;                // candidates requested from the extractor
  int refresh_days = 15;        // scheduler period (used by callers)
  LongTermCriteria long_term;
};

struct CognitionProfile {
  std::string static_text;
  std::vector<ScoredTag> short_term;  // descending score
  std::vector<ScoredTag> long_term;   // descending score
};

// {placeholder} substitution. Unknown keys render as "unknown"; an unbalanced
// brace is a ValidationError. "{{" and "}}" escape literal braces.
std::string render_template(const std::string& templ,
                            const std::map<std::string, std::string>& values);

// Static profile from the log's static_attributes (plus user_id).
std::string render_static(const UserLog& log, const std::string& templ);

// The extraction prompt over the user's click/purchase events with day in
// [start_day, end_day], one "behavior:" line per event in (day, seq) order.
std::string render_behavior_prompt(const Catalog& catalog, const UserLog& log,
                                   int start_day, int end_day);

// Candidates from the extractor over the last window_days days ending at
// `today` (inclusive). Gateway errors propagate with window context attached.
std::vector<TagCandidate> extract_short_term(const Catalog& catalog,
                                             const UserLog& log,
                                             int window_days, int today,
                                             Gateway& extractor, int top_j);

// Prior check (already pooled) OR posterior check (max token-overlap
// relevance against any window item's title + category-name tokens >=
// theta_rel). Approved candidates are upserted into the pool at
// candidate.window_end_day.
bool approve(const Catalog& catalog, const TagCandidate& candidate,
             TagPool& pool, const std::vector<const Item*>& window_items,
             double theta_rel);

// Relevance term of the posterior check, exposed for tests:
// |tag tokens ∩ item tokens| / |tag tokens| maximized over window items.
double tag_relevance(const Catalog& catalog, const TagCandidate& candidate,
                     const std::vector<const Item*>& window_items);

// score = frequency * 2^(-(today - last_seen_day) / half_life); ties broken
// lexicographically by tag text, then kind; top-k returned.
std::vector<ScoredTag> score_and_rank(const TagPool& pool, int today, int k,
                                      double half_life_days);

// Admission over per-period short-term rankings (oldest first): a tag passes
// iff it appears in >= f_min distinct periods overall, in >= r_of_last of the
// last `periods` periods, and in the latest period. Candidates are returned
// in latest-period rank order.
std::vector<TagCandidate> mine_long_term(
    const std::vector<std::vector<ScoredTag>>& short_term_history,
    const LongTermCriteria& criteria);

// Refinement: the extractor may merge/rewrite the admitted candidates (the
// prompt lists them as "tag:" lines); refined tags then pass through the same
// approve + score_and_rank flow against the long-term pool.
std::vector<ScoredTag> refine_long_term(const Catalog& catalog,
                                        const std::vector<TagCandidate>& candidates,
                                        Gateway& extractor, TagPool& long_pool,
                                        const std::vector<const Item*>& window_items,
                                        const ProfileConfig& config, int today);

// Generation prompt assembling the profile plus recent item titles.
// Placeholders: {user_id} {static} {short_term} {long_term} {recent}; tag
// lists render as "text (kind)" joined by "; "; recent titles render one
// "recent: <title>" line each.
std::string render_prompt(const CognitionProfile& profile,
                          const std::vector<std::string>& recent_titles,
                          const std::string& templ,
                          const std::string& user_id = "");

extern const char* const kDefaultStaticTemplate;
extern const char* const kDefaultPromptTemplate;

// Drives the per-user refresh schedule: extraction, approval, ranking,
// long-term mining, and prompt assembly. State (pools, period history) lives
// here; the catalog and gateway are borrowed.
class ProfileEngine {
 public:
  ProfileEngine(const Catalog* catalog, Gateway* extractor, ProfileConfig config);

  // Runs one refresh for the user as of `today` and returns the profile.
  CognitionProfile refresh(const UserLog& log, int today);

  const ProfileConfig& config() const { return config_; }
  const TagPool& short_pool(const std::string& user_id) const;
  const TagPool& long_pool(const std::string& user_id) const;

  // Prompt for the latest refreshed profile of the user; recent_titles are
  // the titles of the user's most recent clicked items (caller-provided).
  std::string prompt_for(const std::string& user_id,
                         const CognitionProfile& profile,
                         const std::vector<std::string>& recent_titles) const;

  // Pool snapshots as JSON Lines records {user_id, short_pool, long_pool}.
  void save_pools(const std::filesystem::path& path) const;

 private:
  struct UserProfileState {
    TagPool short_pool;
    TagPool long_pool;
    std::vector<std::vector<ScoredTag>> period_history;
  };

  const Catalog* catalog_;
  Gateway* extractor_;
  ProfileConfig config_;
  std::map<std::string, UserProfileState> state_;
};

}  // namespace seren
