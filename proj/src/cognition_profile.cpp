#include "seren/cognition_profile.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "seren/jsonl.hpp"

namespace seren {

const char* const kDefaultStaticTemplate =
    "user {user_id}: age={age} segment={segment} city={city}";

const char* const kDefaultPromptTemplate =
    "user={user_id}\n"
    "static: {static}\n"
    "short_term: {short_term}\n"
    "long_term: {long_term}\n"
    "{recent}";

void TagPool::upsert(const TagCandidate& candidate, int day) {
  TagKey key{candidate.kind, candidate.text};
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_[key] = PoolEntry{1, day, day, candidate.rationale};
    return;
  }
  it->second.frequency += 1;
  it->second.last_seen_day = std::max(it->second.last_seen_day, day);
  it->second.rationale = candidate.rationale;
}

nlohmann::json TagPool::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [key, entry] : entries_) {
    arr.push_back(nlohmann::json{{"kind", to_string(key.kind)},
                                 {"text", key.text},
                                 {"frequency", entry.frequency},
                                 {"first_seen_day", entry.first_seen_day},
                                 {"last_seen_day", entry.last_seen_day},
                                 {"rationale", entry.rationale}});
  }
  return arr;
}

TagPool TagPool::from_json(const nlohmann::json& j) {
  TagPool pool;
  for (const auto& rec : j) {
    try {
      TagKey key{tag_kind_from_string(rec.at("kind").get<std::string>()),
                 rec.at("text").get<std::string>()};
      PoolEntry entry{rec.at("frequency").get<int>(),
                      rec.at("first_seen_day").get<int>(),
                      rec.at("last_seen_day").get<int>(),
                      rec.value("rationale", std::string{})};
      if (entry.frequency < 1) {
        throw ValidationError("pool entry with frequency < 1: " + key.text);
      }
      pool.entries_[key] = std::move(entry);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed pool record: ") + e.what());
    }
  }
  return pool;
}

std::string render_template(const std::string& templ,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(templ.size());
  for (std::size_t i = 0; i < templ.size(); ++i) {
    char c = templ[i];
    if (c == '{') {
      if (i + 1 < templ.size() && templ[i + 1] == '{') {
        out.push_back('{');
        ++i;
        continue;
      }
      auto end = templ.find('}', i + 1);
      if (end == std::string::npos) {
        throw ValidationError("unbalanced placeholder in template at offset " +
                              std::to_string(i));
      }
      std::string key = templ.substr(i + 1, end - i - 1);
      if (key.find('{') != std::string::npos) {
        throw ValidationError("nested placeholder in template at offset " +
                              std::to_string(i));
      }
      auto it = values.find(key);
      out += it == values.end() ? std::string("unknown") : it->second;
      i = end;
    } else if (c == '}') {
      if (i + 1 < templ.size() && templ[i + 1] == '}') {
        out.push_back('}');
        ++i;
        continue;
      }
      throw ValidationError("unbalanced '}' in template at offset " +
                            std::to_string(i));
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string render_static(const UserLog& log, const std::string& templ) {
  std::map<std::string, std::string> values = log.static_attributes;
  values["user_id"] = log.user_id;
  return render_template(templ, values);
}

std::string render_behavior_prompt(const Catalog& catalog, const UserLog& log,
                                   int start_day, int end_day) {
  std::ostringstream out;
  out << "task: extract_profile\n";
  out << "user: " << log.user_id << '\n';
  out << "window: " << start_day << ".." << end_day << '\n';
  for (const auto& ev : log.events) {
    if (ev.day < start_day || ev.day > end_day) continue;
    if (ev.kind != EventKind::click && ev.kind != EventKind::purchase) continue;
    const Item& item = catalog.item(ev.item_id);
    out << "behavior: kind=" << to_string(ev.kind)
        << " category=" << catalog.tree.node(item.atomic_category_id).name
        << " brand=" << item.brand_id << " title=" << item.title << '\n';
  }
  return out.str();
}

std::vector<TagCandidate> extract_short_term(const Catalog& catalog,
                                             const UserLog& log,
                                             int window_days, int today,
                                             Gateway& extractor, int top_j) {
  if (window_days < 1) throw ValidationError("window_days must be >= 1");
  int start_day = std::max(0, today - window_days + 1);
  std::string prompt = render_behavior_prompt(catalog, log, start_day, today);
  TagsPayload payload;
  try {
    payload = extractor.extract_profile(prompt, {{"top_j", std::to_string(top_j)}});
  } catch (const GatewayError& e) {
    throw GatewayError(e.kind(),
                       std::string(e.what()) + " (extracting user " + log.user_id +
                           " over days " + std::to_string(start_day) + ".." +
                           std::to_string(today) + ")");
  }
  std::vector<TagCandidate> out;
  out.reserve(payload.tags.size());
  for (const auto& tag : payload.tags) {
    TagCandidate cand;
    cand.text = tag.text;
    cand.kind = tag_kind_from_string(tag.kind);
    cand.rationale = tag.rationale;
    cand.window_start_day = start_day;
    cand.window_end_day = today;
    out.push_back(std::move(cand));
  }
  return out;
}

double tag_relevance(const Catalog& catalog, const TagCandidate& candidate,
                     const std::vector<const Item*>& window_items) {
  auto tag_tokens = tokenize(candidate.text);
  if (tag_tokens.empty()) return 0.0;
  std::set<std::string> tag_set(tag_tokens.begin(), tag_tokens.end());
  double best = 0.0;
  for (const Item* item : window_items) {
    std::set<std::string> item_tokens(item->title_tokens.begin(),
                                      item->title_tokens.end());
    auto cat_tokens = tokenize(catalog.tree.node(item->atomic_category_id).name);
    item_tokens.insert(cat_tokens.begin(), cat_tokens.end());
    std::size_t overlap = 0;
    for (const auto& t : tag_set) overlap += item_tokens.count(t);
    best = std::max(best, static_cast<double>(overlap) /
                              static_cast<double>(tag_set.size()));
  }
  return best;
}

bool approve(const Catalog& catalog, const TagCandidate& candidate,
             TagPool& pool, const std::vector<const Item*>& window_items,
             double theta_rel) {
  if (theta_rel < 0.0 || theta_rel > 1.0) {
    throw ValidationError("theta_rel must be in [0, 1]");
  }
  bool pooled = pool.contains(candidate.kind, candidate.text);
  if (!pooled && tag_relevance(catalog, candidate, window_items) < theta_rel) {
    return false;
  }
  pool.upsert(candidate, candidate.window_end_day);
  return true;
}

std::vector<ScoredTag> score_and_rank(const TagPool& pool, int today, int k,
                                      double half_life_days) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (!(half_life_days > 0.0)) throw ValidationError("half life must be positive");
  std::vector<ScoredTag> scored;
  scored.reserve(pool.size());
  for (const auto& [key, entry] : pool.entries()) {
    double age = static_cast<double>(today - entry.last_seen_day);
    double score = static_cast<double>(entry.frequency) *
                   std::exp2(-age / half_life_days);
    ScoredTag st;
    st.tag.text = key.text;
    st.tag.kind = key.kind;
    st.tag.rationale = entry.rationale;
    st.tag.window_start_day = entry.first_seen_day;
    st.tag.window_end_day = entry.last_seen_day;
    st.score = score;
    st.frequency = entry.frequency;
    scored.push_back(std::move(st));
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredTag& a, const ScoredTag& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.tag.text != b.tag.text) return a.tag.text < b.tag.text;
    return a.tag.kind < b.tag.kind;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<std::size_t>(k));
  return scored;
}

std::vector<TagCandidate> mine_long_term(
    const std::vector<std::vector<ScoredTag>>& short_term_history,
    const LongTermCriteria& criteria) {
  if (short_term_history.empty()) return {};
  if (criteria.f_min < 1 || criteria.r_of_last < 1 || criteria.periods < 1) {
    throw ValidationError("long-term criteria must all be >= 1");
  }
  std::map<TagKey, int> total_periods;
  std::map<TagKey, int> recent_periods;
  std::size_t n = short_term_history.size();
  std::size_t recent_from =
      n > static_cast<std::size_t>(criteria.periods)
          ? n - static_cast<std::size_t>(criteria.periods)
          : 0;
  for (std::size_t p = 0; p < n; ++p) {
    std::set<TagKey> present;
    for (const auto& st : short_term_history[p]) {
      present.insert(TagKey{st.tag.kind, st.tag.text});
    }
    for (const auto& key : present) {
      total_periods[key] += 1;
      if (p >= recent_from) recent_periods[key] += 1;
    }
  }
  std::vector<TagCandidate> admitted;
  for (const auto& st : short_term_history.back()) {  // latest-period rank order
    TagKey key{st.tag.kind, st.tag.text};
    if (total_periods[key] < criteria.f_min) continue;
    if (recent_periods[key] < criteria.r_of_last) continue;
    admitted.push_back(st.tag);
  }
  return admitted;
}

std::vector<ScoredTag> refine_long_term(const Catalog& catalog,
                                        const std::vector<TagCandidate>& candidates,
                                        Gateway& extractor, TagPool& long_pool,
                                        const std::vector<const Item*>& window_items,
                                        const ProfileConfig& config, int today) {
  if (candidates.empty() && long_pool.size() == 0) return {};
  if (!candidates.empty()) {
    std::ostringstream prompt;
    prompt << "task: refine_long_term\n";
    for (const auto& cand : candidates) {
      prompt << "tag: kind=" << to_string(cand.kind) << " text=" << cand.text
             << '\n';
    }
    TagsPayload refined = extractor.extract_profile(
        prompt.str(), {{"top_j", std::to_string(candidates.size())}});
    for (const auto& tag : refined.tags) {
      TagCandidate cand;
      cand.text = tag.text;
      cand.kind = tag_kind_from_string(tag.kind);
      cand.rationale = tag.rationale;
      cand.window_start_day = today;
      cand.window_end_day = today;
      approve(catalog, cand, long_pool, window_items, config.theta_rel);
    }
  }
  return score_and_rank(long_pool, today, config.top_k, config.half_life_days);
}

std::string render_prompt(const CognitionProfile& profile,
                          const std::vector<std::string>& recent_titles,
                          const std::string& templ, const std::string& user_id) {
  auto render_tags = [](const std::vector<ScoredTag>& tags) {
    std::ostringstream out;
    for (std::size_t i = 0; i < tags.size(); ++i) {
      if (i > 0) out << "; ";
      out << tags[i].tag.text << " (" << to_string(tags[i].tag.kind) << ')';
    }
    return out.str();
  };
  std::ostringstream recent;
  for (const auto& title : recent_titles) recent << "recent: " << title << '\n';
  std::map<std::string, std::string> values{
      {"user_id", user_id},
      {"static", profile.static_text},
      {"short_term", render_tags(profile.short_term)},
      {"long_term", render_tags(profile.long_term)},
      {"recent", recent.str()},
  };
  return render_template(templ, values);
}

ProfileEngine::ProfileEngine(const Catalog* catalog, Gateway* extractor,
                             ProfileConfig config)
    : catalog_(catalog), extractor_(extractor), config_(std::move(config)) {
  if (!catalog_ || !extractor_) {
    throw ValidationError("ProfileEngine needs a catalog and an extractor");
  }
}

CognitionProfile ProfileEngine::refresh(const UserLog& log, int today) {
  UserProfileState& st = state_[log.user_id];
  int start_day = std::max(0, today - config_.short_window_days + 1);

  // Window items, for the posterior relevance check.
  std::vector<const Item*> window_items;
  std::set<std::string> seen_items;
  for (const auto& ev : log.events) {
    if (ev.day < start_day || ev.day > today) continue;
    if (ev.item_id.empty()) continue;
    if (seen_items.insert(ev.item_id).second) {
      window_items.push_back(&catalog_->item(ev.item_id));
    }
  }

  auto candidates = extract_short_term(*catalog_, log, config_.short_window_days,
                                       today, *extractor_, config_.top_j);
  for (const auto& cand : candidates) {
    approve(*catalog_, cand, st.short_pool, window_items, config_.theta_rel);
  }
  CognitionProfile profile;
  profile.static_text = render_static(log, kDefaultStaticTemplate);
  profile.short_term =
      score_and_rank(st.short_pool, today, config_.top_k, config_.half_life_days);
  st.period_history.push_back(profile.short_term);

  auto admitted = mine_long_term(st.period_history, config_.long_term);
  profile.long_term = refine_long_term(*catalog_, admitted, *extractor_,
                                       st.long_pool, window_items, config_, today);
  return profile;
}

const TagPool& ProfileEngine::short_pool(const std::string& user_id) const {
  auto it = state_.find(user_id);
  if (it == state_.end()) throw ValidationError("no profile state for " + user_id);
  return it->second.short_pool;
}

const TagPool& ProfileEngine::long_pool(const std::string& user_id) const {
  auto it = state_.find(user_id);
  if (it == state_.end()) throw ValidationError("no profile state for " + user_id);
  return it->second.long_pool;
}

std::string ProfileEngine::prompt_for(const std::string& user_id,
                                      const CognitionProfile& profile,
                                      const std::vector<std::string>& recent_titles) const {
  return render_prompt(profile, recent_titles, kDefaultPromptTemplate, user_id);
}

void ProfileEngine::save_pools(const std::filesystem::path& path) const {
  std::vector<nlohmann::json> recs;
  for (const auto& [user_id, st] : state_) {
    recs.push_back(nlohmann::json{{"user_id", user_id},
                                  {"short_pool", st.short_pool.to_json()},
                                  {"long_pool", st.long_pool.to_json()}});
  }
  write_jsonl(path.string(), recs);
}

}  // namespace seren
