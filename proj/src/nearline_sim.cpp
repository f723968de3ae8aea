#include "seren/nearline_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

namespace seren {

namespace {

double sigmoid_p(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// One uniform draw from a derived seed without spinning up a full generator;
// used for the per-(user, day, item) click and purchase decisions so runs that
// differ only in fusion weight or cache period share their coin flips.
double hash_u01(std::uint64_t s) {
  return static_cast<double>(hash_mix(s) >> 11) * 0x1.0p-53;
}

std::vector<double> hashed_vec(const std::vector<std::string>& tokens, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  for (const auto& tok : tokens) v[fnv1a64(tok) % static_cast<std::uint64_t>(dim)] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

const std::array<const char*, 60> kNouns = {
    "tea",      "coffee",   "lamp",    "chair",   "desk",     "keyboard",
    "monitor",  "backpack", "jacket",  "sneaker", "boot",     "scarf",
    "kettle",   "pan",      "knife",   "blender", "mixer",    "toaster",
    "novel",    "atlas",    "journal", "easel",   "canvas",   "brush",
    "guitar",   "violin",   "drum",    "flute",   "speaker",  "headphone",
    "camera",   "tripod",   "lens",    "drone",   "router",   "charger",
    "tent",     "lantern",  "compass", "kayak",   "racket",   "dumbbell",
    "yoga",     "puzzle",   "kite",    "telescope", "globe",  "clock",
    "vase",     "rug",      "pillow",  "blanket", "curtain",  "mirror",
    "planter",  "shovel",   "seed",    "hose",    "grill",    "cooler"};

const std::array<const char*, 30> kAdjectives = {
    "compact", "deluxe",  "classic", "modern",  "vintage", "portable",
    "wireless", "folding", "ceramic", "bamboo",  "steel",   "leather",
    "woven",   "insulated", "ergonomic", "adjustable", "premium", "basic",
    "quiet",   "rapid",   "heavy",   "light",   "smart",   "manual",
    "outdoor", "indoor",  "travel",  "studio",  "pro",     "mini"};

const std::array<const char*, 20> kVariants = {
    "red",  "blue",  "green", "black", "white", "grey",  "amber",
    "ivory", "navy", "olive", "small", "large", "twin",  "set",
    "plus", "max",   "lite",  "xl",    "duo",   "trio"};

const std::array<const char*, 4> kSegments = {"student", "professional",
                                              "family", "senior"};

const std::array<const char*, 10> kCities = {
    "arden", "bryce", "calder", "dorset", "elgin",
    "fenwick", "garnet", "halcyon", "ivanhoe", "juniper"};

std::string pad_id(const char* prefix, int index, int width) {
  std::string digits = std::to_string(index);
  std::string out = prefix;
  out.append(width > static_cast<int>(digits.size())
                 ? static_cast<std::size_t>(width) - digits.size()
                 : 0,
             '0');
  out += digits;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// NearlineCache

std::optional<CacheEntry> NearlineCache::get(const std::string& user_id,
                                             double now_hours) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(user_id);
  if (it == entries_.end() || !it->second.valid_at(now_hours)) return std::nullopt;
  return it->second;
}

void NearlineCache::put(CacheEntry entry) {
  std::unique_lock lock(mu_);
  entries_[entry.user_id] = std::move(entry);
}

std::size_t NearlineCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// OnlineReport

long OnlineReport::total(long DayStats::* field) const {
  long sum = 0;
  for (const auto& d : days) sum += d.*field;
  return sum;
}

double OnlineReport::mean_s_pvr() const {
  long exp = total(&DayStats::exposures);
  return exp > 0 ? static_cast<double>(total(&DayStats::seren_exposures)) / exp : 0.0;
}

double OnlineReport::mean_ctr() const {
  long exp = total(&DayStats::exposures);
  return exp > 0 ? static_cast<double>(total(&DayStats::clicks)) / exp : 0.0;
}

double OnlineReport::mean_entropy() const {
  if (days.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : days) s += d.entropy;
  return s / static_cast<double>(days.size());
}

void write_report_csv(const std::filesystem::path& path, const OnlineReport& report) {
  std::ofstream out(path);
  if (!out) throw SerenError("cannot open " + path.string() + " for writing");
  out << "day,lookups,hits,qps,eqps,exposures,seren_exposures,clicks,seren_clicks,"
         "purchases,seren_purchases,uv3,entropy,s_pvr,ctr\n";
  for (const auto& d : report.days) {
    out << d.day << ',' << d.lookups << ',' << d.hits << ',' << d.qps << ','
        << d.eqps << ',' << d.exposures << ',' << d.seren_exposures << ','
        << d.clicks << ',' << d.seren_clicks << ',' << d.purchases << ','
        << d.seren_purchases << ',' << d.uv3 << ',' << format_double(d.entropy)
        << ',' << format_double(d.s_pvr) << ',' << format_double(d.ctr) << '\n';
  }
}

nlohmann::json report_summary_json(const OnlineReport& report, const SimConfig& config) {
  nlohmann::json j;
  j["days"] = report.days.size();
  j["users"] = config.users;
  j["seren_enabled"] = config.seren_enabled;
  j["seren_weight"] = config.seren_weight;
  j["cache_refresh_hours"] = config.cache_refresh_hours;
  j["qps_budget_per_day"] = config.qps_budget_per_day;
  j["seed"] = config.seed;
  j["lookups"] = report.total(&DayStats::lookups);
  j["hits"] = report.total(&DayStats::hits);
  j["qps"] = report.total(&DayStats::qps);
  j["eqps"] = report.total(&DayStats::eqps);
  j["exposures"] = report.total(&DayStats::exposures);
  j["seren_exposures"] = report.total(&DayStats::seren_exposures);
  j["clicks"] = report.total(&DayStats::clicks);
  j["seren_clicks"] = report.total(&DayStats::seren_clicks);
  j["purchases"] = report.total(&DayStats::purchases);
  j["seren_purchases"] = report.total(&DayStats::seren_purchases);
  j["uv3_days"] = report.total(&DayStats::uv3);
  j["mean_s_pvr"] = report.mean_s_pvr();
  j["mean_ctr"] = report.mean_ctr();
  j["mean_entropy"] = report.mean_entropy();
  j["stale_servings"] = report.stale_servings;
  j["max_regens_per_request"] = report.max_regens_per_request;
  return j;
}

// ---------------------------------------------------------------------------
// Synthetic world

Catalog make_synthetic_catalog(const SimConfig& config) {
  if (config.items <= 0 || config.categories <= 0 || config.users <= 0)
    throw ValidationError("synthetic catalog needs positive items, categories, users");
  Catalog cat;

  std::vector<CategoryNode> nodes;
  nodes.push_back({"root", std::nullopt, "root"});
  int n_groups = std::max(1, std::min(5, config.categories / 5));
  for (int g = 0; g < n_groups; ++g)
    nodes.push_back({pad_id("g", g, 1), "root", "group " + std::to_string(g)});
  std::vector<std::string> leaf_ids, leaf_nouns;
  for (int c = 0; c < config.categories; ++c) {
    std::string noun = c < static_cast<int>(kNouns.size())
                           ? kNouns[static_cast<std::size_t>(c)]
                           : "ware" + std::to_string(c);
    std::string id = pad_id("c", c, 3);
    nodes.push_back({id, pad_id("g", c % n_groups, 1), noun});
    leaf_ids.push_back(id);
    leaf_nouns.push_back(noun);
  }
  cat.tree = CategoryTree::from_nodes(std::move(nodes));

  int n_brands = std::max(1, config.items / 20);
  int n_sellers = std::max(1, config.items / 10);
  for (int i = 0; i < config.items; ++i) {
    Rng rng(Rng::derive(config.seed, "item", i));
    int c = i % config.categories;
    Item item;
    item.item_id = pad_id("i", i, 4);
    item.title = std::string(kAdjectives[rng.below(kAdjectives.size())]) + " " +
                 leaf_nouns[static_cast<std::size_t>(c)] + " " +
                 kVariants[rng.below(kVariants.size())];
    item.title_tokens = tokenize(item.title);
    item.atomic_category_id = leaf_ids[static_cast<std::size_t>(c)];
    item.brand_id = pad_id("b", static_cast<int>(rng.below(static_cast<uint64_t>(n_brands))), 3);
    item.seller_id = pad_id("s", static_cast<int>(rng.below(static_cast<uint64_t>(n_sellers))), 3);
    cat.items.emplace(item.item_id, std::move(item));
  }

  int uw = config.users > 1000 ? 4 : 3;
  for (int u = 0; u < config.users; ++u) {
    Rng rng(Rng::derive(config.seed, "user", u));
    UserLog log;
    log.user_id = pad_id("u", u, uw);
    log.static_attributes["age"] = std::to_string(18 + rng.below(48));
    log.static_attributes["segment"] = kSegments[rng.below(kSegments.size())];
    log.static_attributes["city"] = kCities[rng.below(kCities.size())];
    cat.logs.emplace(log.user_id, std::move(log));
  }
  return cat;
}

// ---------------------------------------------------------------------------
// Simulator

Simulator::Simulator(SimConfig config, const Catalog* catalog, Gateway* generator)
    : config_(std::move(config)),
      synthesized_(catalog ? Catalog{} : make_synthetic_catalog(config_)),
      catalog_(catalog ? catalog : &synthesized_),
      internal_heuristic_(make_gateway("heuristic")),
      generator_(generator ? generator : internal_heuristic_.get()),
      profiles_(catalog_, internal_heuristic_.get(), [this] {
        ProfileConfig pc;
        pc.refresh_days = config_.profile_refresh_days;
        return pc;
      }()) {
  if (config_.horizon_days <= 0) throw ValidationError("horizon_days must be positive");
  if (config_.page_size <= 0) throw ValidationError("page_size must be positive");
  if (config_.window_days <= 0) throw ValidationError("window_days must be positive");
  if (config_.profile_refresh_days <= 0)
    throw ValidationError("profile_refresh_days must be positive");
  if (config_.cache_refresh_hours <= 0)
    throw ValidationError("cache_refresh_hours must be positive");
  if (catalog_->items.empty()) throw ValidationError("simulation needs a non-empty catalog");

  // std::map iteration is already id-sorted.
  for (const auto& kv : catalog_->items) items_.push_back(&kv.second);
  for (int i = 0; i < static_cast<int>(items_.size()); ++i) {
    const Item& item = *items_[static_cast<std::size_t>(i)];
    item_index_[item.item_id] = i;
    items_by_category_[item.atomic_category_id].push_back(i);
    item_vecs_.push_back(hashed_vec(item.title_tokens, config_.vector_dim));
    for (const auto& tok : item.title_tokens) {
      auto& posting = token_index_[tok];
      if (posting.empty() || posting.back() != i) posting.push_back(i);
    }
  }
  for (const auto& kv : items_by_category_) category_ids_.push_back(kv.first);

  std::vector<std::string> user_ids;
  for (const auto& kv : catalog_->logs) user_ids.push_back(kv.first);
  if (user_ids.empty()) {
    int uw = config_.users > 1000 ? 4 : 3;
    for (int u = 0; u < config_.users; ++u) user_ids.push_back(pad_id("u", u, uw));
  }
  for (const auto& uid : user_ids) {
    UserSim user;
    user.user_id = uid;
    Rng arng(Rng::derive(config_.seed, "activity", uid));
    user.activity = arng.uniform(0.5, 4.5);
    Rng frng(Rng::derive(config_.seed, "affinity", uid));
    for (const auto& cid : category_ids_) user.affinity[cid] = frng.uniform(0.5, 1.5);
    users_.push_back(std::move(user));
  }
}

bool Simulator::category_novel(const UserSim& user, const std::string& category) const {
  for (const auto& day : user.window)
    if (day.categories.count(category)) return false;
  return true;
}

std::vector<ScoredCandidate> Simulator::personalized_channel(UserSim& user, int m,
                                                             Rng& rng) const {
  // Plackett-Luce category order: affinity/temperature plus Gumbel noise.
  std::vector<std::pair<double, const std::string*>> keys;
  keys.reserve(category_ids_.size());
  for (const auto& cid : category_ids_) {
    double u = rng.u01();
    if (u <= 0.0) u = 0x1.0p-53;
    double gumbel = -std::log(-std::log(u));
    keys.emplace_back(user.affinity.at(cid) / config_.explore_temperature + gumbel, &cid);
  }
  std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });

  std::vector<ScoredCandidate> out;
  for (const auto& [key, cid] : keys) {
    if (static_cast<int>(out.size()) >= m) break;
    double affinity = user.affinity.at(*cid);
    std::vector<int> pool = items_by_category_.at(*cid);
    rng.shuffle(pool);
    for (int idx : pool)
      out.push_back({items_[static_cast<std::size_t>(idx)]->item_id, affinity});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  if (static_cast<int>(out.size()) > m) out.resize(static_cast<std::size_t>(m));
  return out;
}

std::vector<ScoredCandidate> Simulator::retrieve_for_titles(
    const UserSim& user, const std::vector<std::string>& titles, int m) const {
  std::map<int, double> best;  // item index -> best cosine across titles
  for (const auto& title : titles) {
    auto tokens = tokenize(title);
    if (tokens.empty()) continue;
    std::set<int> cands;
    for (const auto& tok : tokens) {
      auto it = token_index_.find(tok);
      if (it != token_index_.end()) cands.insert(it->second.begin(), it->second.end());
    }
    auto tv = hashed_vec(tokens, config_.vector_dim);
    std::vector<std::pair<double, int>> dots;
    dots.reserve(items_.size());
    for (int i = 0; i < static_cast<int>(items_.size()); ++i)
      dots.emplace_back(dot(tv, item_vecs_[static_cast<std::size_t>(i)]), i);
    int keep = std::min<int>(m, static_cast<int>(dots.size()));
    std::partial_sort(dots.begin(), dots.begin() + keep, dots.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    for (int k = 0; k < keep; ++k) cands.insert(dots[static_cast<std::size_t>(k)].second);
    for (int idx : cands) {
      double d = dot(tv, item_vecs_[static_cast<std::size_t>(idx)]);
      auto [it, inserted] = best.emplace(idx, d);
      if (!inserted && d > it->second) it->second = d;
    }
  }
  std::vector<ScoredCandidate> out;
  out.reserve(best.size());
  for (const auto& [idx, cos] : best) {
    const Item& item = *items_[static_cast<std::size_t>(idx)];
    double novelty = category_novel(user, item.atomic_category_id) ? 1.0 : 0.25;
    out.push_back({item.item_id, cos * novelty});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  if (static_cast<int>(out.size()) > m) out.resize(static_cast<std::size_t>(m));
  return out;
}

std::vector<ScoredCandidate> Simulator::fuse(const std::vector<ScoredCandidate>& personalized,
                                             const std::vector<ScoredCandidate>& seren,
                                             double w, int page_size) const {
  auto normalized = [](const std::vector<ScoredCandidate>& v) {
    std::vector<ScoredCandidate> out = v;
    if (out.empty()) return out;
    double lo = out.front().score, hi = out.front().score;
    for (const auto& c : out) {
      lo = std::min(lo, c.score);
      hi = std::max(hi, c.score);
    }
    for (auto& c : out)
      c.score = hi - lo < 1e-12 ? 1.0 : (c.score - lo) / (hi - lo);
    return out;
  };
  std::map<std::string, double> merged;
  for (const auto& c : normalized(personalized)) {
    auto [it, inserted] = merged.emplace(c.item_id, c.score);
    if (!inserted && c.score > it->second) it->second = c.score;
  }
  for (const auto& c : normalized(seren)) {
    double s = c.score + w;
    auto [it, inserted] = merged.emplace(c.item_id, s);
    if (!inserted && s > it->second) it->second = s;
  }
  std::vector<ScoredCandidate> page;
  page.reserve(merged.size());
  for (const auto& [id, score] : merged) page.push_back({id, score});
  std::sort(page.begin(), page.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  if (static_cast<int>(page.size()) > page_size)
    page.resize(static_cast<std::size_t>(page_size));
  return page;
}

std::string Simulator::generation_prompt(const UserSim& user, int day) const {
  std::string prompt = user.prompt;
  if (!prompt.empty() && prompt.back() != '\n') prompt.push_back('\n');
  Rng rng(Rng::derive(config_.seed, "hint", user.user_id, day));
  std::set<int> chosen;
  int want = std::min<int>(config_.hint_size, static_cast<int>(items_.size()));
  while (static_cast<int>(chosen.size()) < want)
    chosen.insert(static_cast<int>(rng.below(items_.size())));
  for (int idx : chosen)
    prompt += "hint: " + items_[static_cast<std::size_t>(idx)]->title + "\n";
  return prompt;
}

void Simulator::refresh_profiles(int day) {
  for (auto& user : users_) {
    UserLog log;
    log.user_id = user.user_id;
    auto it = catalog_->logs.find(user.user_id);
    if (it != catalog_->logs.end()) log.static_attributes = it->second.static_attributes;
    log.events = user.events;
    CognitionProfile profile = profiles_.refresh(log, day);
    std::vector<std::string> recent(user.recent_clicked.begin(), user.recent_clicked.end());
    user.prompt = profiles_.prompt_for(user.user_id, profile, recent);
  }
}

void Simulator::serve_and_feedback(UserSim& user, int day, int req_index,
                                   double now_hours, DayStats& stats) {
  std::vector<ScoredCandidate> seren;
  if (config_.seren_enabled) {
    ++stats.lookups;
    auto entry = cache_.get(user.user_id, now_hours);
    if (entry) {
      ++stats.hits;
      if (!entry->valid_at(now_hours)) ++report_.stale_servings;
      seren = entry->candidates;
    } else {
      bool budget_ok = config_.qps_budget_per_day < 0 ||
                       qps_today_ < config_.qps_budget_per_day;
      if (!budget_ok) {
        ++stats.eqps;
      } else {
        int regens = 1;
        report_.max_regens_per_request =
            std::max(report_.max_regens_per_request, regens);
        try {
          std::map<std::string, std::string> params;
          params["n"] = std::to_string(config_.titles_per_generation);
          params["seed"] = std::to_string(
              Rng::derive(config_.seed, "gen", user.user_id, day, req_index));
          auto titles = generator_->generate(generation_prompt(user, day), params).titles;
          ++qps_today_;
          ++stats.qps;
          seren = retrieve_for_titles(user, titles, config_.seren_candidates);
          cache_.put({user.user_id, seren, now_hours,
                      static_cast<double>(config_.cache_refresh_hours)});
        } catch (const GatewayError&) {
          ++stats.eqps;
        }
      }
    }
  }

  Rng prng(Rng::derive(config_.seed, "pers", user.user_id, day, req_index));
  auto personalized = personalized_channel(user, config_.personalized_candidates, prng);
  auto page = fuse(personalized, seren, config_.seren_weight, config_.page_size);

  for (const auto& slot : page) {
    const Item& item = *items_[static_cast<std::size_t>(item_index_.at(slot.item_id))];
    bool cat_novel = category_novel(user, item.atomic_category_id);
    bool brand_novel = true, seller_novel = true;
    for (const auto& d : user.window) {
      if (d.brands.count(item.brand_id)) brand_novel = false;
      if (d.sellers.count(item.seller_id)) seller_novel = false;
    }
    bool s_related = cat_novel || brand_novel || seller_novel;

    ++stats.exposures;
    ++user.scroll_today;
    if (s_related) ++stats.seren_exposures;
    ++day_cat_counts_[item.atomic_category_id];
    user.today.categories.insert(item.atomic_category_id);
    user.today.brands.insert(item.brand_id);
    user.today.sellers.insert(item.seller_id);
    if (config_.record_events)
      user.events.push_back({user.user_id, item.item_id, day, user.seq_today++,
                             EventKind::exposure, {}});

    const auto& cm = config_.click;
    double p_click = sigmoid_p(cm.affinity_weight * user.affinity.at(item.atomic_category_id) +
                               cm.novelty_weight * (cat_novel ? 1.0 : 0.0) - cm.bias);
    if (hash_u01(Rng::derive(config_.seed, "click", user.user_id, day, item.item_id)) >=
        p_click)
      continue;

    ++stats.clicks;
    if (s_related) ++stats.seren_clicks;
    user.affinity.at(item.atomic_category_id) += cm.reinforce;
    user.events.push_back({user.user_id, item.item_id, day, user.seq_today++,
                           EventKind::click, {}});
    user.recent_clicked.push_back(item.title);
    while (static_cast<int>(user.recent_clicked.size()) > config_.recent_titles)
      user.recent_clicked.pop_front();

    if (hash_u01(Rng::derive(config_.seed, "buy", user.user_id, day, item.item_id)) <
        cm.purchase_prob) {
      ++stats.purchases;
      if (s_related) ++stats.seren_purchases;
      user.events.push_back({user.user_id, item.item_id, day, user.seq_today++,
                             EventKind::purchase, {}});
    }
  }
}

void Simulator::end_of_day(UserSim& user) {
  if (user.scroll_today > 0) {
    user.window.push_back(std::move(user.today));
    while (static_cast<int>(user.window.size()) > config_.window_days)
      user.window.pop_front();
  }
  user.today = {};
  user.scroll_today = 0;
  user.seq_today = 0;
}

OnlineReport Simulator::run() {
  if (ran_) throw SerenError("simulator already ran");
  ran_ = true;

  for (int day = 0; day < config_.horizon_days; ++day) {
    if (day % config_.profile_refresh_days == 0) refresh_profiles(day);
    qps_today_ = 0;
    day_cat_counts_.clear();
    DayStats stats;
    stats.day = day;

    struct Slot {
      double hour;
      std::size_t user;
      int req;
    };
    std::vector<Slot> schedule;
    for (std::size_t ui = 0; ui < users_.size(); ++ui) {
      auto& user = users_[ui];
      int reqs = std::max<int>(
          1, static_cast<int>(std::lround(config_.requests_per_user_per_day * user.activity)));
      Rng srng(Rng::derive(config_.seed, "sched", user.user_id, day));
      std::vector<double> hours;
      for (int r = 0; r < reqs; ++r) hours.push_back(srng.uniform(0.0, 24.0));
      std::sort(hours.begin(), hours.end());
      for (int r = 0; r < reqs; ++r) schedule.push_back({hours[static_cast<std::size_t>(r)], ui, r});
    }
    std::sort(schedule.begin(), schedule.end(), [this](const Slot& a, const Slot& b) {
      if (a.hour != b.hour) return a.hour < b.hour;
      if (a.user != b.user) return users_[a.user].user_id < users_[b.user].user_id;
      return a.req < b.req;
    });

    for (const auto& slot : schedule)
      serve_and_feedback(users_[slot.user], day, slot.req, day * 24.0 + slot.hour, stats);

    for (auto& user : users_) {
      if (user.scroll_today > 200) ++stats.uv3;
      end_of_day(user);
    }

    long total = 0;
    for (const auto& [cid, n] : day_cat_counts_) total += n;
    double entropy = 0.0;
    if (total > 0) {
      for (const auto& [cid, n] : day_cat_counts_) {
        double p = static_cast<double>(n) / static_cast<double>(total);
        entropy -= p * std::log(p);
      }
    }
    stats.entropy = entropy;
    stats.s_pvr = stats.exposures > 0
                      ? static_cast<double>(stats.seren_exposures) / stats.exposures
                      : 0.0;
    stats.ctr = stats.exposures > 0
                    ? static_cast<double>(stats.clicks) / stats.exposures
                    : 0.0;
    report_.days.push_back(stats);
  }
  return report_;
}

Catalog Simulator::corpus() const {
  if (!ran_) throw SerenError("corpus() requires a completed run");
  if (!config_.record_events)
    throw SerenError("corpus() requires record_events in the simulation config");
  Catalog out = *catalog_;
  for (const auto& user : users_) {
    UserLog& log = out.logs[user.user_id];
    log.user_id = user.user_id;
    log.events = user.events;
  }
  return out;
}

OnlineReport run_simulation(const SimConfig& config) {
  Simulator sim(config);
  return sim.run();
}

// ---------------------------------------------------------------------------
// Cache sweep

SweepReport cache_sweep(const SimConfig& config, const std::vector<int>& periods) {
  if (periods.empty()) throw ValidationError("cache_sweep needs at least one period");
  SweepReport report;
  for (int period : periods) {
    SimConfig cfg = config;
    cfg.cache_refresh_hours = period;
    OnlineReport r = run_simulation(cfg);
    SweepRow row;
    row.period_hours = period;
    row.s_pvr = r.mean_s_pvr();
    row.s_click = r.total(&DayStats::seren_clicks);
    row.ctr = r.mean_ctr();
    row.tv = r.total(&DayStats::purchases);
    row.uv3 = r.total(&DayStats::uv3);
    row.qps = r.total(&DayStats::qps);
    row.eqps = r.total(&DayStats::eqps);
    report.rows.push_back(row);
  }

  auto norm = [](double value, double max_value) {
    return max_value > 0.0 ? value / max_value : 0.0;
  };
  SweepRow maxima;
  for (const auto& r : report.rows) {
    maxima.s_pvr = std::max(maxima.s_pvr, r.s_pvr);
    maxima.s_click = std::max(maxima.s_click, r.s_click);
    maxima.ctr = std::max(maxima.ctr, r.ctr);
    maxima.tv = std::max(maxima.tv, r.tv);
    maxima.uv3 = std::max(maxima.uv3, r.uv3);
    maxima.qps = std::max(maxima.qps, r.qps);
    maxima.eqps = std::max(maxima.eqps, r.eqps);
  }
  for (const auto& r : report.rows) {
    SweepNormRow n;
    n.period_hours = r.period_hours;
    n.s_pvr = norm(r.s_pvr, maxima.s_pvr);
    n.s_click = norm(static_cast<double>(r.s_click), static_cast<double>(maxima.s_click));
    n.ctr = norm(r.ctr, maxima.ctr);
    n.tv = norm(static_cast<double>(r.tv), static_cast<double>(maxima.tv));
    n.uv3 = norm(static_cast<double>(r.uv3), static_cast<double>(maxima.uv3));
    n.qps = norm(static_cast<double>(r.qps), static_cast<double>(maxima.qps));
    n.eqps = norm(static_cast<double>(r.eqps), static_cast<double>(maxima.eqps));
    report.normalized.push_back(n);
  }
  return report;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepReport& report) {
  std::ofstream out(path);
  if (!out) throw SerenError("cannot open " + path.string() + " for writing");
  out << "period_hours,s_pvr,s_click,ctr,tv,uv3,qps,eqps,"
         "norm_s_pvr,norm_s_click,norm_ctr,norm_tv,norm_uv3,norm_qps,norm_eqps\n";
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    const auto& n = report.normalized[i];
    out << r.period_hours << ',' << format_double(r.s_pvr) << ',' << r.s_click
        << ',' << format_double(r.ctr) << ',' << r.tv << ',' << r.uv3 << ','
        << r.qps << ',' << r.eqps << ',' << format_double(n.s_pvr) << ','
        << format_double(n.s_click) << ',' << format_double(n.ctr) << ','
        << format_double(n.tv) << ',' << format_double(n.uv3) << ','
        << format_double(n.qps) << ',' << format_double(n.eqps) << '\n';
  }
}

}  // namespace seren
