#pragma once
// Dual-channel serving simulator: an online personalized channel driven by
// reinforced per-category affinities (the filter-bubble feedback loop) and a
// nearline serendipity channel whose candidates are generated behind a TTL
// cache, fused by weight w. The simulated clock advances in hours; requests
// are scheduled uniformly within each user's day. Everything is deterministic
// per seed: randomness flows through hash-derived substreams keyed by
// (purpose, user, day, ...), so runs with different fusion weights share
// their random decisions (common random numbers).

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "seren/catalog.hpp"
#include "seren/cognition_profile.hpp"
#include "seren/llm_gateway.hpp"

namespace seren {

struct ClickModelParams {
  double affinity_weight = 1.0;  // a
  double novelty_weight = 1.0;   // b
  double bias = 3.0;             // c: click prob = sigmoid(a*aff + b*nov - c)
  double purchase_prob = 0.10;   // per click
  double reinforce = 0.25;       // eta: affinity increment on click
};

struct SimConfig {
  int users = 100;
  int items = 1000;
  int categories = 25;
  int horizon_days = 30;
  int requests_per_user_per_day = 5;  // scaled by per-user activity in [0.5, 4.5]
  int page_size = 10;

  bool seren_enabled = true;
  double seren_weight = 0.5;        // w added to normalized serendipity scores
  int cache_refresh_hours = 24;     // T: cache TTL
  long qps_budget_per_day = -1;     // generations allowed per day; < 0 = unlimited

  int personalized_candidates = 30; // m for the personalized channel
  int seren_candidates = 8;         // m for the serendipity channel
  int window_days = 10;             // N visit days for novelty
  int profile_refresh_days = 15;
  int vector_dim = 64;              // hashed bag-of-tokens dimension
  double explore_temperature = 0.35;  // softmax temperature for category retrieval
  int titles_per_generation = 4;
  int hint_size = 12;               // catalog titles offered to the generator
  int recent_titles = 5;            // clicked titles carried into the prompt
  bool record_events = true;        // keep full logs (needed for corpus export)

  ClickModelParams click;
  std::uint64_t seed = 7;
};

struct ScoredCandidate {
  std::string item_id;
  double score = 0.0;
};

struct CacheEntry {
  std::string user_id;
  std::vector<ScoredCandidate> candidates;
  double created_at_hours = 0.0;
  double ttl_hours = 24.0;

  bool valid_at(double now_hours) const {
    return now_hours - created_at_hours <= ttl_hours;
  }
};

// Per-user candidate cache; reads are shared, replacement is exclusive, so a
// real service could sit multiple request threads on it.
class NearlineCache {
 public:
  std::optional<CacheEntry> get(const std::string& user_id, double now_hours) const;
  void put(CacheEntry entry);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, CacheEntry> entries_;
};

struct DayStats {
  int day = 0;
  long lookups = 0;  // serendipity-channel cache lookups
  long hits = 0;
  long qps = 0;      // generations executed
  long eqps = 0;     // failed generations (budget-denied or generator error)
  long exposures = 0;
  long seren_exposures = 0;  // serendipity-related under the online criterion
  long clicks = 0;
  long seren_clicks = 0;
  long purchases = 0;        // TV
  long seren_purchases = 0;  // S-TV
  long uv3 = 0;              // users with > 200 exposures this day
  double entropy = 0.0;      // natural-log entropy of the day's exposure categories
  double s_pvr = 0.0;        // seren_exposures / exposures
  double ctr = 0.0;          // clicks / exposures
};

struct OnlineReport {
  std::vector<DayStats> days;
  long stale_servings = 0;        // must stay 0 (cache safety)
  int max_regens_per_request = 0; // must stay <= 1

  long total(long DayStats::* field) const;
  double mean_s_pvr() const;
  double mean_ctr() const;
  double mean_entropy() const;
};

void write_report_csv(const std::filesystem::path& path, const OnlineReport& report);
nlohmann::json report_summary_json(const OnlineReport& report, const SimConfig& config);

// Synthetic world: 3-level category tree (root -> groups -> `categories`
// leaves), `items` items with word-pool titles correlated with their leaf
// category, `users` users with static attributes, empty logs.
Catalog make_synthetic_catalog(const SimConfig& config);

class Simulator {
 public:
  // catalog == nullptr synthesizes one from the config; generator == nullptr
  // uses an internal heuristic gateway for the generate role. The profile
  // extractor is always the internal heuristic gateway (deterministic).
  Simulator(SimConfig config, const Catalog* catalog = nullptr,
            Gateway* generator = nullptr);

  OnlineReport run();

  // The world the simulation ran against, with recorded logs merged in
  // (record_events must be on). Valid after run().
  Catalog corpus() const;

  const Catalog& world() const { return *catalog_; }

 private:
  struct UserSim {
    std::string user_id;
    double activity = 1.0;
    std::map<std::string, double> affinity;  // per leaf category
    struct DayDims {
      int day;
      std::set<std::string> categories, brands, sellers;
    };
    std::deque<DayDims> window;  // last N visit days, oldest first
    DayDims today;
    int scroll_today = 0;
    int seq_today = 0;
    std::string prompt;  // profile prompt, refreshed on schedule
    std::deque<std::string> recent_clicked;
    std::vector<InteractionEvent> events;  // recorded when record_events
  };

  std::vector<ScoredCandidate> personalized_channel(UserSim& user, int m, Rng& rng) const;
  std::vector<ScoredCandidate> retrieve_for_titles(const UserSim& user,
                                                   const std::vector<std::string>& titles,
                                                   int m) const;
  std::vector<ScoredCandidate> fuse(const std::vector<ScoredCandidate>& personalized,
                                    const std::vector<ScoredCandidate>& seren,
                                    double w, int page_size) const;
  std::string generation_prompt(const UserSim& user, int day) const;
  void refresh_profiles(int day);
  void serve_and_feedback(UserSim& user, int day, int req_index, double now_hours,
                          DayStats& stats);
  void end_of_day(UserSim& user);
  bool category_novel(const UserSim& user, const std::string& category) const;

  SimConfig config_;
  Catalog synthesized_;
  const Catalog* catalog_ = nullptr;
  std::shared_ptr<Gateway> internal_heuristic_;
  Gateway* generator_ = nullptr;
  ProfileEngine profiles_;

  std::vector<std::string> category_ids_;            // sorted leaf ids
  std::map<std::string, std::vector<int>> items_by_category_;
  std::vector<const Item*> items_;                   // sorted by item id
  std::map<std::string, int> item_index_;
  std::vector<std::vector<double>> item_vecs_;       // L2-normalized hashed vectors
  std::map<std::string, std::vector<int>> token_index_;  // token -> item indices

  std::vector<UserSim> users_;
  NearlineCache cache_;
  OnlineReport report_;
  long qps_today_ = 0;
  std::map<std::string, long> day_cat_counts_;  // for the daily entropy
  bool ran_ = false;
};

// run_simulation over a synthesized world per config.
OnlineReport run_simulation(const SimConfig& config);

struct SweepRow {
  int period_hours = 0;
  double s_pvr = 0.0;
  long s_click = 0;
  double ctr = 0.0;
  long tv = 0;
  long uv3 = 0;  // summed over days
  long qps = 0;
  long eqps = 0;
};

struct SweepNormRow {
  int period_hours = 0;
  double s_pvr = 0.0, s_click = 0.0, ctr = 0.0, tv = 0.0, uv3 = 0.0, qps = 0.0,
         eqps = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;            // one per period, input order
  std::vector<SweepNormRow> normalized;  // each metric divided by its max row value
};

// One full run per refresh period, identical seed and traffic.
SweepReport cache_sweep(const SimConfig& config, const std::vector<int>& periods);

void write_sweep_csv(const std::filesystem::path& path, const SweepReport& report);

}  // namespace seren
