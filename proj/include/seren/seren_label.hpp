#pragma once
// Serendipity labeling.
//
// Offline criterion: the target must be clicked and its atomic category must
// not appear in any exposure on the window's most recent visit days strictly
// before the target's day.
//
// Online criterion ("serendipity-related"): an exposed item qualifies when at
// least one of its {atomic category, brand, seller} is absent from all
// exposures in the window; no click is required.

#include <set>
#include <string>
#include <vector>

#include "seren/catalog.hpp"

namespace seren {

enum class SerenDim { category, brand, seller };

const char* to_string(SerenDim dim);
SerenDim seren_dim_from_string(const std::string& s);

struct SerenWindow {
  int n_days = 10;  // visit days, not calendar days
  std::set<SerenDim> dims = {SerenDim::category};
};

inline SerenWindow online_window(int n_days = 10) {
  return SerenWindow{n_days, {SerenDim::category, SerenDim::brand, SerenDim::seller}};
}

struct SerenSample {
  enum class Source { rs_log, generator };

  std::string user_id;
  std::vector<InteractionEvent> context;  // strictly precedes the target
  std::string target_item_id;
  int target_day = -1;  // day of the target event; -1 = unknown
  bool label = false;
  Source source = Source::rs_log;
};

const char* to_string(SerenSample::Source source);
SerenSample::Source sample_source_from_string(const std::string& s);

// The set of dimension values exposed on the window.n_days most recent visit
// days strictly before `before_day`. Fewer visit days than n_days: all are
// used. Same-day exposures are excluded by construction.
struct ExposedDims {
  std::set<std::string> categories;
  std::set<std::string> brands;
  std::set<std::string> sellers;
};
ExposedDims exposed_dims_before(const Catalog& catalog, const UserLog& log,
                                int before_day, int n_days);

// Strict offline criterion. Preconditions: target belongs to log (checked),
// window.dims == {category}.
bool label_offline(const Catalog& catalog, const UserLog& log,
                   const InteractionEvent& target, const SerenWindow& window);

// Relaxed online criterion over window.dims (disjunctive novelty).
// Precondition: target is an exposure event belonging to log.
bool label_online(const Catalog& catalog, const UserLog& log,
                  const InteractionEvent& target, const SerenWindow& window);

// One positive sample per click satisfying label_offline; context truncated to
// the most recent context_len events strictly before the target.
std::vector<SerenSample> extract_dataset(const Catalog& catalog, const SerenWindow& window,
                                         int context_len = 50);

// Sample (de)serialization, one JSON record per sample.
nlohmann::json sample_to_json(const SerenSample& sample);
SerenSample sample_from_json(const nlohmann::json& rec);
void write_samples(const std::string& path, const std::vector<SerenSample>& samples);
std::vector<SerenSample> read_samples(const std::string& path);

}  // namespace seren
