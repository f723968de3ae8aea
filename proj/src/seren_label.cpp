#include "seren/seren_label.hpp"

#include <algorithm>

#include "seren/jsonl.hpp"

namespace seren {

const char* to_string(SerenDim dim) {
  switch (dim) {
    case SerenDim::category: return "category";
    case SerenDim::brand: return "brand";
    case SerenDim::seller: return "seller";
  }
  return "category";
}

SerenDim seren_dim_from_string(const std::string& s) {
  if (s == "category") return SerenDim::category;
  if (s == "brand") return SerenDim::brand;
  if (s == "seller") return SerenDim::seller;
  throw ValidationError("unknown serendipity dimension: " + s);
}

const char* to_string(SerenSample::Source source) {
  return source == SerenSample::Source::rs_log ? "rs_log" : "generator";
}

SerenSample::Source sample_source_from_string(const std::string& s) {
  if (s == "rs_log") return SerenSample::Source::rs_log;
  if (s == "generator") return SerenSample::Source::generator;
  throw ValidationError("unknown sample source: " + s);
}

static void require_in_log(const UserLog& log, const InteractionEvent& target) {
  auto it = std::find_if(log.events.begin(), log.events.end(), [&](const InteractionEvent& ev) {
    return ev.day == target.day && ev.seq == target.seq;
  });
  if (it == log.events.end() || !(*it == target)) {
    throw ValidationError("target event (day " + std::to_string(target.day) + ", seq " +
                          std::to_string(target.seq) + ") not found in log of user " + log.user_id);
  }
}

ExposedDims exposed_dims_before(const Catalog& catalog, const UserLog& log,
                                int before_day, int n_days) {
  std::vector<int> days = visit_days(log);
  auto cut = std::lower_bound(days.begin(), days.end(), before_day);
  size_t available = static_cast<size_t>(cut - days.begin());
  size_t take = std::min<size_t>(available, static_cast<size_t>(n_days));
  std::set<int> window_days(cut - static_cast<ptrdiff_t>(take), cut);

  ExposedDims out;
  if (window_days.empty()) return out;
  for (const auto& ev : log.events) {
    if (ev.day >= before_day) break;  // events sorted by day
    if (ev.kind != EventKind::exposure || !window_days.count(ev.day)) continue;
    const Item& item = catalog.item(ev.item_id);
    out.categories.insert(item.atomic_category_id);
    out.brands.insert(item.brand_id);
    out.sellers.insert(item.seller_id);
  }
  return out;
}

bool label_offline(const Catalog& catalog, const UserLog& log,
                   const InteractionEvent& target, const SerenWindow& window) {
  if (window.dims != std::set<SerenDim>{SerenDim::category}) {
    throw ValidationError("offline labeling is defined on dims={category}");
  }
  require_in_log(log, target);
  if (target.kind != EventKind::click) return false;
  ExposedDims seen = exposed_dims_before(catalog, log, target.day, window.n_days);
  return seen.categories.count(catalog.atomic_category_of(target.item_id)) == 0;
}

bool label_online(const Catalog& catalog, const UserLog& log,
                  const InteractionEvent& target, const SerenWindow& window) {
  if (window.dims.empty()) throw ValidationError("window.dims must be non-empty");
  require_in_log(log, target);
  if (target.kind != EventKind::exposure) {
    throw ValidationError("online labeling expects an exposure event");
  }
  const Item& item = catalog.item(target.item_id);
  ExposedDims seen = exposed_dims_before(catalog, log, target.day, window.n_days);
  for (SerenDim dim : window.dims) {
    switch (dim) {
      case SerenDim::category:
        if (!seen.categories.count(item.atomic_category_id)) return true;
        break;
      case SerenDim::brand:
        if (!seen.brands.count(item.brand_id)) return true;
        break;
      case SerenDim::seller:
        if (!seen.sellers.count(item.seller_id)) return true;
        break;
    }
  }
  return false;
}

std::vector<SerenSample> extract_dataset(const Catalog& catalog, const SerenWindow& window,
                                         int context_len) {
  std::vector<SerenSample> out;
  for (const auto& [uid, log] : catalog.logs) {
    for (size_t i = 0; i < log.events.size(); ++i) {
      const InteractionEvent& ev = log.events[i];
      if (ev.kind != EventKind::click) continue;
      if (!label_offline(catalog, log, ev, window)) continue;
      SerenSample sample;
      sample.user_id = uid;
      sample.target_item_id = ev.item_id;
      sample.target_day = ev.day;
      sample.label = true;
      sample.source = SerenSample::Source::rs_log;
      size_t take = std::min<size_t>(i, static_cast<size_t>(context_len));
      sample.context.assign(log.events.begin() + static_cast<ptrdiff_t>(i - take),
                            log.events.begin() + static_cast<ptrdiff_t>(i));
      out.push_back(std::move(sample));
    }
  }
  return out;
}

nlohmann::json sample_to_json(const SerenSample& sample) {
  nlohmann::json context = nlohmann::json::array();
  for (const auto& ev : sample.context) context.push_back(event_to_json(ev));
  return nlohmann::json{{"user_id", sample.user_id},
                        {"context", std::move(context)},
                        {"target_item_id", sample.target_item_id},
                        {"target_day", sample.target_day},
                        {"label", sample.label},
                        {"source", to_string(sample.source)}};
}

SerenSample sample_from_json(const nlohmann::json& rec) {
  SerenSample sample;
  try {
    sample.user_id = rec.at("user_id").get<std::string>();
    for (const auto& ev : rec.at("context")) {
      sample.context.push_back(event_from_json(ev));
    }
    sample.target_item_id = rec.at("target_item_id").get<std::string>();
    if (rec.contains("target_day")) sample.target_day = rec.at("target_day").get<int>();
    sample.label = rec.at("label").get<bool>();
    sample.source = sample_source_from_string(rec.at("source").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed sample record: ") + e.what());
  }
  return sample;
}

void write_samples(const std::string& path, const std::vector<SerenSample>& samples) {
  std::vector<nlohmann::json> recs;
  recs.reserve(samples.size());
  for (const auto& s : samples) recs.push_back(sample_to_json(s));
  write_jsonl(path, recs);
}

std::vector<SerenSample> read_samples(const std::string& path) {
  std::vector<SerenSample> out;
  for_each_jsonl(path, [&](const nlohmann::json& rec, size_t) {
    out.push_back(sample_from_json(rec));
  });
  return out;
}

}  // namespace seren
