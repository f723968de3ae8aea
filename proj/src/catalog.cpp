#include "seren/catalog.hpp"

#include <algorithm>

#include "seren/jsonl.hpp"

namespace seren {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::exposure: return "exposure";
    case EventKind::click: return "click";
    case EventKind::purchase: return "purchase";
    case EventKind::query: return "query";
  }
  return "exposure";
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "exposure") return EventKind::exposure;
  if (s == "click") return EventKind::click;
  if (s == "purchase") return EventKind::purchase;
  if (s == "query") return EventKind::query;
  throw ValidationError("unknown event kind: " + s);
}

// ---------------------------------------------------------------------------
// CategoryTree

CategoryTree CategoryTree::from_nodes(std::vector<CategoryNode> nodes) {
  CategoryTree tree;
  for (auto& n : nodes) {
    if (tree.nodes_.count(n.id)) {
      throw ValidationError("duplicate category id: " + n.id);
    }
    tree.nodes_.emplace(n.id, std::move(n));
  }
  for (const auto& [id, n] : tree.nodes_) {
    if (!n.parent) {
      if (!tree.root_.empty()) {
        throw ValidationError("multiple category roots: " + tree.root_ + ", " + id);
      }
      tree.root_ = id;
    } else {
      if (!tree.nodes_.count(*n.parent)) {
        throw ValidationError("category " + id + " references unknown parent " + *n.parent);
      }
      tree.children_[*n.parent].push_back(id);
    }
  }
  if (tree.root_.empty()) throw ValidationError("category tree has no root");

  // Reachability from the root doubles as the cycle check: a node on a cycle
  // detached from the root is never visited.
  std::vector<std::string> stack = {tree.root_};
  size_t seen = 0;
  std::map<std::string, bool> visited;
  while (!stack.empty()) {
    std::string id = stack.back();
    stack.pop_back();
    if (visited[id]) throw ValidationError("category tree contains a cycle at " + id);
    visited[id] = true;
    ++seen;
    auto it = tree.children_.find(id);
    if (it != tree.children_.end()) {
      for (const auto& c : it->second) stack.push_back(c);
    }
  }
  if (seen != tree.nodes_.size()) {
    throw ValidationError("category tree is not fully reachable from root (cycle or orphan)");
  }
  return tree;
}

bool CategoryTree::is_leaf(const std::string& id) const {
  if (!nodes_.count(id)) throw ValidationError("unknown category: " + id);
  auto it = children_.find(id);
  return it == children_.end() || it->second.empty();
}

const CategoryNode& CategoryTree::node(const std::string& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw ValidationError("unknown category: " + id);
  return it->second;
}

std::vector<std::string> CategoryTree::leaf_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, n] : nodes_) {
    (void)n;
    if (is_leaf(id)) out.push_back(id);
  }
  return out;
}

bool CategoryTree::operator==(const CategoryTree& other) const {
  if (nodes_.size() != other.nodes_.size() || root_ != other.root_) return false;
  for (const auto& [id, n] : nodes_) {
    auto it = other.nodes_.find(id);
    if (it == other.nodes_.end()) return false;
    if (n.parent != it->second.parent || n.name != it->second.name) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Catalog

const Item& Catalog::item(const std::string& item_id) const {
  auto it = items.find(item_id);
  if (it == items.end()) throw ValidationError("unknown item: " + item_id);
  return it->second;
}

const UserLog& Catalog::log(const std::string& user_id) const {
  auto it = logs.find(user_id);
  if (it == logs.end()) throw ValidationError("unknown user: " + user_id);
  return it->second;
}

const std::string& Catalog::atomic_category_of(const std::string& item_id) const {
  return item(item_id).atomic_category_id;
}

bool Catalog::operator==(const Catalog& other) const {
  return tree == other.tree && items == other.items && logs == other.logs;
}

// ---------------------------------------------------------------------------
// Ingestion

Catalog ingest(const std::string& categories_path, const std::string& items_path,
               const std::string& events_path, const IngestOptions& options,
               IngestReport* report, const std::string& users_path) {
  Catalog catalog;
  IngestReport local_report;
  IngestReport& rep = report ? *report : local_report;

  std::vector<CategoryNode> nodes;
  for_each_jsonl(categories_path, [&](const Json& rec, size_t line) {
    CategoryNode n;
    n.id = get_field<std::string>(rec, "category_id", categories_path, line);
    if (rec.contains("parent_id") && !rec["parent_id"].is_null()) {
      n.parent = get_field<std::string>(rec, "parent_id", categories_path, line);
    }
    n.name = get_field<std::string>(rec, "name", categories_path, line);
    nodes.push_back(std::move(n));
  });
  catalog.tree = CategoryTree::from_nodes(std::move(nodes));

  for_each_jsonl(items_path, [&](const Json& rec, size_t line) {
    Item item;
    item.item_id = get_field<std::string>(rec, "item_id", items_path, line);
    item.title = get_field<std::string>(rec, "title", items_path, line);
    item.title_tokens = tokenize(item.title);
    item.atomic_category_id = get_field<std::string>(rec, "category_id", items_path, line);
    item.brand_id = get_field<std::string>(rec, "brand_id", items_path, line);
    item.seller_id = get_field<std::string>(rec, "seller_id", items_path, line);
    if (item.title_tokens.empty()) {
      throw ParseError(items_path, line, "item " + item.item_id + " has empty title after normalization");
    }
    if (!catalog.tree.contains(item.atomic_category_id)) {
      throw ParseError(items_path, line,
                       "item " + item.item_id + " references unknown category " + item.atomic_category_id);
    }
    if (!catalog.tree.is_leaf(item.atomic_category_id)) {
      throw ParseError(items_path, line,
                       "item " + item.item_id + " category " + item.atomic_category_id + " is not atomic (not a leaf)");
    }
    if (!catalog.items.emplace(item.item_id, item).second) {
      throw ParseError(items_path, line, "duplicate item id: " + item.item_id);
    }
  });

  for_each_jsonl(events_path, [&](const Json& rec, size_t line) {
    InteractionEvent ev;
    ev.user_id = get_field<std::string>(rec, "user_id", events_path, line);
    ev.day = get_field<int>(rec, "day", events_path, line);
    ev.seq = get_field<int>(rec, "seq", events_path, line);
    ev.kind = event_kind_from_string(get_field<std::string>(rec, "kind", events_path, line));
    if (ev.day < 0) throw ParseError(events_path, line, "negative day index");
    if (ev.kind == EventKind::query) {
      ev.query_tokens = tokenize(get_field<std::string>(rec, "query_text", events_path, line));
    } else {
      ev.item_id = get_field<std::string>(rec, "item_id", events_path, line);
      if (!catalog.items.count(ev.item_id)) {
        throw ParseError(events_path, line, "event references unknown item \"" + ev.item_id + "\"");
      }
    }
    auto& log = catalog.logs[ev.user_id];
    log.user_id = ev.user_id;
    log.events.push_back(std::move(ev));
  });

  if (!users_path.empty()) {
    for_each_jsonl(users_path, [&](const Json& rec, size_t line) {
      std::string uid = get_field<std::string>(rec, "user_id", users_path, line);
      auto& log = catalog.logs[uid];
      log.user_id = uid;
      if (rec.contains("attributes")) {
        for (auto it = rec["attributes"].begin(); it != rec["attributes"].end(); ++it) {
          log.static_attributes[it.key()] =
              it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
        }
      }
    });
  }

  for (auto& [uid, log] : catalog.logs) {
    std::stable_sort(log.events.begin(), log.events.end(),
                     [](const InteractionEvent& a, const InteractionEvent& b) {
                       return a.day != b.day ? a.day < b.day : a.seq < b.seq;
                     });
    for (size_t i = 1; i < log.events.size(); ++i) {
      if (log.events[i - 1].day == log.events[i].day && log.events[i - 1].seq == log.events[i].seq) {
        throw ValidationError("user " + uid + " has duplicate (day,seq)=(" +
                              std::to_string(log.events[i].day) + "," +
                              std::to_string(log.events[i].seq) + ")");
      }
    }

    // Clicks and purchases require a same-or-earlier exposure of the same item
    // on the same day.
    std::vector<InteractionEvent> kept;
    kept.reserve(log.events.size());
    std::map<std::pair<std::string, int>, int> first_exposure_seq;
    for (const auto& ev : log.events) {
      if (ev.kind == EventKind::exposure) {
        auto key = std::make_pair(ev.item_id, ev.day);
        auto it = first_exposure_seq.find(key);
        if (it == first_exposure_seq.end()) first_exposure_seq.emplace(key, ev.seq);
        kept.push_back(ev);
        continue;
      }
      if (ev.kind == EventKind::click || ev.kind == EventKind::purchase) {
        auto it = first_exposure_seq.find({ev.item_id, ev.day});
        bool exposed = it != first_exposure_seq.end() && it->second <= ev.seq;
        if (!exposed) {
          std::string msg = "user " + uid + " " + to_string(ev.kind) + " on item " + ev.item_id +
                            " (day " + std::to_string(ev.day) + ", seq " + std::to_string(ev.seq) +
                            ") has no prior same-day exposure";
          if (options.click_policy == ClickPolicy::reject) throw ValidationError(msg);
          rep.warnings.push_back(msg + "; dropped");
          ++rep.dropped_events;
          continue;
        }
      }
      kept.push_back(ev);
    }
    log.events = std::move(kept);
  }

  return catalog;
}

// ---------------------------------------------------------------------------
// Writers (canonical form; ingest(write(model)) == model)

void write_categories(const std::string& path, const CategoryTree& tree) {
  std::vector<Json> recs;
  for (const auto& [id, n] : tree.nodes()) {
    Json rec;
    rec["category_id"] = id;
    rec["parent_id"] = n.parent ? Json(*n.parent) : Json(nullptr);
    rec["name"] = n.name;
    recs.push_back(std::move(rec));
  }
  write_jsonl(path, recs);
}

void write_items(const std::string& path, const std::map<std::string, Item>& items) {
  std::vector<Json> recs;
  for (const auto& [id, item] : items) {
    (void)id;
    recs.push_back(Json{{"item_id", item.item_id},
                        {"title", item.title},
                        {"category_id", item.atomic_category_id},
                        {"brand_id", item.brand_id},
                        {"seller_id", item.seller_id}});
  }
  write_jsonl(path, recs);
}

nlohmann::json event_to_json(const InteractionEvent& ev) {
  Json rec{{"user_id", ev.user_id}, {"day", ev.day}, {"seq", ev.seq}, {"kind", to_string(ev.kind)}};
  if (ev.kind == EventKind::query) {
    rec["query_text"] = join_tokens(ev.query_tokens);
  } else {
    rec["item_id"] = ev.item_id;
  }
  return rec;
}

InteractionEvent event_from_json(const nlohmann::json& rec) {
  InteractionEvent ev;
  try {
    ev.user_id = rec.at("user_id").get<std::string>();
    ev.day = rec.at("day").get<int>();
    ev.seq = rec.at("seq").get<int>();
    ev.kind = event_kind_from_string(rec.at("kind").get<std::string>());
    if (ev.kind == EventKind::query) {
      ev.query_tokens = tokenize(rec.value("query_text", std::string{}));
    } else {
      ev.item_id = rec.at("item_id").get<std::string>();
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed event record: ") + e.what());
  }
  if (ev.day < 0) throw ValidationError("event day is negative");
  return ev;
}

void write_events(const std::string& path, const std::map<std::string, UserLog>& logs) {
  std::vector<Json> recs;
  for (const auto& [uid, log] : logs) {
    (void)uid;
    for (const auto& ev : log.events) {
      recs.push_back(event_to_json(ev));
    }
  }
  write_jsonl(path, recs);
}

void write_users(const std::string& path, const std::map<std::string, UserLog>& logs) {
  std::vector<Json> recs;
  for (const auto& [uid, log] : logs) {
    Json attrs = Json::object();
    for (const auto& [k, v] : log.static_attributes) attrs[k] = v;
    recs.push_back(Json{{"user_id", uid}, {"attributes", attrs}});
  }
  write_jsonl(path, recs);
}

std::vector<int> visit_days(const UserLog& log) {
  std::vector<int> days;
  for (const auto& ev : log.events) {
    if (ev.kind != EventKind::exposure) continue;
    if (days.empty() || days.back() != ev.day) days.push_back(ev.day);
  }
  // Events are (day, seq) sorted, so collecting distinct exposure days in
  // order already yields a strictly increasing list.
  return days;
}

}  // namespace seren
