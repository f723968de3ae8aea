#pragma once
// Catalog and interaction-log data model: category tree, items, user logs,
// JSON Lines ingestion with referential-integrity validation, and the
// visit-day scan used by the labelers.
//
// Everything here is immutable after ingestion and safe for concurrent reads.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seren/common.hpp"

namespace seren {

enum class EventKind { exposure, click, purchase, query };

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

struct CategoryNode {
  std::string id;
  std::optional<std::string> parent;  // nullopt marks the root
  std::string name;
};

// Rooted tree of categories. Atomic categories are exactly the leaves.
class CategoryTree {
 public:
  CategoryTree() = default;

  // Validates: exactly one root, no cycles, every node reachable, no dangling
  // parent references, no duplicate ids.
  static CategoryTree from_nodes(std::vector<CategoryNode> nodes);

  const std::string& root() const { return root_; }
  bool contains(const std::string& id) const { return nodes_.count(id) > 0; }
  bool is_leaf(const std::string& id) const;
  const CategoryNode& node(const std::string& id) const;
  std::vector<std::string> leaf_ids() const;
  size_t size() const { return nodes_.size(); }
  const std::map<std::string, CategoryNode>& nodes() const { return nodes_; }

  bool operator==(const CategoryTree& other) const;

 private:
  std::map<std::string, CategoryNode> nodes_;
  std::map<std::string, std::vector<std::string>> children_;
  std::string root_;
};

struct Item {
  std::string item_id;
  std::string title;  // raw form, preserved on write
  std::vector<std::string> title_tokens;
  std::string atomic_category_id;
  std::string brand_id;
  std::string seller_id;

  bool operator==(const Item& other) const = default;
};

struct InteractionEvent {
  std::string user_id;
  std::string item_id;  // empty for query events
  int day = 0;          // integer day index >= 0
  int seq = 0;          // within-day ordinal
  EventKind kind = EventKind::exposure;
  std::vector<std::string> query_tokens;  // query events only

  bool operator==(const InteractionEvent& other) const = default;
};

struct UserLog {
  std::string user_id;
  std::vector<InteractionEvent> events;  // sorted by (day, seq)
  std::map<std::string, std::string> static_attributes;

  bool operator==(const UserLog& other) const = default;
};

enum class ClickPolicy {
  drop_with_warning,  // default: orphan clicks/purchases are noise
  reject,
};

struct IngestOptions {
  ClickPolicy click_policy = ClickPolicy::drop_with_warning;
};

struct IngestReport {
  std::vector<std::string> warnings;
  size_t dropped_events = 0;
};

class Catalog {
 public:
  CategoryTree tree;
  std::map<std::string, Item> items;
  std::map<std::string, UserLog> logs;

  const Item& item(const std::string& item_id) const;
  const UserLog& log(const std::string& user_id) const;

  // Leaf category of an item; throws ValidationError on unknown item.
  const std::string& atomic_category_of(const std::string& item_id) const;

  bool operator==(const Catalog& other) const;
};

// File schemas (one JSON record per line):
//   categories: {category_id, parent_id|null, name}
//   items:      {item_id, title, category_id, brand_id, seller_id}
//   events:     {user_id, item_id?, day, seq, kind, query_text?}
//   users:      {user_id, attributes} (optional file; absent attributes render
//               as "unknown" downstream)
Catalog ingest(const std::string& categories_path, const std::string& items_path,
               const std::string& events_path, const IngestOptions& options = {},
               IngestReport* report = nullptr, const std::string& users_path = "");

void write_categories(const std::string& path, const CategoryTree& tree);
void write_items(const std::string& path, const std::map<std::string, Item>& items);
void write_events(const std::string& path, const std::map<std::string, UserLog>& logs);
void write_users(const std::string& path, const std::map<std::string, UserLog>& logs);

// Single-event record conversion, shared by the event writer and by sample /
// escalation files that embed events.
nlohmann::json event_to_json(const InteractionEvent& ev);
InteractionEvent event_from_json(const nlohmann::json& rec);

// Strictly increasing list of days on which the user has >= 1 exposure event.
// Clicks, purchases, and queries alone do not create visit days.
std::vector<int> visit_days(const UserLog& log);

}  // namespace seren
