#pragma once
// Profile tag taxonomy, shared by the gateway payloads and the profile engine.

#include <string>

#include "seren/common.hpp"

namespace seren {

enum class TagKind {
  preferred_category,
  preferred_brand,
  preferred_ip,
  preferred_attribute,
  interest,
  usage_scenario,
};

inline const char* to_string(TagKind kind) {
  switch (kind) {
    case TagKind::preferred_category: return "preferred_category";
    case TagKind::preferred_brand: return "preferred_brand";
    case TagKind::preferred_ip: return "preferred_ip";
    case TagKind::preferred_attribute: return "preferred_attribute";
    case TagKind::interest: return "interest";
    case TagKind::usage_scenario: return "usage_scenario";
  }
  return "interest";
}

inline TagKind tag_kind_from_string(const std::string& s) {
  if (s == "preferred_category") return TagKind::preferred_category;
  if (s == "preferred_brand") return TagKind::preferred_brand;
  if (s == "preferred_ip") return TagKind::preferred_ip;
  if (s == "preferred_attribute") return TagKind::preferred_attribute;
  if (s == "interest") return TagKind::interest;
  if (s == "usage_scenario") return TagKind::usage_scenario;
  throw ValidationError("unknown tag kind: " + s);
}

inline bool is_valid_tag_kind(const std::string& s) {
  try {
    tag_kind_from_string(s);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

}  // namespace seren
