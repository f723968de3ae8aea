#include "seren/llm_gateway.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include <httplib.h>

#include "seren/tags.hpp"

namespace seren {

namespace {

using nlohmann::json;

double jaccard(const std::vector<std::string>& a,
               const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  if (sa.empty() || sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct PromptLine {
  std::string key;
  std::string value;
};

std::vector<PromptLine> parse_prompt_lines(const std::string& prompt) {
  std::vector<PromptLine> lines;
  std::istringstream in(prompt);
  std::string raw;
  while (std::getline(in, raw)) {
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    auto pos = raw.find(": ");
    if (pos == std::string::npos) continue;
    lines.push_back({raw.substr(0, pos), raw.substr(pos + 2)});
  }
  return lines;
}

// Parses "kind=<k> category=<c> brand=<b> title=<t>" where values may contain
// spaces but the four markers appear in this fixed order.
struct BehaviorLine {
  std::string kind, category, brand, title;
};

std::optional<BehaviorLine> parse_behavior(const std::string& value) {
  auto slice = [&](const char* marker, const char* next) -> std::optional<std::string> {
    auto start = value.find(marker);
    if (start == std::string::npos) return std::nullopt;
    start += std::string(marker).size();
    auto end = next ? value.find(next, start) : std::string::npos;
    std::string out = end == std::string::npos ? value.substr(start)
                                               : value.substr(start, end - start);
    return out;
  };
  auto kind = slice("kind=", " category=");
  auto category = slice(" category=", " brand=");
  auto brand = slice(" brand=", " title=");
  auto title = slice(" title=", nullptr);
  if (!kind || !category || !brand || !title) return std::nullopt;
  return BehaviorLine{*kind, *category, *brand, *title};
}

int param_int(const std::map<std::string, std::string>& params,
              const std::string& key, int fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw GatewayError(GatewayErrorKind::validation,
                       "param " + key + " is not an integer: " + it->second);
  }
}

GatewayPayload heuristic_extract(const GatewayRequest& req) {
  int top_j = param_int(req.params, "top_j", 3);
  auto lines = parse_prompt_lines(req.prompt);

  // Refinement prompts list existing tags as "tag: kind=<k> text=<t>" lines;
  // the deterministic refiner is a deduplicating passthrough.
  std::vector<TagPayload> tag_lines;
  std::set<std::pair<std::string, std::string>> seen_tags;
  for (const auto& line : lines) {
    if (line.key != "tag") continue;
    auto kind_pos = line.value.find("kind=");
    auto text_pos = line.value.find(" text=");
    if (kind_pos == std::string::npos || text_pos == std::string::npos) continue;
    TagPayload tag;
    tag.kind = line.value.substr(kind_pos + 5, text_pos - (kind_pos + 5));
    tag.text = line.value.substr(text_pos + 6);
    tag.rationale = "refined";
    if (seen_tags.insert({tag.kind, tag.text}).second) {
      tag_lines.push_back(std::move(tag));
    }
  }
  if (!tag_lines.empty()) {
    if (static_cast<int>(tag_lines.size()) > top_j) {
      tag_lines.resize(static_cast<std::size_t>(top_j));
    }
    return TagsPayload{std::move(tag_lines)};
  }

  // Frequency of categories and brands over clicked/purchased behaviors.
  std::map<std::string, int> cat_freq, brand_freq;
  for (const auto& line : lines) {
    if (line.key != "behavior") continue;
    auto beh = parse_behavior(line.value);
    if (!beh) continue;
    if (beh->kind != "click" && beh->kind != "purchase") continue;
    if (!beh->category.empty()) cat_freq[beh->category] += 1;
    if (!beh->brand.empty()) brand_freq[beh->brand] += 1;
  }
  struct Entry {
    int freq;
    int kind_order;  // categories before brands on ties
    std::string text;
  };
  std::vector<Entry> entries;
  for (const auto& [text, freq] : cat_freq) entries.push_back({freq, 0, text});
  for (const auto& [text, freq] : brand_freq) entries.push_back({freq, 1, text});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    if (a.kind_order != b.kind_order) return a.kind_order < b.kind_order;
    return a.text < b.text;
  });
  TagsPayload out;
  for (const auto& e : entries) {
    if (static_cast<int>(out.tags.size()) >= top_j) break;
    TagPayload tag;
    tag.text = e.text;
    tag.kind = e.kind_order == 0 ? "preferred_category" : "preferred_brand";
    tag.rationale = "frequency=" + std::to_string(e.freq);
    out.tags.push_back(std::move(tag));
  }
  return out;
}

GatewayPayload heuristic_judge(const GatewayRequest& req) {
  std::set<std::string> context_cats;
  std::vector<std::vector<std::string>> context_titles;
  std::string target_cat;
  std::vector<std::string> target_title;
  for (const auto& line : parse_prompt_lines(req.prompt)) {
    if (line.key == "context_category") context_cats.insert(line.value);
    else if (line.key == "context_title") context_titles.push_back(tokenize(line.value));
    else if (line.key == "target_category") target_cat = line.value;
    else if (line.key == "target_title") target_title = tokenize(line.value);
  }
  if (target_cat.empty()) {
    throw GatewayError(GatewayErrorKind::validation,
                       "judge prompt is missing a target_category line");
  }
  VerdictPayload verdict;
  verdict.is_serendipitous = context_cats.count(target_cat) == 0;
  verdict.confidence = 0.9;
  if (verdict.is_serendipitous) {
    double max_sim = 0.0;
    for (const auto& ct : context_titles) max_sim = std::max(max_sim, jaccard(target_title, ct));
    if (max_sim >= 0.5) verdict.confidence = 0.6;  // novel category, familiar title
    verdict.rationale = "category " + target_cat + " absent from context";
  } else {
    verdict.rationale = "category " + target_cat + " already in context";
  }
  return verdict;
}

GatewayPayload heuristic_score(const GatewayRequest& req) {
  std::vector<std::string> response;
  std::vector<std::vector<std::string>> context_titles;
  for (const auto& line : parse_prompt_lines(req.prompt)) {
    if (line.key == "response") response = tokenize(line.value);
    else if (line.key == "context_title") context_titles.push_back(tokenize(line.value));
  }
  double max_sim = 0.0;
  for (const auto& ct : context_titles) max_sim = std::max(max_sim, jaccard(response, ct));
  double novelty = 1.0 - max_sim;
  int score = 1 + static_cast<int>(std::lround(5.0 * novelty));
  score = std::clamp(score, 1, 6);
  return ScorePayload{score};
}

GatewayPayload heuristic_generate(const GatewayRequest& req) {
  std::vector<std::string> hints;
  std::vector<std::vector<std::string>> recents;
  for (const auto& line : parse_prompt_lines(req.prompt)) {
    if (line.key == "hint") hints.push_back(line.value);
    else if (line.key == "recent") recents.push_back(tokenize(line.value));
  }
  int n = param_int(req.params, "n", 1);
  struct Scored {
    double novelty;
    std::size_t index;
  };
  std::vector<Scored> scored;
  for (std::size_t i = 0; i < hints.size(); ++i) {
    auto toks = tokenize(hints[i]);
    double max_sim = 0.0;
    for (const auto& r : recents) max_sim = std::max(max_sim, jaccard(toks, r));
    scored.push_back({1.0 - max_sim, i});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.novelty != b.novelty) return a.novelty > b.novelty;
    return a.index < b.index;
  });
  TitlesPayload out;
  for (const auto& s : scored) {
    if (static_cast<int>(out.titles.size()) >= n) break;
    out.titles.push_back(hints[s.index]);
  }
  return out;
}

std::string getenv_or(const char* key, const std::string& fallback) {
  const char* v = std::getenv(key);
  return v ? std::string(v) : fallback;
}

}  // namespace

const char* to_string(GatewayRole role) {
  switch (role) {
    case GatewayRole::extract_profile: return "extract_profile";
    case GatewayRole::judge: return "judge";
    case GatewayRole::score: return "score";
    case GatewayRole::generate: return "generate";
  }
  return "generate";
}

GatewayRole gateway_role_from_string(const std::string& s) {
  if (s == "extract_profile") return GatewayRole::extract_profile;
  if (s == "judge") return GatewayRole::judge;
  if (s == "score") return GatewayRole::score;
  if (s == "generate") return GatewayRole::generate;
  throw ValidationError("unknown gateway role: " + s);
}

void validate_payload(GatewayRole role, const GatewayPayload& payload) {
  auto wrong_shape = [&]() {
    throw GatewayError(GatewayErrorKind::validation,
                       std::string("payload shape does not match role ") +
                           to_string(role));
  };
  switch (role) {
    case GatewayRole::extract_profile: {
      const auto* tags = std::get_if<TagsPayload>(&payload);
      if (!tags) wrong_shape();
      for (const auto& tag : tags->tags) {
        if (tag.text.empty()) {
          throw GatewayError(GatewayErrorKind::validation, "tag with empty text");
        }
        if (!is_valid_tag_kind(tag.kind)) {
          throw GatewayError(GatewayErrorKind::validation,
                             "tag with unknown kind: " + tag.kind);
        }
      }
      break;
    }
    case GatewayRole::judge: {
      const auto* verdict = std::get_if<VerdictPayload>(&payload);
      if (!verdict) wrong_shape();
      if (!(verdict->confidence >= 0.0 && verdict->confidence <= 1.0)) {
        throw GatewayError(GatewayErrorKind::validation,
                           "judge confidence outside [0, 1]: " +
                               std::to_string(verdict->confidence));
      }
      break;
    }
    case GatewayRole::score: {
      const auto* score = std::get_if<ScorePayload>(&payload);
      if (!score) wrong_shape();
      if (score->score < 1 || score->score > 6) {
        throw GatewayError(GatewayErrorKind::validation,
                           "score outside [1, 6]: " + std::to_string(score->score));
      }
      break;
    }
    case GatewayRole::generate: {
      const auto* titles = std::get_if<TitlesPayload>(&payload);
      if (!titles) wrong_shape();
      for (const auto& t : titles->titles) {
        if (t.empty()) {
          throw GatewayError(GatewayErrorKind::validation, "generated title is empty");
        }
      }
      break;
    }
  }
}

nlohmann::json request_to_json(const GatewayRequest& req) {
  json params = json::object();
  for (const auto& [k, v] : req.params) params[k] = v;
  return json{{"request_id", req.request_id},
              {"role", to_string(req.role)},
              {"prompt", req.prompt},
              {"params", params}};
}

GatewayRequest request_from_json(const nlohmann::json& j) {
  GatewayRequest req;
  try {
    req.request_id = j.at("request_id").get<std::uint64_t>();
    req.role = gateway_role_from_string(j.at("role").get<std::string>());
    req.prompt = j.at("prompt").get<std::string>();
    if (j.contains("params")) {
      for (const auto& [k, v] : j.at("params").items()) {
        req.params[k] = v.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw GatewayError(GatewayErrorKind::protocol,
                       std::string("malformed request: ") + e.what());
  }
  return req;
}

nlohmann::json payload_to_json(const GatewayPayload& payload) {
  if (const auto* tags = std::get_if<TagsPayload>(&payload)) {
    json arr = json::array();
    for (const auto& tag : tags->tags) {
      arr.push_back(json{{"text", tag.text},
                         {"kind", tag.kind},
                         {"rationale", tag.rationale}});
    }
    return json{{"tags", arr}};
  }
  if (const auto* verdict = std::get_if<VerdictPayload>(&payload)) {
    return json{{"is_serendipitous", verdict->is_serendipitous},
                {"rationale", verdict->rationale},
                {"confidence", verdict->confidence}};
  }
  if (const auto* score = std::get_if<ScorePayload>(&payload)) {
    return json{{"score", score->score}};
  }
  const auto& titles = std::get<TitlesPayload>(payload);
  return json{{"titles", titles.titles}};
}

GatewayPayload payload_from_json(GatewayRole role, const nlohmann::json& j) {
  try {
    switch (role) {
      case GatewayRole::extract_profile: {
        TagsPayload out;
        for (const auto& t : j.at("tags")) {
          TagPayload tag;
          tag.text = t.at("text").get<std::string>();
          tag.kind = t.at("kind").get<std::string>();
          tag.rationale = t.value("rationale", std::string{});
          out.tags.push_back(std::move(tag));
        }
        return out;
      }
      case GatewayRole::judge: {
        VerdictPayload out;
        out.is_serendipitous = j.at("is_serendipitous").get<bool>();
        out.rationale = j.value("rationale", std::string{});
        out.confidence = j.at("confidence").get<double>();
        return out;
      }
      case GatewayRole::score:
        return ScorePayload{j.at("score").get<int>()};
      case GatewayRole::generate: {
        TitlesPayload out;
        out.titles = j.at("titles").get<std::vector<std::string>>();
        return out;
      }
    }
  } catch (const json::exception& e) {
    throw GatewayError(GatewayErrorKind::protocol,
                       std::string("malformed payload: ") + e.what());
  }
  throw GatewayError(GatewayErrorKind::protocol, "unhandled role");
}

nlohmann::json response_to_json(const GatewayResponse& resp) {
  return json{{"request_id", resp.request_id},
              {"payload", payload_to_json(resp.payload)},
              {"latency_ms", resp.latency_ms}};
}

GatewayResponse response_from_json(GatewayRole role, const nlohmann::json& j) {
  GatewayResponse resp;
  try {
    resp.request_id = j.at("request_id").get<std::uint64_t>();
    resp.payload = payload_from_json(role, j.at("payload"));
    resp.latency_ms = j.value("latency_ms", 0.0);
  } catch (const json::exception& e) {
    throw GatewayError(GatewayErrorKind::protocol,
                       std::string("malformed response: ") + e.what());
  }
  return resp;
}

Gateway::Gateway(std::shared_ptr<GatewayBackend> backend)
    : backend_(std::move(backend)) {
  if (!backend_) throw ValidationError("gateway requires a backend");
  name_ = backend_->name();
}

GatewayResponse Gateway::call(GatewayRequest req) {
  if (req.request_id == 0) req.request_id = next_id_++;
  GatewayResponse resp = backend_->call(req);
  if (resp.request_id != req.request_id) {
    throw GatewayError(GatewayErrorKind::protocol,
                       "response id " + std::to_string(resp.request_id) +
                           " does not match request id " +
                           std::to_string(req.request_id));
  }
  validate_payload(req.role, resp.payload);
  return resp;
}

TagsPayload Gateway::extract_profile(const std::string& prompt,
                                     std::map<std::string, std::string> params) {
  GatewayRequest req;
  req.role = GatewayRole::extract_profile;
  req.prompt = prompt;
  req.params = std::move(params);
  return std::get<TagsPayload>(call(std::move(req)).payload);
}

VerdictPayload Gateway::judge(const std::string& prompt,
                              std::map<std::string, std::string> params) {
  GatewayRequest req;
  req.role = GatewayRole::judge;
  req.prompt = prompt;
  req.params = std::move(params);
  return std::get<VerdictPayload>(call(std::move(req)).payload);
}

ScorePayload Gateway::score(const std::string& prompt,
                            std::map<std::string, std::string> params) {
  GatewayRequest req;
  req.role = GatewayRole::score;
  req.prompt = prompt;
  req.params = std::move(params);
  return std::get<ScorePayload>(call(std::move(req)).payload);
}

TitlesPayload Gateway::generate(const std::string& prompt,
                                std::map<std::string, std::string> params) {
  GatewayRequest req;
  req.role = GatewayRole::generate;
  req.prompt = prompt;
  req.params = std::move(params);
  return std::get<TitlesPayload>(call(std::move(req)).payload);
}

std::uint64_t ScriptedBackend::key_of(GatewayRole role, const std::string& prompt) {
  return hash_mix(fnv1a64(to_string(role)) ^ hash_mix(fnv1a64(prompt)));
}

void ScriptedBackend::add(GatewayRole role, const std::string& prompt,
                          GatewayPayload payload) {
  canned_[key_of(role, prompt)] = std::move(payload);
}

void ScriptedBackend::add_default(GatewayRole role, GatewayPayload payload) {
  defaults_[role] = std::move(payload);
}

void ScriptedBackend::add_failure(GatewayRole role, const std::string& prompt,
                                  GatewayErrorKind kind, const std::string& msg) {
  failures_[key_of(role, prompt)] = Failure{kind, msg};
}

GatewayResponse ScriptedBackend::call(const GatewayRequest& req) {
  auto key = key_of(req.role, req.prompt);
  if (auto it = failures_.find(key); it != failures_.end()) {
    throw GatewayError(it->second.kind, it->second.msg);
  }
  GatewayResponse resp;
  resp.request_id = req.request_id;
  if (auto it = canned_.find(key); it != canned_.end()) {
    resp.payload = it->second;
    return resp;
  }
  if (auto it = defaults_.find(req.role); it != defaults_.end()) {
    resp.payload = it->second;
    return resp;
  }
  throw GatewayError(GatewayErrorKind::protocol,
                     std::string("no scripted response for role ") +
                         to_string(req.role));
}

GatewayResponse HeuristicBackend::call(const GatewayRequest& req) {
  GatewayResponse resp;
  resp.request_id = req.request_id;
  switch (req.role) {
    case GatewayRole::extract_profile: resp.payload = heuristic_extract(req); break;
    case GatewayRole::judge: resp.payload = heuristic_judge(req); break;
    case GatewayRole::score: resp.payload = heuristic_score(req); break;
    case GatewayRole::generate: resp.payload = heuristic_generate(req); break;
  }
  return resp;
}

GeneratorFnBackend::GeneratorFnBackend(GenerateFn fn, std::string name)
    : fn_(std::move(fn)), name_(std::move(name)) {
  if (!fn_) throw ValidationError("GeneratorFnBackend requires a function");
}

GatewayResponse GeneratorFnBackend::call(const GatewayRequest& req) {
  if (req.role != GatewayRole::generate) {
    throw GatewayError(GatewayErrorKind::validation,
                       name_ + " backend only serves the generate role");
  }
  GatewayResponse resp;
  resp.request_id = req.request_id;
  resp.payload = TitlesPayload{fn_(req.prompt, req.params)};
  return resp;
}

ExternalBackend::ExternalBackend(std::string endpoint, int timeout_ms)
    : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {
  if (endpoint_.empty()) endpoint_ = getenv_or("SEREN_GATEWAY_ENDPOINT", "");
  if (timeout_ms_ <= 0) {
    auto raw = getenv_or("SEREN_GATEWAY_TIMEOUT_MS", "2000");
    try {
      timeout_ms_ = std::stoi(raw);
    } catch (const std::exception&) {
      timeout_ms_ = 2000;
    }
  }
  if (endpoint_.empty()) {
    throw ValidationError(
        "external gateway needs an endpoint (constructor argument or "
        "SEREN_GATEWAY_ENDPOINT)");
  }
}

GatewayResponse ExternalBackend::call(const GatewayRequest& req) {
  // Split "http://host:port/path" into base and path.
  std::string base = endpoint_;
  std::string path = "/";
  auto scheme_end = base.find("://");
  auto path_start = base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start != std::string::npos) {
    path = base.substr(path_start);
    base = base.substr(0, path_start);
  }
  auto started = std::chrono::steady_clock::now();
  auto body = request_to_json(req).dump();
  httplib::Client client(base);
  client.set_connection_timeout(0, timeout_ms_ * 1000);
  client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
  client.set_write_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);

  httplib::Result result{nullptr, httplib::Error::Unknown};
  for (int attempt = 0; attempt < 2; ++attempt) {
    result = client.Post(path, body, "application/json");
    if (result) break;
  }
  if (!result) {
    throw GatewayError(GatewayErrorKind::timeout,
                       "no response from " + endpoint_ + " after retry");
  }
  if (result->status != 200) {
    throw GatewayError(GatewayErrorKind::protocol,
                       "gateway endpoint returned status " +
                           std::to_string(result->status));
  }
  json parsed;
  try {
    parsed = json::parse(result->body);
  } catch (const json::exception& e) {
    throw GatewayError(GatewayErrorKind::protocol,
                       std::string("unparseable response body: ") + e.what());
  }
  GatewayResponse resp = response_from_json(req.role, parsed);
  auto elapsed = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - started)
                     .count();
  resp.latency_ms = elapsed;
  return resp;
}

SubprocessBackend::SubprocessBackend(std::vector<std::string> argv)
    : argv_(std::move(argv)) {
  if (argv_.empty()) throw ValidationError("subprocess backend needs a command");
}

SubprocessBackend::~SubprocessBackend() { shutdown(); }

void SubprocessBackend::ensure_started() {
  if (child_pid_ > 0) return;
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0) {
    throw GatewayError(GatewayErrorKind::protocol, "failed to create pipes");
  }
  pid_t pid = fork();
  if (pid < 0) {
    throw GatewayError(GatewayErrorKind::protocol, "fork failed");
  }
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    std::vector<char*> cargv;
    cargv.reserve(argv_.size() + 1);
    for (auto& a : argv_) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    execvp(cargv[0], cargv.data());
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  child_pid_ = pid;
  to_child_ = to_child[1];
  from_child_ = from_child[0];
  read_buf_.clear();
}

void SubprocessBackend::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (child_pid_ > 0) {
    int status = 0;
    waitpid(child_pid_, &status, 0);
    child_pid_ = -1;
  }
}

GatewayResponse SubprocessBackend::call(const GatewayRequest& req) {
  ensure_started();
  auto started = std::chrono::steady_clock::now();
  std::string line = request_to_json(req).dump();
  line.push_back('\n');
  std::size_t written = 0;
  while (written < line.size()) {
    ssize_t n = write(to_child_, line.data() + written, line.size() - written);
    if (n <= 0) {
      shutdown();
      throw GatewayError(GatewayErrorKind::protocol,
                         "subprocess stdin closed while writing request");
    }
    written += static_cast<std::size_t>(n);
  }
  // Read one full line back (the child may batch writes arbitrarily).
  std::string reply;
  for (;;) {
    auto nl = read_buf_.find('\n');
    if (nl != std::string::npos) {
      reply = read_buf_.substr(0, nl);
      read_buf_.erase(0, nl + 1);
      break;
    }
    char chunk[4096];
    ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n <= 0) {
      shutdown();
      throw GatewayError(GatewayErrorKind::protocol,
                         "subprocess stdout closed before a full response line");
    }
    read_buf_.append(chunk, static_cast<std::size_t>(n));
  }
  json parsed;
  try {
    parsed = json::parse(reply);
  } catch (const json::exception& e) {
    shutdown();
    throw GatewayError(GatewayErrorKind::protocol,
                       std::string("unparseable subprocess reply: ") + e.what());
  }
  GatewayResponse resp = response_from_json(req.role, parsed);
  resp.latency_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - started)
                        .count();
  return resp;
}

std::shared_ptr<Gateway> make_gateway(const std::string& backend_spec) {
  if (backend_spec == "heuristic") {
    return std::make_shared<Gateway>(std::make_shared<HeuristicBackend>());
  }
  if (backend_spec == "external") {
    return std::make_shared<Gateway>(std::make_shared<ExternalBackend>());
  }
  if (backend_spec.rfind("external:", 0) == 0) {
    return std::make_shared<Gateway>(
        std::make_shared<ExternalBackend>(backend_spec.substr(9)));
  }
  if (backend_spec.rfind("subprocess:", 0) == 0) {
    std::istringstream in(backend_spec.substr(11));
    std::vector<std::string> argv;
    std::string word;
    while (in >> word) argv.push_back(word);
    return std::make_shared<Gateway>(
        std::make_shared<SubprocessBackend>(std::move(argv)));
  }
  throw ValidationError("unknown gateway backend: " + backend_spec +
                        " (expected heuristic, external[:url], or subprocess:cmd)");
}

}  // namespace seren
