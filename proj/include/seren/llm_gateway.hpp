#pragma once
// Gateway for model-backed helper roles (profile extraction, judging,
// scoring, title generation). All call sites go through Gateway::call so
// response shapes are validated in one place and backends stay swappable:
// scripted canned responses, a deterministic heuristic, a local policy-backed
// generator, an external HTTP service, or a line-oriented subprocess.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "seren/common.hpp"

namespace seren {

enum class GatewayRole { extract_profile, judge, score, generate };

const char* to_string(GatewayRole role);
GatewayRole gateway_role_from_string(const std::string& s);

enum class GatewayErrorKind { timeout, protocol, validation };

class GatewayError : public SerenError {
 public:
  GatewayError(GatewayErrorKind kind, const std::string& msg)
      : SerenError(msg), kind_(kind) {}
  GatewayErrorKind kind() const { return kind_; }

 private:
  GatewayErrorKind kind_;
};

struct GatewayRequest {
  std::uint64_t request_id = 0;  // 0 = let the gateway assign one
  GatewayRole role = GatewayRole::generate;
  std::string prompt;
  std::map<std::string, std::string> params;
};

// Role-specific payloads.
struct TagPayload {
  std::string text;
  std::string kind;  // one of the TagKind names
  std::string rationale;
  bool operator==(const TagPayload&) const = default;
};

struct VerdictPayload {
  bool is_serendipitous = false;
  std::string rationale;
  double confidence = 0.0;  // in [0, 1]
  bool operator==(const VerdictPayload&) const = default;
};

struct ScorePayload {
  int score = 0;  // integer in [1, 6]
  bool operator==(const ScorePayload&) const = default;
};

struct TitlesPayload {
  std::vector<std::string> titles;
  bool operator==(const TitlesPayload&) const = default;
};

struct TagsPayload {
  std::vector<TagPayload> tags;
  bool operator==(const TagsPayload&) const = default;
};

using GatewayPayload =
    std::variant<TagsPayload, VerdictPayload, ScorePayload, TitlesPayload>;

struct GatewayResponse {
  std::uint64_t request_id = 0;
  GatewayPayload payload;
  double latency_ms = 0.0;
};

// Shape validation shared by every backend. Throws GatewayError(validation)
// if the payload variant does not match the role, a score is outside [1, 6],
// a confidence is outside [0, 1], or a tag kind is not in the taxonomy.
void validate_payload(GatewayRole role, const GatewayPayload& payload);

// JSON wire format, used by the external and subprocess backends and by the
// scripted backend's on-disk scripts.
nlohmann::json request_to_json(const GatewayRequest& req);
GatewayRequest request_from_json(const nlohmann::json& j);
nlohmann::json payload_to_json(const GatewayPayload& payload);
GatewayPayload payload_from_json(GatewayRole role, const nlohmann::json& j);
nlohmann::json response_to_json(const GatewayResponse& resp);
GatewayResponse response_from_json(GatewayRole role, const nlohmann::json& j);

class GatewayBackend {
 public:
  virtual ~GatewayBackend() = default;
  virtual GatewayResponse call(const GatewayRequest& req) = 0;
  virtual std::string name() const = 0;
};

// Front door: assigns request ids, validates responses, checks id echo.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<GatewayBackend> backend);
  GatewayResponse call(GatewayRequest req);
  const std::string& backend_name() const { return name_; }

  // Convenience wrappers that unwrap the role-specific payload.
  TagsPayload extract_profile(const std::string& prompt,
                              std::map<std::string, std::string> params = {});
  VerdictPayload judge(const std::string& prompt,
                       std::map<std::string, std::string> params = {});
  ScorePayload score(const std::string& prompt,
                     std::map<std::string, std::string> params = {});
  TitlesPayload generate(const std::string& prompt,
                         std::map<std::string, std::string> params = {});

 private:
  std::shared_ptr<GatewayBackend> backend_;
  std::string name_;
  std::uint64_t next_id_ = 1;
};

// --- Scripted backend: canned responses keyed by (role, prompt) hash. ---
class ScriptedBackend : public GatewayBackend {
 public:
  static std::uint64_t key_of(GatewayRole role, const std::string& prompt);

  // Canned response for one exact (role, prompt).
  void add(GatewayRole role, const std::string& prompt, GatewayPayload payload);
  // Fallback used for any prompt of the role with no exact entry.
  void add_default(GatewayRole role, GatewayPayload payload);
  // Makes the given (role, prompt) raise a GatewayError of the given kind.
  void add_failure(GatewayRole role, const std::string& prompt,
                   GatewayErrorKind kind, const std::string& msg);

  GatewayResponse call(const GatewayRequest& req) override;
  std::string name() const override { return "scripted"; }

 private:
  struct Failure {
    GatewayErrorKind kind;
    std::string msg;
  };
  std::map<std::uint64_t, GatewayPayload> canned_;
  std::map<std::uint64_t, Failure> failures_;
  std::map<GatewayRole, GatewayPayload> defaults_;
};

// --- Heuristic backend: deterministic rules over the prompt micro-format. ---
//
// Prompts are plain text, one "key: value" field per line. Recognized keys:
//   behavior: kind=<event kind> category=<name> brand=<id> title=<text>
//   context_category: <name>     context_title: <text>
//   target_category: <name>      target_title: <text>
//   response: <text>
//   hint: <text>                 recent: <text>
//
// Role rules (all deterministic, no randomness):
//   extract_profile  top-j categories/brands by frequency over clicked or
//                    purchased behavior lines (j from params["top_j"], = 3).
//   judge            serendipitous iff target_category differs from every
//                    context_category; confidence 0.9, lowered to 0.6 when
//                    the target title shares half its tokens with a context
//                    title while the category is novel (conflicting signals).
//   score            1 + round(5 * (1 - max Jaccard(response, context
//                    titles))), clamped to [1, 6]: novel responses score high.
//   generate         the params["n"] (default 1) hint lines least similar to
//                    the recent lines, ties broken by hint order.
class HeuristicBackend : public GatewayBackend {
 public:
  GatewayResponse call(const GatewayRequest& req) override;
  std::string name() const override { return "heuristic"; }
};

// --- Callback backend: adapts a generation function (e.g. a trained policy
// sampler) into the generate role without coupling the gateway to the policy
// representation. ---
class GeneratorFnBackend : public GatewayBackend {
 public:
  using GenerateFn = std::function<std::vector<std::string>(
      const std::string& prompt,
      const std::map<std::string, std::string>& params)>;

  explicit GeneratorFnBackend(GenerateFn fn, std::string name = "policy");
  GatewayResponse call(const GatewayRequest& req) override;
  std::string name() const override { return name_; }

 private:
  GenerateFn fn_;
  std::string name_;
};

// --- External backend: JSON POST to an HTTP endpoint. ---
// Endpoint and timeout come from the constructor or, when empty/zero, from
// SEREN_GATEWAY_ENDPOINT ("host:port/path") and SEREN_GATEWAY_TIMEOUT_MS.
// One retry on transport failure, then GatewayError(timeout). Malformed
// response bodies raise GatewayError(protocol).
class ExternalBackend : public GatewayBackend {
 public:
  explicit ExternalBackend(std::string endpoint = "", int timeout_ms = 0);
  GatewayResponse call(const GatewayRequest& req) override;
  std::string name() const override { return "external"; }
  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  int timeout_ms_ = 2000;
};

// --- Subprocess backend: spawns a command speaking JSON Lines on
// stdin/stdout (one request per line, one response per line). The child is
// started lazily and reused across calls; a write/read failure or malformed
// line raises GatewayError(protocol). ---
class SubprocessBackend : public GatewayBackend {
 public:
  explicit SubprocessBackend(std::vector<std::string> argv);
  ~SubprocessBackend() override;
  SubprocessBackend(const SubprocessBackend&) = delete;
  SubprocessBackend& operator=(const SubprocessBackend&) = delete;

  GatewayResponse call(const GatewayRequest& req) override;
  std::string name() const override { return "subprocess"; }

 private:
  void ensure_started();
  void shutdown();

  std::vector<std::string> argv_;
  int child_pid_ = -1;
  int to_child_ = -1;    // write end
  int from_child_ = -1;  // read end
  std::string read_buf_;
};

// Builds a gateway from a backend name: "heuristic", "external", or
// "subprocess:<cmd> <args...>". ("scripted" and "policy" need in-process
// setup and are constructed directly by callers.)
std::shared_ptr<Gateway> make_gateway(const std::string& backend_spec);

}  // namespace seren
