#pragma once
// Experiment orchestration: a strict-keyed config, sequential stages
// (ingest -> label -> profile -> curate -> train -> evaluate -> simulate),
// per-stage artifact directories with content-hashed manifests, and the
// synthetic-corpus generator. Identical config + seed must reproduce every
// manifest byte for byte, so nothing here records wall-clock time.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seren/catalog.hpp"
#include "seren/nearline_sim.hpp"
#include "seren/trainer.hpp"

namespace seren {

// Canonical policy row key for a generation prompt: its first line when that
// line is "user=<id>", else the whole prompt. Profile prompts lead with the
// user line, so policies keep one row per user even as profile text drifts
// between refreshes.
std::string prompt_row_key(const std::string& prompt);

// Gateway whose generate role samples from the policy (row looked up via
// prompt_row_key). params: n, temperature, repetition_penalty, seed.
std::shared_ptr<Gateway> make_policy_gateway(std::shared_ptr<class TabularPolicy> policy);

struct LabelStageConfig {
  int window_days = 10;
  int context_events = 50;
  std::vector<std::string> online_dims = {"category", "brand", "seller"};
};

struct CurateStageConfig {
  std::string judge = "heuristic";    // gateway backend spec
  std::string teacher = "heuristic";  // gateway backend spec
  double conf_min = 0.7;
  int delta = 2;
  int max_pairs = 3;
  int split_sft = 1;  // sft:pref ratio
  int split_pref = 1;
};

struct TrainStageConfig {
  TrainConfig align;  // loss family + hyperparameters for the alignment phase
  int sft_steps = 200;
  double sft_lr = 0.8;
  int max_len = 3;
  int k_responses = 4;  // sampled responses per preference prompt
};

struct EvaluateStageConfig {
  int negatives = 99;  // candidate set = negatives + 1 positive
  std::vector<int> ks = {1, 3, 5, 10};
  int max_samples = 200;
  int diversity_users = 20;
  int samples_per_user = 30;
  double temperature = 0.95;
  double repetition_penalty = 1.05;
  int timing_trials = 3;
};

struct SimulateStageConfig {
  SimConfig sim;
  std::string generator = "heuristic";  // "heuristic" | "policy"
  bool use_corpus = false;              // run over the ingested catalog
};

struct GenCorpusConfig {
  int users = 100;
  int items = 1000;
  int categories = 25;
  int days = 30;
  int requests_per_user_per_day = 5;
};

struct PipelineConfig {
  std::uint64_t seed = 7;
  std::filesystem::path out_dir = "out";
  std::vector<std::string> stages = {"ingest",  "label", "profile", "curate",
                                     "train",   "evaluate", "simulate"};

  // ingest inputs (users file optional, may stay empty)
  std::filesystem::path categories_path;
  std::filesystem::path items_path;
  std::filesystem::path events_path;
  std::filesystem::path users_path;

  ProfileConfig profile;
  LabelStageConfig label;
  CurateStageConfig curate;
  TrainStageConfig train;
  EvaluateStageConfig evaluate;
  SimulateStageConfig simulate;
  GenCorpusConfig gen_corpus;
  std::vector<int> sweep_periods = {6, 12, 24, 48};
};

// Strict parse: unknown keys at any level are ValidationErrors naming the
// key, not warnings. The file is a single JSON object.
PipelineConfig parse_pipeline_config(const std::filesystem::path& path);

// Raised when a stage fails; carries the stage name for the CLI exit message.
class StageError : public SerenError {
 public:
  StageError(std::string stage, const std::string& what)
      : SerenError("stage " + stage + " failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return cfg_; }

  // Checks that every path consumed by `stages` but produced by none of them
  // exists, before anything runs. Throws ValidationError naming the path.
  void preflight(const std::vector<std::string>& stages) const;

  // Runs the given stages in config order; a failure stops the run with a
  // StageError (partial artifacts are retained).
  void run(const std::vector<std::string>& stages);
  void run() { run(cfg_.stages); }

  // Individual stages (each writes out_dir/<stage>/... + manifest.json).
  void stage_ingest();
  void stage_label();
  void stage_profile();
  void stage_curate();
  void stage_train();
  void stage_evaluate();
  void stage_simulate();
  void stage_gen_corpus();
  void stage_cache_sweep();

 private:
  const Catalog& corpus();  // loads ingest artifacts on first use

  std::filesystem::path stage_dir(const std::string& stage) const;
  void write_manifest(const std::string& stage, const nlohmann::json& params,
                      const std::vector<std::filesystem::path>& inputs,
                      const std::vector<std::filesystem::path>& outputs) const;

  PipelineConfig cfg_;
  std::optional<Catalog> catalog_;
};

}  // namespace seren
