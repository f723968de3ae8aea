#include "seren/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "seren/cdi_curation.hpp"
#include "seren/generate_eval.hpp"
#include "seren/jsonl.hpp"
#include "seren/seren_label.hpp"

namespace seren {

namespace fs = std::filesystem;

std::string prompt_row_key(const std::string& prompt) {
  auto nl = prompt.find('\n');
  std::string first = nl == std::string::npos ? prompt : prompt.substr(0, nl);
  if (first.rfind("user=", 0) == 0) return first;
  return prompt;
}

std::shared_ptr<Gateway> make_policy_gateway(std::shared_ptr<TabularPolicy> policy) {
  if (!policy) throw ValidationError("make_policy_gateway needs a policy");
  auto fn = [policy](const std::string& prompt,
                     const std::map<std::string, std::string>& params) {
    SampleParams sp;
    auto it = params.find("n");
    if (it != params.end()) sp.n = std::stoi(it->second);
    it = params.find("temperature");
    if (it != params.end()) sp.temperature = std::stod(it->second);
    it = params.find("repetition_penalty");
    if (it != params.end()) sp.repetition_penalty = std::stod(it->second);
    it = params.find("seed");
    if (it != params.end()) sp.seed = std::stoull(it->second);
    auto sequences = sample_policy(*policy, prompt_row_key(prompt), sp);
    std::vector<std::string> titles;
    titles.reserve(sequences.size());
    for (const auto& seq : sequences) titles.push_back(join_tokens(seq));
    return titles;
  };
  return std::make_shared<Gateway>(
      std::make_shared<GeneratorFnBackend>(std::move(fn)));
}

// ---------------------------------------------------------------------------
// Config parsing (strict keys)

namespace {

void check_keys(const Json& obj, const std::string& block,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ValidationError("config block '" + block + "' must be an object");
  for (const auto& kv : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (kv.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ValidationError("unknown config key '" + kv.key() + "' in '" + block + "'");
  }
}

template <typename T>
void opt_get(const Json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(std::string("config key '") + key + "' has the wrong type");
  }
}

void opt_path(const Json& obj, const char* key, fs::path& out) {
  std::string s = out.string();
  opt_get(obj, key, s);
  out = s;
}

void parse_sim_block(const Json& j, const std::string& block, SimConfig& sim) {
  check_keys(j, block,
             {"users", "items", "categories", "horizon_days",
              "requests_per_user_per_day", "page_size", "seren_enabled",
              "seren_weight", "cache_refresh_hours", "qps_budget_per_day",
              "personalized_candidates", "seren_candidates", "window_days",
              "profile_refresh_days", "vector_dim", "explore_temperature",
              "titles_per_generation", "hint_size", "recent_titles",
              "record_events", "seed", "click", "generator", "use_corpus"});
  opt_get(j, "users", sim.users);
  opt_get(j, "items", sim.items);
  opt_get(j, "categories", sim.categories);
  opt_get(j, "horizon_days", sim.horizon_days);
  opt_get(j, "requests_per_user_per_day", sim.requests_per_user_per_day);
  opt_get(j, "page_size", sim.page_size);
  opt_get(j, "seren_enabled", sim.seren_enabled);
  opt_get(j, "seren_weight", sim.seren_weight);
  opt_get(j, "cache_refresh_hours", sim.cache_refresh_hours);
  opt_get(j, "qps_budget_per_day", sim.qps_budget_per_day);
  opt_get(j, "personalized_candidates", sim.personalized_candidates);
  opt_get(j, "seren_candidates", sim.seren_candidates);
  opt_get(j, "window_days", sim.window_days);
  opt_get(j, "profile_refresh_days", sim.profile_refresh_days);
  opt_get(j, "vector_dim", sim.vector_dim);
  opt_get(j, "explore_temperature", sim.explore_temperature);
  opt_get(j, "titles_per_generation", sim.titles_per_generation);
  opt_get(j, "hint_size", sim.hint_size);
  opt_get(j, "recent_titles", sim.recent_titles);
  opt_get(j, "record_events", sim.record_events);
  opt_get(j, "seed", sim.seed);
  if (j.contains("click")) {
    const Json& c = j.at("click");
    check_keys(c, block + ".click",
               {"affinity_weight", "novelty_weight", "bias", "purchase_prob",
                "reinforce"});
    opt_get(c, "affinity_weight", sim.click.affinity_weight);
    opt_get(c, "novelty_weight", sim.click.novelty_weight);
    opt_get(c, "bias", sim.click.bias);
    opt_get(c, "purchase_prob", sim.click.purchase_prob);
    opt_get(c, "reinforce", sim.click.reinforce);
  }
}

const std::vector<std::string>& canonical_stage_order() {
  static const std::vector<std::string> order = {
      "gen_corpus", "ingest",   "label",    "profile",    "curate",
      "train",      "evaluate", "simulate", "cache_sweep"};
  return order;
}

int stage_index(const std::string& name) {
  const auto& order = canonical_stage_order();
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == name) return static_cast<int>(i);
  throw ValidationError("unknown stage '" + name + "'");
}

}  // namespace

PipelineConfig parse_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }

  PipelineConfig cfg;
  check_keys(j, "config",
             {"seed", "out_dir", "stages", "ingest", "label", "profile",
              "curate", "train", "evaluate", "simulate", "gen_corpus",
              "cache_sweep"});
  opt_get(j, "seed", cfg.seed);
  opt_path(j, "out_dir", cfg.out_dir);
  opt_get(j, "stages", cfg.stages);
  for (const auto& s : cfg.stages) stage_index(s);  // validates names

  cfg.simulate.sim.seed = cfg.seed;  // global seed unless the block overrides

  if (j.contains("ingest")) {
    const Json& b = j.at("ingest");
    check_keys(b, "ingest", {"categories", "items", "events", "users"});
    opt_path(b, "categories", cfg.categories_path);
    opt_path(b, "items", cfg.items_path);
    opt_path(b, "events", cfg.events_path);
    opt_path(b, "users", cfg.users_path);
  }
  if (j.contains("label")) {
    const Json& b = j.at("label");
    check_keys(b, "label", {"window_days", "context_events", "online_dims"});
    opt_get(b, "window_days", cfg.label.window_days);
    opt_get(b, "context_events", cfg.label.context_events);
    opt_get(b, "online_dims", cfg.label.online_dims);
  }
  if (j.contains("profile")) {
    const Json& b = j.at("profile");
    check_keys(b, "profile",
               {"window_days", "theta_rel", "half_life_days", "top_k", "top_j",
                "refresh_days", "long_term"});
    opt_get(b, "window_days", cfg.profile.short_window_days);
    opt_get(b, "theta_rel", cfg.profile.theta_rel);
    opt_get(b, "half_life_days", cfg.profile.half_life_days);
    opt_get(b, "top_k", cfg.profile.top_k);
    opt_get(b, "top_j", cfg.profile.top_j);
    opt_get(b, "refresh_days", cfg.profile.refresh_days);
    if (b.contains("long_term")) {
      const Json& lt = b.at("long_term");
      check_keys(lt, "profile.long_term", {"f_min", "r_of_last", "periods"});
      opt_get(lt, "f_min", cfg.profile.long_term.f_min);
      opt_get(lt, "r_of_last", cfg.profile.long_term.r_of_last);
      opt_get(lt, "periods", cfg.profile.long_term.periods);
    }
  }
  if (j.contains("curate")) {
    const Json& b = j.at("curate");
    check_keys(b, "curate",
               {"judge", "teacher", "conf_min", "delta", "max_pairs",
                "split_sft", "split_pref"});
    opt_get(b, "judge", cfg.curate.judge);
    opt_get(b, "teacher", cfg.curate.teacher);
    opt_get(b, "conf_min", cfg.curate.conf_min);
    opt_get(b, "delta", cfg.curate.delta);
    opt_get(b, "max_pairs", cfg.curate.max_pairs);
    opt_get(b, "split_sft", cfg.curate.split_sft);
    opt_get(b, "split_pref", cfg.curate.split_pref);
  }
  if (j.contains("train")) {
    const Json& b = j.at("train");
    check_keys(b, "train",
               {"loss", "tau", "alpha", "beta", "gamma", "lambda_d", "lambda_u",
                "lr", "steps", "sft_steps", "sft_lr", "max_len", "k_responses"});
    std::string loss = to_string(cfg.train.align.loss);
    opt_get(b, "loss", loss);
    cfg.train.align.loss = loss_kind_from_string(loss);
    opt_get(b, "tau", cfg.train.align.tau);
    opt_get(b, "alpha", cfg.train.align.alpha);
    opt_get(b, "beta", cfg.train.align.beta);
    opt_get(b, "gamma", cfg.train.align.gamma);
    opt_get(b, "lambda_d", cfg.train.align.lambda_d);
    opt_get(b, "lambda_u", cfg.train.align.lambda_u);
    opt_get(b, "lr", cfg.train.align.lr);
    opt_get(b, "steps", cfg.train.align.steps);
    opt_get(b, "sft_steps", cfg.train.sft_steps);
    opt_get(b, "sft_lr", cfg.train.sft_lr);
    opt_get(b, "max_len", cfg.train.max_len);
    opt_get(b, "k_responses", cfg.train.k_responses);
  }
  if (j.contains("evaluate")) {
    const Json& b = j.at("evaluate");
    check_keys(b, "evaluate",
               {"negatives", "ks", "max_samples", "diversity_users",
                "samples_per_user", "temperature", "repetition_penalty",
                "timing_trials"});
    opt_get(b, "negatives", cfg.evaluate.negatives);
    opt_get(b, "ks", cfg.evaluate.ks);
    opt_get(b, "max_samples", cfg.evaluate.max_samples);
    opt_get(b, "diversity_users", cfg.evaluate.diversity_users);
    opt_get(b, "samples_per_user", cfg.evaluate.samples_per_user);
    opt_get(b, "temperature", cfg.evaluate.temperature);
    opt_get(b, "repetition_penalty", cfg.evaluate.repetition_penalty);
    opt_get(b, "timing_trials", cfg.evaluate.timing_trials);
  }
  if (j.contains("simulate")) {
    const Json& b = j.at("simulate");
    parse_sim_block(b, "simulate", cfg.simulate.sim);
    opt_get(b, "generator", cfg.simulate.generator);
    opt_get(b, "use_corpus", cfg.simulate.use_corpus);
    if (cfg.simulate.generator != "heuristic" && cfg.simulate.generator != "policy")
      throw ValidationError("simulate.generator must be 'heuristic' or 'policy'");
  }
  if (j.contains("gen_corpus")) {
    const Json& b = j.at("gen_corpus");
    check_keys(b, "gen_corpus",
               {"users", "items", "categories", "days",
                "requests_per_user_per_day"});
    opt_get(b, "users", cfg.gen_corpus.users);
    opt_get(b, "items", cfg.gen_corpus.items);
    opt_get(b, "categories", cfg.gen_corpus.categories);
    opt_get(b, "days", cfg.gen_corpus.days);
    opt_get(b, "requests_per_user_per_day", cfg.gen_corpus.requests_per_user_per_day);
  }
  if (j.contains("cache_sweep")) {
    const Json& b = j.at("cache_sweep");
    check_keys(b, "cache_sweep", {"periods"});
    opt_get(b, "periods", cfg.sweep_periods);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig config) : cfg_(std::move(config)) {}

fs::path Pipeline::stage_dir(const std::string& stage) const {
  return cfg_.out_dir / stage;
}

void Pipeline::write_manifest(const std::string& stage, const Json& params,
                              const std::vector<fs::path>& inputs,
                              const std::vector<fs::path>& outputs) const {
  auto rel = [this](const fs::path& p) {
    std::error_code ec;
    fs::path r = fs::relative(p, cfg_.out_dir, ec);
    if (!ec && !r.empty() && r.generic_string().rfind("..", 0) != 0)
      return r.generic_string();
    return p.generic_string();
  };
  auto entry = [&](const fs::path& p) {
    return Json{{"path", rel(p)}, {"sha256", sha256_file_hex(p.string())}};
  };
  Json manifest;
  manifest["stage"] = stage;
  manifest["seed"] = cfg_.seed;
  manifest["params"] = params;
  Json in = Json::array(), out = Json::array();
  for (const auto& p : inputs) in.push_back(entry(p));
  for (const auto& p : outputs) out.push_back(entry(p));
  manifest["inputs"] = std::move(in);
  manifest["outputs"] = std::move(out);
  write_text_file((stage_dir(stage) / "manifest.json").string(), manifest.dump(2) + "\n");
}

const Catalog& Pipeline::corpus() {
  if (!catalog_) {
    fs::path dir = stage_dir("ingest");
    fs::path users = dir / "users.jsonl";
    catalog_ = ingest((dir / "categories.jsonl").string(), (dir / "items.jsonl").string(),
                      (dir / "events.jsonl").string(), {}, nullptr,
                      fs::exists(users) ? users.string() : "");
  }
  return *catalog_;
}

void Pipeline::preflight(const std::vector<std::string>& stages) const {
  // inputs per stage and the stage that produces each of them ("" = external)
  auto ingest_artifacts = [this] {
    fs::path d = stage_dir("ingest");
    return std::vector<std::pair<fs::path, std::string>>{
        {d / "categories.jsonl", "ingest"},
        {d / "items.jsonl", "ingest"},
        {d / "events.jsonl", "ingest"}};
  };
  // Ingest inputs are external files unless they point at this run's own
  // gen_corpus artifacts, in which case a scheduled gen_corpus produces them.
  auto ingest_producer = [this](const fs::path& p) -> std::string {
    fs::path gen = stage_dir("gen_corpus");
    for (const char* leaf :
         {"categories.jsonl", "items.jsonl", "events.jsonl", "users.jsonl"}) {
      if (p.lexically_normal() == (gen / leaf).lexically_normal()) return "gen_corpus";
    }
    return "";
  };
  std::map<std::string, std::vector<std::pair<fs::path, std::string>>> needs;
  needs["gen_corpus"] = {};
  needs["cache_sweep"] = {};
  needs["ingest"] = {{cfg_.categories_path, ingest_producer(cfg_.categories_path)},
                     {cfg_.items_path, ingest_producer(cfg_.items_path)},
                     {cfg_.events_path, ingest_producer(cfg_.events_path)}};
  if (!cfg_.users_path.empty())
    needs["ingest"].push_back({cfg_.users_path, ingest_producer(cfg_.users_path)});
  needs["label"] = ingest_artifacts();
  needs["profile"] = ingest_artifacts();
  needs["curate"] = ingest_artifacts();
  needs["curate"].push_back({stage_dir("label") / "samples.jsonl", "label"});
  needs["train"] = ingest_artifacts();
  needs["train"].push_back({stage_dir("curate") / "sft.jsonl", "curate"});
  needs["train"].push_back({stage_dir("curate") / "pref.jsonl", "curate"});
  needs["train"].push_back({stage_dir("profile") / "prompts.jsonl", "profile"});
  needs["evaluate"] = ingest_artifacts();
  needs["evaluate"].push_back({stage_dir("label") / "samples.jsonl", "label"});
  needs["evaluate"].push_back({stage_dir("train") / "policy.bin", "train"});
  needs["evaluate"].push_back({stage_dir("train") / "policy_sft.bin", "train"});
  needs["simulate"] = {};
  if (cfg_.simulate.use_corpus)
    for (auto& p : ingest_artifacts()) needs["simulate"].push_back(p);
  if (cfg_.simulate.generator == "policy")
    needs["simulate"].push_back({stage_dir("train") / "policy.bin", "train"});

  // Validate names and scheduling order before touching the filesystem so a
  // misordered plan is reported as such even when inputs are also missing.
  int prev = -1;
  for (const auto& name : stages) {
    int idx = stage_index(name);
    if (idx <= prev)
      throw ValidationError("stages are out of dependency order at '" + name + "'");
    prev = idx;
  }

  std::set<std::string> scheduled_before;
  for (const auto& name : stages) {
    auto it = needs.find(name);
    if (it == needs.end()) continue;
    for (const auto& [path, producer] : it->second) {
      if (!producer.empty() && scheduled_before.count(producer)) continue;
      if (path.empty())
        throw ValidationError("stage " + name + " requires an input path that is not configured");
      if (!fs::exists(path))
        throw ValidationError("stage " + name + " input does not exist: " + path.string());
    }
    scheduled_before.insert(name);
  }
}

void Pipeline::run(const std::vector<std::string>& stages) {
  preflight(stages);
  for (const auto& name : stages) {
    try {
      if (name == "gen_corpus") stage_gen_corpus();
      else if (name == "ingest") stage_ingest();
      else if (name == "label") stage_label();
      else if (name == "profile") stage_profile();
      else if (name == "curate") stage_curate();
      else if (name == "train") stage_train();
      else if (name == "evaluate") stage_evaluate();
      else if (name == "simulate") stage_simulate();
      else if (name == "cache_sweep") stage_cache_sweep();
      else throw ValidationError("unknown stage '" + name + "'");
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Stages

void Pipeline::stage_ingest() {
  fs::path dir = stage_dir("ingest");
  fs::create_directories(dir);
  IngestReport report;
  catalog_ = ingest(cfg_.categories_path.string(), cfg_.items_path.string(),
                    cfg_.events_path.string(), {}, &report,
                    cfg_.users_path.empty() ? "" : cfg_.users_path.string());
  const Catalog& cat = *catalog_;

  write_categories((dir / "categories.jsonl").string(), cat.tree);
  write_items((dir / "items.jsonl").string(), cat.items);
  write_events((dir / "events.jsonl").string(), cat.logs);
  write_users((dir / "users.jsonl").string(), cat.logs);

  std::size_t events = 0;
  for (const auto& kv : cat.logs) events += kv.second.events.size();
  Json stats{{"categories", cat.tree.size()},
             {"items", cat.items.size()},
             {"users", cat.logs.size()},
             {"events", events},
             {"warnings", report.warnings.size()},
             {"dropped_events", report.dropped_events}};
  write_text_file((dir / "stats.json").string(), stats.dump(2) + "\n");

  std::vector<fs::path> inputs = {cfg_.categories_path, cfg_.items_path, cfg_.events_path};
  if (!cfg_.users_path.empty()) inputs.push_back(cfg_.users_path);
  Json params{{"click_policy", "drop_with_warning"}};
  write_manifest("ingest", params,
                 inputs,
                 {dir / "categories.jsonl", dir / "items.jsonl", dir / "events.jsonl",
                  dir / "users.jsonl", dir / "stats.json"});
}

void Pipeline::stage_label() {
  fs::path dir = stage_dir("label");
  fs::create_directories(dir);
  const Catalog& cat = corpus();

  SerenWindow window{cfg_.label.window_days, {SerenDim::category}};
  auto samples = extract_dataset(cat, window, cfg_.label.context_events);
  write_samples((dir / "samples.jsonl").string(), samples);

  // Online-criterion rate over a bounded per-user sample of exposures (the
  // full scan is quadratic in log length and adds nothing to the artifact).
  SerenWindow online{cfg_.label.window_days, {}};
  for (const auto& d : cfg_.label.online_dims) online.dims.insert(seren_dim_from_string(d));
  long online_checked = 0, online_related = 0, clicks_total = 0;
  for (const auto& kv : cat.logs) {
    int budget = 50;
    for (const auto& ev : kv.second.events) {
      if (ev.kind == EventKind::click) ++clicks_total;
      if (ev.kind != EventKind::exposure || budget <= 0) continue;
      --budget;
      ++online_checked;
      if (label_online(cat, kv.second, ev, online)) ++online_related;
    }
  }

  Json stats{{"samples", samples.size()},
             {"clicks_total", clicks_total},
             {"online_dims", cfg_.label.online_dims},
             {"online_exposures_checked", online_checked},
             {"online_related", online_related}};
  write_text_file((dir / "stats.json").string(), stats.dump(2) + "\n");

  fs::path ingest_dir = stage_dir("ingest");
  Json params{{"window_days", cfg_.label.window_days},
              {"context_events", cfg_.label.context_events},
              {"online_dims", cfg_.label.online_dims}};
  write_manifest("label", params,
                 {ingest_dir / "categories.jsonl", ingest_dir / "items.jsonl",
                  ingest_dir / "events.jsonl"},
                 {dir / "samples.jsonl", dir / "stats.json"});
}

void Pipeline::stage_profile() {
  fs::path dir = stage_dir("profile");
  fs::create_directories(dir);
  const Catalog& cat = corpus();

  auto extractor = make_gateway("heuristic");
  ProfileEngine engine(&cat, extractor.get(), cfg_.profile);

  int max_day = 0;
  for (const auto& kv : cat.logs)
    for (const auto& ev : kv.second.events) max_day = std::max(max_day, ev.day);
  std::vector<int> refresh_days;
  for (int d = cfg_.profile.refresh_days; d <= max_day; d += cfg_.profile.refresh_days)
    refresh_days.push_back(d);
  if (refresh_days.empty() || refresh_days.back() != max_day)
    refresh_days.push_back(max_day);

  std::vector<Json> prompts;
  for (const auto& kv : cat.logs) {
    const UserLog& log = kv.second;
    CognitionProfile profile;
    for (int d : refresh_days) profile = engine.refresh(log, d);
    std::deque<std::string> recent;
    for (const auto& ev : log.events) {
      if (ev.kind != EventKind::click) continue;
      recent.push_back(cat.item(ev.item_id).title);
      while (recent.size() > 5) recent.pop_front();
    }
    std::string prompt = engine.prompt_for(
        kv.first, profile, std::vector<std::string>(recent.begin(), recent.end()));
    prompts.push_back(Json{{"user_id", kv.first}, {"prompt", prompt}});
  }
  write_jsonl((dir / "prompts.jsonl").string(), prompts);
  engine.save_pools(dir / "pools.jsonl");

  Json params{{"window_days", cfg_.profile.short_window_days},
              {"theta_rel", cfg_.profile.theta_rel},
              {"half_life_days", cfg_.profile.half_life_days},
              {"top_k", cfg_.profile.top_k},
              {"top_j", cfg_.profile.top_j},
              {"refresh_days", cfg_.profile.refresh_days}};
  fs::path ingest_dir = stage_dir("ingest");
  write_manifest("profile", params,
                 {ingest_dir / "categories.jsonl", ingest_dir / "items.jsonl",
                  ingest_dir / "events.jsonl"},
                 {dir / "prompts.jsonl", dir / "pools.jsonl"});
}

void Pipeline::stage_curate() {
  fs::path dir = stage_dir("curate");
  fs::create_directories(dir);
  const Catalog& cat = corpus();

  auto samples = read_samples((stage_dir("label") / "samples.jsonl").string());
  auto judge = make_gateway(cfg_.curate.judge);
  DenoiseResult denoised = cdi_denoise(cat, samples, *judge, cfg_.curate.conf_min);

  auto [sft, pref] = split_sft_pref(denoised.clean,
                                    {cfg_.curate.split_sft, cfg_.curate.split_pref},
                                    cfg_.seed);
  write_samples((dir / "sft.jsonl").string(), sft);
  write_samples((dir / "pref.jsonl").string(), pref);
  write_escalations((dir / "escalations.jsonl").string(), denoised.escalations);

  Json stats{{"input_samples", samples.size()},
             {"clean", denoised.clean.size()},
             {"dropped", denoised.dropped.size()},
             {"escalated", denoised.escalations.size()},
             {"sft", sft.size()},
             {"pref", pref.size()}};
  write_text_file((dir / "stats.json").string(), stats.dump(2) + "\n");

  Json params{{"judge", cfg_.curate.judge},
              {"conf_min", cfg_.curate.conf_min},
              {"split_sft", cfg_.curate.split_sft},
              {"split_pref", cfg_.curate.split_pref}};
  write_manifest("curate", params, {stage_dir("label") / "samples.jsonl"},
                 {dir / "sft.jsonl", dir / "pref.jsonl", dir / "escalations.jsonl",
                  dir / "stats.json"});
}

void Pipeline::stage_train() {
  fs::path dir = stage_dir("train");
  fs::create_directories(dir);
  const Catalog& cat = corpus();

  auto sft_samples = read_samples((stage_dir("curate") / "sft.jsonl").string());
  auto pref_samples = read_samples((stage_dir("curate") / "pref.jsonl").string());
  std::map<std::string, std::string> prompts;
  for_each_jsonl((stage_dir("profile") / "prompts.jsonl").string(),
                 [&](const Json& rec, std::size_t) {
                   prompts[rec.at("user_id").get<std::string>()] =
                       rec.at("prompt").get<std::string>();
                 });

  // Vocabulary: every catalog title token plus an out-of-vocabulary marker.
  std::set<std::string> token_set;
  for (const auto& kv : cat.items)
    token_set.insert(kv.second.title_tokens.begin(), kv.second.title_tokens.end());
  std::vector<std::string> vocab(token_set.begin(), token_set.end());
  vocab.push_back("<unk>");
  std::vector<std::string> prompt_keys;
  for (const auto& kv : cat.logs) prompt_keys.push_back("user=" + kv.first);

  TabularPolicy policy(vocab, prompt_keys, cfg_.train.max_len);

  auto to_sft_example = [&](const SerenSample& s) -> std::optional<SftExample> {
    std::vector<std::string> tokens = cat.item(s.target_item_id).title_tokens;
    if (tokens.size() > static_cast<std::size_t>(cfg_.train.max_len))
      tokens.resize(static_cast<std::size_t>(cfg_.train.max_len));
    if (tokens.empty()) return std::nullopt;
    return SftExample{"user=" + s.user_id, policy.encode(tokens)};
  };
  std::vector<SftExample> sft_batch;
  for (const auto& s : sft_samples)
    if (auto ex = to_sft_example(s)) sft_batch.push_back(std::move(*ex));
  if (sft_batch.empty()) throw ValidationError("sft split produced no usable examples");

  TrainConfig sft_cfg;
  sft_cfg.loss = LossKind::sft;
  sft_cfg.lr = cfg_.train.sft_lr;
  sft_cfg.steps = cfg_.train.sft_steps;
  sft_cfg.seed = cfg_.seed;
  TrainBatch sft_only;
  sft_only.sft = sft_batch;
  TrainResult sft_result = train(policy, nullptr, sft_only, sft_cfg);
  write_curve_csv(dir / "curve_sft.csv", sft_result);
  policy.meta = describe(sft_cfg);
  policy.save(dir / "policy_sft.bin");

  TabularPolicy ref = policy;  // frozen reference for the alignment losses

  // Preference pairs: sample k responses from the post-SFT policy per
  // preference prompt, teacher-score them, keep pairs with enough gap.
  auto teacher = make_gateway(cfg_.curate.teacher);
  std::vector<PreferencePair> pairs;
  std::vector<EscalationRecord> escalations;
  std::vector<PairExample> pair_batch;
  for (std::size_t i = 0; i < pref_samples.size(); ++i) {
    const SerenSample& s = pref_samples[i];
    auto pit = prompts.find(s.user_id);
    std::string prompt_text = pit != prompts.end() ? pit->second : "user=" + s.user_id;
    std::string key = prompt_row_key(prompt_text);
    SampleParams sp;
    sp.n = cfg_.train.k_responses;
    sp.seed = Rng::derive(cfg_.seed, "pairgen", s.user_id, i);
    auto responses = sample_policy(ref, key, sp);
    PairResult pr = cdi_pair(cat, s.context, prompt_text, responses, *teacher,
                             cfg_.curate.delta, cfg_.curate.max_pairs);
    for (auto& e : pr.escalations) escalations.push_back(std::move(e));
    for (const auto& p : pr.pairs) {
      pairs.push_back(p);
      pair_batch.push_back({key, policy.encode(p.preferred), policy.encode(p.dispreferred)});
    }
  }
  std::vector<Json> pair_records;
  for (const auto& p : pairs)
    pair_records.push_back(Json{{"prompt", p.prompt},
                                {"preferred", join_tokens(p.preferred)},
                                {"dispreferred", join_tokens(p.dispreferred)},
                                {"score_w", p.score_w},
                                {"score_l", p.score_l}});
  write_jsonl((dir / "pairs.jsonl").string(), pair_records);
  write_escalations((dir / "escalations.jsonl").string(), escalations);
  if (pair_batch.empty() && cfg_.train.align.loss != LossKind::sft)
    throw ValidationError("no preference pairs were constructed; "
                          "raise k_responses or lower delta");

  TrainConfig align = cfg_.train.align;
  align.seed = cfg_.seed;
  TrainBatch batch;
  batch.sft = sft_batch;
  batch.pairs = pair_batch;
  if (align.loss == LossKind::kto) {
    for (const auto& p : pair_batch) {
      batch.kto.push_back({p.prompt, p.preferred, true});
      batch.kto.push_back({p.prompt, p.dispreferred, false});
    }
  }
  TrainResult align_result = train(policy, &ref, batch, align);
  write_curve_csv(dir / "curve.csv", align_result);
  policy.meta = describe(align);
  policy.save(dir / "policy.bin");

  Json stats{{"sft_examples", sft_batch.size()},
             {"pref_prompts", pref_samples.size()},
             {"pairs", pair_batch.size()},
             {"pair_escalations", escalations.size()},
             {"sft_final_loss", sft_result.final_loss},
             {"align_final_loss", align_result.final_loss},
             {"align_config", describe(align)}};
  if (align_result.final_mean_h) stats["align_final_mean_h"] = *align_result.final_mean_h;
  write_text_file((dir / "stats.json").string(), stats.dump(2) + "\n");

  Json params{{"sft_steps", cfg_.train.sft_steps},
              {"sft_lr", cfg_.train.sft_lr},
              {"max_len", cfg_.train.max_len},
              {"k_responses", cfg_.train.k_responses},
              {"delta", cfg_.curate.delta},
              {"max_pairs", cfg_.curate.max_pairs},
              {"align", describe(align)}};
  write_manifest("train", params,
                 {stage_dir("curate") / "sft.jsonl", stage_dir("curate") / "pref.jsonl",
                  stage_dir("profile") / "prompts.jsonl"},
                 {dir / "policy_sft.bin", dir / "policy.bin", dir / "pairs.jsonl",
                  dir / "escalations.jsonl", dir / "curve_sft.csv", dir / "curve.csv",
                  dir / "stats.json"});
}

void Pipeline::stage_evaluate() {
  fs::path dir = stage_dir("evaluate");
  fs::create_directories(dir);
  const Catalog& cat = corpus();

  TabularPolicy policy = TabularPolicy::load(stage_dir("train") / "policy.bin");
  TabularPolicy sft = TabularPolicy::load(stage_dir("train") / "policy_sft.bin");
  auto samples = read_samples((stage_dir("label") / "samples.jsonl").string());
  if (samples.empty()) throw ValidationError("no labeled samples to evaluate");

  std::vector<std::size_t> picked(samples.size());
  for (std::size_t i = 0; i < picked.size(); ++i) picked[i] = i;
  Rng pick_rng(Rng::derive(cfg_.seed, "evalpick"));
  pick_rng.shuffle(picked);
  if (picked.size() > static_cast<std::size_t>(cfg_.evaluate.max_samples))
    picked.resize(static_cast<std::size_t>(cfg_.evaluate.max_samples));
  std::sort(picked.begin(), picked.end());

  auto candidates_for = [&](const SerenSample& s, std::size_t idx) {
    std::set<std::string> seen_cats;
    for (const auto& ev : s.context)
      if (ev.kind == EventKind::exposure)
        seen_cats.insert(cat.atomic_category_of(ev.item_id));
    std::vector<std::string> seen_items, other_items;
    for (const auto& kv : cat.items) {
      if (kv.first == s.target_item_id) continue;
      (seen_cats.count(kv.second.atomic_category_id) ? seen_items : other_items)
          .push_back(kv.first);
    }
    Rng rng(Rng::derive(cfg_.seed, "neg", s.user_id, idx));
    rng.shuffle(seen_items);
    rng.shuffle(other_items);
    std::vector<Candidate> cands;
    cands.push_back({s.target_item_id, cat.item(s.target_item_id).title_tokens, true});
    for (const auto& id : seen_items) {
      if (static_cast<int>(cands.size()) > cfg_.evaluate.negatives) break;
      cands.push_back({id, cat.item(id).title_tokens, false});
    }
    for (const auto& id : other_items) {
      if (static_cast<int>(cands.size()) > cfg_.evaluate.negatives) break;
      cands.push_back({id, cat.item(id).title_tokens, false});
    }
    rng.shuffle(cands);  // ties must not favor the positive's input position
    return cands;
  };

  auto rank_with = [&](const TabularPolicy& model, const char* tag) {
    std::vector<int> ranks;
    ranks.reserve(picked.size());
    for (std::size_t idx : picked) {
      const SerenSample& s = samples[idx];
      SampleParams sp;
      sp.n = 1;
      sp.temperature = cfg_.evaluate.temperature;
      sp.repetition_penalty = cfg_.evaluate.repetition_penalty;
      sp.seed = Rng::derive(cfg_.seed, "eval", tag, s.user_id, idx);
      auto title = sample_policy(model, "user=" + s.user_id, sp).at(0);
      auto cands = candidates_for(s, idx);
      ranks.push_back(rank_candidates(title, cands).positive_rank);
    }
    return ranks;
  };

  MetricReport final_report = seren_metrics(rank_with(policy, "final"), cfg_.evaluate.ks);
  MetricReport sft_report = seren_metrics(rank_with(sft, "sft"), cfg_.evaluate.ks);
  write_metrics_csv(dir / "metrics.csv", final_report);
  write_metrics_csv(dir / "metrics_sft.csv", sft_report);

  // Diversity protocol: many samples per user, retrieval by shared title
  // tokens, hit when the user's first target category is reached.
  std::map<std::string, std::set<std::string>> token_cats;
  for (const auto& kv : cat.items)
    for (const auto& tok : kv.second.title_tokens)
      token_cats[tok].insert(kv.second.atomic_category_id);
  auto retrieve_cats = [&](const std::vector<std::string>& title) {
    std::set<std::string> out;
    for (const auto& tok : title) {
      auto it = token_cats.find(tok);
      if (it != token_cats.end()) out.insert(it->second.begin(), it->second.end());
    }
    return out;
  };
  std::map<std::string, std::string> first_target;  // user -> target category
  for (const auto& s : samples)
    first_target.emplace(s.user_id, cat.atomic_category_of(s.target_item_id));

  auto diversity_with = [&](const TabularPolicy& model, const char* tag) {
    std::vector<std::vector<std::vector<std::string>>> per_user;
    std::vector<std::string> targets;
    for (const auto& kv : first_target) {
      if (static_cast<int>(per_user.size()) >= cfg_.evaluate.diversity_users) break;
      SampleParams sp;
      sp.n = cfg_.evaluate.samples_per_user;
      sp.temperature = cfg_.evaluate.temperature;
      sp.repetition_penalty = cfg_.evaluate.repetition_penalty;
      sp.seed = Rng::derive(cfg_.seed, "diversity", tag, kv.first);
      per_user.push_back(sample_policy(model, "user=" + kv.first, sp));
      targets.push_back(kv.second);
    }
    return diversity_metrics(per_user, retrieve_cats, targets);
  };
  DiversityReport div_final = diversity_with(policy, "final");
  DiversityReport div_sft = diversity_with(sft, "sft");
  auto diversity_json = [](const DiversityReport& d) {
    return Json{{"avg_title_cnt", d.avg_title_cnt},
                {"avg_cate_cnt", d.avg_cate_cnt},
                {"hit_rate", d.hit_rate},
                {"user_count", d.user_count}};
  };
  Json diversity{{"policy", diversity_json(div_final)}, {"sft", diversity_json(div_sft)}};
  write_text_file((dir / "diversity.json").string(), diversity.dump(2) + "\n");

  // Wall-clock timing is inherently non-reproducible, so timing.json is a
  // volatile diagnostic and deliberately not part of the manifest.
  {
    const SerenSample& s = samples[picked.front()];
    auto cands = candidates_for(s, picked.front());
    SampleParams sp;
    sp.seed = Rng::derive(cfg_.seed, "timing");
    auto title = sample_policy(policy, "user=" + s.user_id, sp).at(0);
    double secs = time_inference([&] { rank_candidates(title, cands); },
                                 cfg_.evaluate.timing_trials);
    Json timing{{"mean_seconds_per_ranking", secs},
                {"candidates", cands.size()},
                {"trials", cfg_.evaluate.timing_trials}};
    write_text_file((dir / "timing.json").string(), timing.dump(2) + "\n");
  }

  Json stats{{"samples_evaluated", picked.size()},
             {"negatives", cfg_.evaluate.negatives},
             {"diversity_users", div_final.user_count},
             {"samples_per_user", cfg_.evaluate.samples_per_user}};
  write_text_file((dir / "stats.json").string(), stats.dump(2) + "\n");

  Json params{{"negatives", cfg_.evaluate.negatives},
              {"ks", cfg_.evaluate.ks},
              {"max_samples", cfg_.evaluate.max_samples},
              {"temperature", cfg_.evaluate.temperature},
              {"repetition_penalty", cfg_.evaluate.repetition_penalty}};
  write_manifest("evaluate", params,
                 {stage_dir("train") / "policy.bin", stage_dir("train") / "policy_sft.bin",
                  stage_dir("label") / "samples.jsonl"},
                 {dir / "metrics.csv", dir / "metrics_sft.csv", dir / "diversity.json",
                  dir / "stats.json"});
}

void Pipeline::stage_simulate() {
  fs::path dir = stage_dir("simulate");
  fs::create_directories(dir);

  SimConfig sim = cfg_.simulate.sim;
  const Catalog* world = cfg_.simulate.use_corpus ? &corpus() : nullptr;

  std::shared_ptr<TabularPolicy> policy;
  std::shared_ptr<Gateway> generator;
  std::vector<fs::path> inputs;
  if (cfg_.simulate.generator == "policy") {
    fs::path policy_path = stage_dir("train") / "policy.bin";
    policy = std::make_shared<TabularPolicy>(TabularPolicy::load(policy_path));
    generator = make_policy_gateway(policy);
    inputs.push_back(policy_path);
  }
  if (cfg_.simulate.use_corpus) {
    fs::path ingest_dir = stage_dir("ingest");
    inputs.push_back(ingest_dir / "events.jsonl");
  }

  Simulator simulator(sim, world, generator ? generator.get() : nullptr);
  OnlineReport report = simulator.run();
  write_report_csv(dir / "report.csv", report);
  write_text_file((dir / "summary.json").string(),
                  report_summary_json(report, sim).dump(2) + "\n");

  Json params{{"generator", cfg_.simulate.generator},
              {"use_corpus", cfg_.simulate.use_corpus},
              {"seren_enabled", sim.seren_enabled},
              {"seren_weight", sim.seren_weight},
              {"cache_refresh_hours", sim.cache_refresh_hours},
              {"qps_budget_per_day", sim.qps_budget_per_day},
              {"horizon_days", sim.horizon_days},
              {"sim_seed", sim.seed}};
  write_manifest("simulate", params, inputs, {dir / "report.csv", dir / "summary.json"});
}

void Pipeline::stage_gen_corpus() {
  fs::path dir = stage_dir("gen_corpus");
  fs::create_directories(dir);

  SimConfig sim;
  sim.users = cfg_.gen_corpus.users;
  sim.items = cfg_.gen_corpus.items;
  sim.categories = cfg_.gen_corpus.categories;
  sim.horizon_days = cfg_.gen_corpus.days;
  sim.requests_per_user_per_day = cfg_.gen_corpus.requests_per_user_per_day;
  sim.seren_enabled = false;  // the corpus carries a pure filter-bubble signature
  sim.record_events = true;
  sim.seed = cfg_.seed;

  Simulator simulator(sim);
  simulator.run();
  Catalog corpus = simulator.corpus();

  write_categories((dir / "categories.jsonl").string(), corpus.tree);
  write_items((dir / "items.jsonl").string(), corpus.items);
  write_events((dir / "events.jsonl").string(), corpus.logs);
  write_users((dir / "users.jsonl").string(), corpus.logs);

  Json params{{"users", sim.users},
              {"items", sim.items},
              {"categories", sim.categories},
              {"days", sim.horizon_days},
              {"requests_per_user_per_day", sim.requests_per_user_per_day}};
  write_manifest("gen_corpus", params, {},
                 {dir / "categories.jsonl", dir / "items.jsonl", dir / "events.jsonl",
                  dir / "users.jsonl"});
}

void Pipeline::stage_cache_sweep() {
  fs::path dir = stage_dir("cache_sweep");
  fs::create_directories(dir);

  SweepReport report = cache_sweep(cfg_.simulate.sim, cfg_.sweep_periods);
  write_sweep_csv(dir / "sweep.csv", report);

  Json params{{"periods", cfg_.sweep_periods},
              {"qps_budget_per_day", cfg_.simulate.sim.qps_budget_per_day},
              {"horizon_days", cfg_.simulate.sim.horizon_days}};
  write_manifest("cache_sweep", params, {}, {dir / "sweep.csv"});
}

}  // namespace seren
