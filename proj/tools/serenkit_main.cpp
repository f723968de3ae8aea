// serenkit: command-line front end over the pipeline stages.
//
// Subcommands: ingest, label, profile, curate, train, evaluate, simulate,
// cache-sweep, gen-corpus, run. Global flags --seed, --config, --out apply
// to every subcommand; per-subcommand flags override the config block.
// Exit code 0 on success; 1 with the failing stage named on stderr.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seren/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"serenkit: serendipity recommendation experiment toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  auto* opt_config = app.add_option("--config", config_path, "pipeline config file (JSON)");
  auto* opt_out = app.add_option("--out", out_dir, "output directory");
  auto* opt_seed = app.add_option("--seed", seed, "global seed");

  auto* cmd_ingest = app.add_subcommand("ingest", "validate and normalize catalog + log files");
  std::string categories, items, events, users;
  cmd_ingest->add_option("--categories", categories, "categories JSONL");
  cmd_ingest->add_option("--items", items, "items JSONL");
  cmd_ingest->add_option("--events", events, "events JSONL");
  cmd_ingest->add_option("--users", users, "users JSONL (optional)");

  auto* cmd_label = app.add_subcommand("label", "extract offline serendipity samples");
  int window_days = 0;
  std::vector<std::string> dims;
  cmd_label->add_option("--window-days", window_days, "novelty window in visit days");
  cmd_label->add_option("--dims", dims, "online novelty dimensions (category,brand,seller)")
      ->delimiter(',');

  auto* cmd_profile = app.add_subcommand("profile", "build cognition profiles and prompts");
  int refresh_days = 0;
  cmd_profile->add_option("--refresh-days", refresh_days, "profile refresh period in days");

  auto* cmd_curate = app.add_subcommand("curate", "denoise samples and split sft/pref");
  std::string judge, teacher;
  double conf_min = -1.0;
  int delta = 0;
  cmd_curate->add_option("--judge", judge, "judge backend (heuristic|external[:url]|subprocess:cmd)");
  cmd_curate->add_option("--teacher", teacher, "teacher backend");
  cmd_curate->add_option("--conf-min", conf_min, "confidence threshold for auto-accept");
  cmd_curate->add_option("--delta", delta, "minimum teacher score gap for a pair");

  auto* cmd_train = app.add_subcommand("train", "sft + preference alignment");
  std::string loss;
  int steps = 0;
  double lr = 0.0, tau = 0.0, alpha = -1.0;
  cmd_train->add_option("--loss", loss, "alignment loss (sft|ipo|ipo_plus_sft|dpo|kto|simpo)");
  cmd_train->add_option("--steps", steps, "alignment gradient steps");
  cmd_train->add_option("--lr", lr, "alignment learning rate");
  cmd_train->add_option("--tau", tau, "ipo target margin parameter");
  cmd_train->add_option("--alpha", alpha, "sft weight inside ipo_plus_sft");

  auto* cmd_evaluate = app.add_subcommand("evaluate", "matching-based offline metrics");
  int negatives = 0, max_samples = 0;
  cmd_evaluate->add_option("--negatives", negatives, "negatives per candidate set");
  cmd_evaluate->add_option("--max-samples", max_samples, "evaluation sample cap");

  auto* cmd_simulate = app.add_subcommand("simulate", "dual-channel nearline serving simulation");
  double weight = -1.0;
  int period = 0, sim_days = 0;
  long budget = 0;
  std::string generator;
  bool seren_on = true;
  auto* opt_weight = cmd_simulate->add_option("--weight", weight, "serendipity fusion weight");
  auto* opt_period = cmd_simulate->add_option("--period", period, "cache refresh period (hours)");
  auto* opt_budget = cmd_simulate->add_option("--budget", budget, "generation budget per day (-1 = unlimited)");
  auto* opt_sim_days = cmd_simulate->add_option("--days", sim_days, "horizon in days");
  auto* opt_generator = cmd_simulate->add_option("--generator", generator, "heuristic|policy");
  auto* opt_seren = cmd_simulate->add_flag("--seren,!--no-seren", seren_on,
                                           "enable the serendipity channel");

  auto* cmd_sweep = app.add_subcommand("cache-sweep", "simulate across cache refresh periods");
  std::vector<int> periods;
  cmd_sweep->add_option("--periods", periods, "refresh periods in hours")->delimiter(',');

  auto* cmd_gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  int g_users = 0, g_items = 0, g_categories = 0, g_days = 0;
  cmd_gen->add_option("--users", g_users, "user count");
  cmd_gen->add_option("--items", g_items, "item count");
  cmd_gen->add_option("--categories", g_categories, "leaf category count");
  cmd_gen->add_option("--days", g_days, "simulated days");

  auto* cmd_run = app.add_subcommand("run", "run the configured stage list");
  std::vector<std::string> stages;
  cmd_run->add_option("--stages", stages, "subset of stages to run")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    seren::PipelineConfig cfg;
    if (opt_config->count()) cfg = seren::parse_pipeline_config(config_path);
    if (opt_out->count()) cfg.out_dir = out_dir;
    if (opt_seed->count()) {
      cfg.seed = seed;
      cfg.simulate.sim.seed = seed;
    }

    std::vector<std::string> to_run;
    if (cmd_ingest->parsed()) {
      if (cmd_ingest->count("--categories")) cfg.categories_path = categories;
      if (cmd_ingest->count("--items")) cfg.items_path = items;
      if (cmd_ingest->count("--events")) cfg.events_path = events;
      if (cmd_ingest->count("--users")) cfg.users_path = users;
      to_run = {"ingest"};
    } else if (cmd_label->parsed()) {
      if (cmd_label->count("--window-days")) cfg.label.window_days = window_days;
      if (cmd_label->count("--dims")) cfg.label.online_dims = dims;
      to_run = {"label"};
    } else if (cmd_profile->parsed()) {
      if (cmd_profile->count("--refresh-days")) cfg.profile.refresh_days = refresh_days;
      to_run = {"profile"};
    } else if (cmd_curate->parsed()) {
      if (cmd_curate->count("--judge")) cfg.curate.judge = judge;
      if (cmd_curate->count("--teacher")) cfg.curate.teacher = teacher;
      if (cmd_curate->count("--conf-min")) cfg.curate.conf_min = conf_min;
      if (cmd_curate->count("--delta")) cfg.curate.delta = delta;
      to_run = {"curate"};
    } else if (cmd_train->parsed()) {
      if (cmd_train->count("--loss"))
        cfg.train.align.loss = seren::loss_kind_from_string(loss);
      if (cmd_train->count("--steps")) cfg.train.align.steps = steps;
      if (cmd_train->count("--lr")) cfg.train.align.lr = lr;
      if (cmd_train->count("--tau")) cfg.train.align.tau = tau;
      if (cmd_train->count("--alpha")) cfg.train.align.alpha = alpha;
      to_run = {"train"};
    } else if (cmd_evaluate->parsed()) {
      if (cmd_evaluate->count("--negatives")) cfg.evaluate.negatives = negatives;
      if (cmd_evaluate->count("--max-samples")) cfg.evaluate.max_samples = max_samples;
      to_run = {"evaluate"};
    } else if (cmd_simulate->parsed()) {
      if (opt_weight->count()) cfg.simulate.sim.seren_weight = weight;
      if (opt_period->count()) cfg.simulate.sim.cache_refresh_hours = period;
      if (opt_budget->count()) cfg.simulate.sim.qps_budget_per_day = budget;
      if (opt_sim_days->count()) cfg.simulate.sim.horizon_days = sim_days;
      if (opt_generator->count()) cfg.simulate.generator = generator;
      if (opt_seren->count()) cfg.simulate.sim.seren_enabled = seren_on;
      to_run = {"simulate"};
    } else if (cmd_sweep->parsed()) {
      if (cmd_sweep->count("--periods")) cfg.sweep_periods = periods;
      to_run = {"cache_sweep"};
    } else if (cmd_gen->parsed()) {
      if (cmd_gen->count("--users")) cfg.gen_corpus.users = g_users;
      if (cmd_gen->count("--items")) cfg.gen_corpus.items = g_items;
      if (cmd_gen->count("--categories")) cfg.gen_corpus.categories = g_categories;
      if (cmd_gen->count("--days")) cfg.gen_corpus.days = g_days;
      to_run = {"gen_corpus"};
    } else if (cmd_run->parsed()) {
      to_run = cmd_run->count("--stages") ? stages : cfg.stages;
    }

    seren::Pipeline pipeline(cfg);
    pipeline.run(to_run);
    for (const auto& s : to_run)
      std::cout << "stage " << s << ": ok (" << (cfg.out_dir / s).string() << ")\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
