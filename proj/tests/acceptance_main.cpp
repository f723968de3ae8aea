// Acceptance harness: eleven end-to-end checks, each printing exactly one
// "criterion N: PASS|FAIL - detail" line. Run everything (no arguments) or a
// single check with --criterion N; the exit code is 0 only if every executed
// criterion passed. Tolerances, scales, and runtime bounds are stated inline
// next to each check.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "helpers/label_oracle.hpp"
#include "helpers/test_util.hpp"
#include "seren/cdi_curation.hpp"
#include "seren/generate_eval.hpp"
#include "seren/losses.hpp"
#include "seren/nearline_sim.hpp"
#include "seren/pipeline.hpp"
#include "seren/seren_label.hpp"
#include "seren/trainer.hpp"

namespace fs = std::filesystem;
using namespace seren;
using namespace seren::testutil;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

struct Result {
  bool pass = true;
  std::string detail;
};

// Accumulates failure messages; done() turns them into a one-line detail.
class Checker {
 public:
  void require(bool ok, std::string msg) {
    if (ok) return;
    pass_ = false;
    if (fails_.size() < 6)
      fails_.push_back(std::move(msg));
    else
      ++suppressed_;
  }
  bool passing() const { return pass_; }
  Result done(std::string ok_detail) const {
    if (pass_) return {true, std::move(ok_detail)};
    std::string d;
    for (std::size_t i = 0; i < fails_.size(); ++i) {
      if (i) d += "; ";
      d += fails_[i];
    }
    if (suppressed_) d += "; +" + std::to_string(suppressed_) + " more";
    return {false, d};
  }

 private:
  bool pass_ = true;
  std::vector<std::string> fails_;
  long suppressed_ = 0;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SerenError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Shared fixtures for the loss checks: an 8-token vocabulary, two known
// prompts plus unseen ones (background row), responses of length 1..3.
std::vector<std::string> loss_vocab() {
  std::vector<std::string> v;
  for (int i = 0; i < 8; ++i) v.push_back("t" + std::to_string(i));
  return v;
}

std::vector<PairExample> loss_pairs() {
  return {{"p0", {0, 1, 2}, {3, 4}},
          {"p1", {5}, {6, 7, 0}},
          {"q-unseen", {1, 2}, {2, 1}}};
}

std::vector<SftExample> loss_sft() {
  return {{"p0", {7, 6, 5}}, {"p1", {4}}, {"q-other", {3, 2}}};
}

std::vector<KtoExample> loss_kto() {
  return {{"p0", {0, 1}, true},
          {"p0", {2, 3}, false},
          {"p1", {4, 5, 6}, true},
          {"q-third", {7}, false}};
}

// --- criterion 1: analytic gradients vs central finite differences ---------
// All six losses on 10 random policies (V=8, L=3), max relative error < 1e-5,
// under 10 seconds total.
Result criterion_1() {
  auto t0 = Clock::now();
  auto vocab = loss_vocab();
  auto pairs = loss_pairs();
  auto sft = loss_sft();
  auto kto = loss_kto();

  Checker c;
  double worst = 0.0;
  std::string worst_at = "none";
  for (int rep = 0; rep < 10; ++rep) {
    TabularPolicy policy(vocab, {"p0", "p1"}, 3, 1000 + rep, 0.8);
    TabularPolicy ref(vocab, {"p0", "p1"}, 3, 5000 + rep, 0.8);
    struct Named {
      const char* name;
      LossFn fn;
    };
    const Named losses[] = {
        {"sft", [&](const TabularPolicy& p) { return sft_loss(p, sft); }},
        {"ipo",
         [&](const TabularPolicy& p) { return ipo_loss(p, ref, pairs, 0.37); }},
        {"ipo_plus_sft",
         [&](const TabularPolicy& p) {
           return ipo_plus_sft_loss(p, ref, pairs, sft, 0.37, 0.2);
         }},
        {"dpo",
         [&](const TabularPolicy& p) { return dpo_loss(p, ref, pairs, 1.7); }},
        {"kto",
         [&](const TabularPolicy& p) {
           return kto_loss(p, ref, kto, 0.9, 1.3, 0.7);
         }},
        {"simpo",
         [&](const TabularPolicy& p) { return simpo_loss(p, pairs, 2.0, 0.4); }},
    };
    for (const auto& named : losses) {
      GradCheckReport report = grad_check(named.fn, policy);
      if (report.max_rel_err > worst) {
        worst = report.max_rel_err;
        worst_at = named.name;
      }
      c.require(report.max_rel_err < 1e-5,
                std::string(named.name) + " policy " + std::to_string(rep) +
                    ": FD rel err " + fmt(report.max_rel_err, 3) + " >= 1e-5");
    }
  }
  double secs = seconds_since(t0);
  c.require(secs < 10.0, "runtime " + fmt(secs, 3) + "s >= 10s");
  return c.done("6 losses x 10 random policies (V=8, L=3): max FD rel err " +
                fmt(worst, 3) + " (" + worst_at + "), " + fmt(secs, 2) + "s");
}

// --- criterion 2: IPO fixed point -------------------------------------------
// One preference pair, full-batch descent: h converges to 1/(2*tau) within
// 1e-3 in at most 10,000 steps for tau in {0.01, 0.1, 1}, < 30 s per tau.
Result criterion_2() {
  Checker c;
  std::ostringstream ok;
  ok << "h -> 1/(2*tau) on one pair:";
  for (double tau : {0.01, 0.1, 1.0}) {
    auto t0 = Clock::now();
    TabularPolicy policy({"a", "b", "c"}, {"p0"}, 3);
    TabularPolicy ref = policy;
    TrainBatch batch;
    batch.pairs = {{"p0", {0}, {1}}};
    TrainConfig cfg;
    cfg.loss = LossKind::ipo;
    cfg.tau = tau;
    cfg.lr = 0.2;
    cfg.steps = 10000;
    TrainResult res = train(policy, &ref, batch, cfg);
    double target = 1.0 / (2.0 * tau);
    double err = std::abs(res.final_mean_h.value_or(1e18) - target);
    // First step whose pre-update h is already inside the tolerance.
    int first_ok = -1;
    for (const auto& step : res.curve) {
      if (step.mean_h && std::abs(*step.mean_h - target) < 1e-3) {
        first_ok = step.step;
        break;
      }
    }
    double secs = seconds_since(t0);
    c.require(err < 1e-3, "tau=" + fmt(tau) + ": |h - " + fmt(target) +
                              "| = " + fmt(err, 3) + " >= 1e-3");
    c.require(secs < 30.0,
              "tau=" + fmt(tau) + ": runtime " + fmt(secs, 3) + "s >= 30s");
    ok << " tau=" << fmt(tau) << " err=" << fmt(err, 2) << " (step "
       << first_ok << ", " << fmt(secs, 2) << "s);";
  }
  return c.done(ok.str());
}

// --- criterion 3: combined-loss degeneracy ----------------------------------
// alpha=0 reproduces pure IPO bitwise; alpha=0.2 equals the hand-summed
// combination to 1e-12 in both loss and every gradient entry.
Result criterion_3() {
  Checker c;
  auto vocab = loss_vocab();
  auto pairs = loss_pairs();
  auto sft = loss_sft();
  TabularPolicy policy(vocab, {"p0", "p1"}, 3, 42, 0.8);
  TabularPolicy ref(vocab, {"p0", "p1"}, 3, 43, 0.8);

  LossResult pure = ipo_loss(policy, ref, pairs, 0.37);
  LossResult zero = ipo_plus_sft_loss(policy, ref, pairs, sft, 0.37, 0.0);
  c.require(zero.loss == pure.loss, "alpha=0 loss differs from pure IPO");
  c.require(zero.grad == pure.grad, "alpha=0 gradient differs from pure IPO");
  c.require(zero.mean_h == pure.mean_h, "alpha=0 mean h differs from pure IPO");
  LossResult zero_empty =
      ipo_plus_sft_loss(policy, ref, pairs, {}, 0.37, 0.0);
  c.require(zero_empty.loss == pure.loss,
            "alpha=0 with empty sft batch differs from pure IPO");

  LossResult s = sft_loss(policy, sft);
  LossResult comb = ipo_plus_sft_loss(policy, ref, pairs, sft, 0.37, 0.2);
  double dl = std::abs(comb.loss - (pure.loss + 0.2 * s.loss));
  c.require(dl <= 1e-12,
            "alpha=0.2 loss off hand-sum by " + fmt(dl, 3) + " > 1e-12");
  double dg = 0.0;
  for (std::size_t j = 0; j < comb.grad.size(); ++j)
    dg = std::max(dg, std::abs(comb.grad[j] - (pure.grad[j] + 0.2 * s.grad[j])));
  c.require(dg <= 1e-12,
            "alpha=0.2 gradient off hand-sum by " + fmt(dg, 3) + " > 1e-12");
  return c.done("alpha=0 bitwise-equal to IPO; alpha=0.2 off hand-sum by loss " +
                fmt(dl, 2) + ", grad " + fmt(dg, 2));
}

// --- criterion 4: labeler oracle equivalence --------------------------------
// Both labelers agree exactly with the brute-force rescanning oracle on 1,000
// random logs of >= 50 events, in under 10 seconds.
Result criterion_4() {
  auto t0 = Clock::now();
  SimConfig world;
  world.users = 1;
  world.items = 300;
  world.categories = 20;
  Catalog cat = make_synthetic_catalog(world);

  SerenWindow offline{10, {SerenDim::category}};
  SerenWindow online = online_window(10);
  Rng rng(8080);
  Checker c;
  long offline_checked = 0, online_checked = 0;
  std::size_t min_events = SIZE_MAX;
  for (int i = 0; i < 1000; ++i) {
    std::string uid = "u" + std::to_string(i);
    UserLog log = random_log(cat, uid, rng);
    min_events = std::min(min_events, log.events.size());
    for (const auto& event : log.events) {
      if (event.kind == EventKind::click) {
        bool got = label_offline(cat, log, event, offline);
        bool want = oracle_offline(cat, log, event, offline.n_days);
        if (got != want)
          c.require(false, "offline mismatch: " + uid + " day " +
                               std::to_string(event.day) + " seq " +
                               std::to_string(event.seq));
        ++offline_checked;
      }
      if (event.kind == EventKind::exposure) {
        bool got = label_online(cat, log, event, online);
        bool want = oracle_online(cat, log, event, online);
        if (got != want)
          c.require(false, "online mismatch: " + uid + " day " +
                               std::to_string(event.day) + " seq " +
                               std::to_string(event.seq));
        ++online_checked;
      }
    }
  }
  double secs = seconds_since(t0);
  c.require(min_events >= 50, "a log had only " + std::to_string(min_events) +
                                  " events (< 50)");
  c.require(secs < 10.0, "runtime " + fmt(secs, 3) + "s >= 10s");
  return c.done("exact agreement on " + std::to_string(offline_checked) +
                " offline + " + std::to_string(online_checked) +
                " online targets over 1000 logs (min " +
                std::to_string(min_events) + " events), " + fmt(secs, 2) + "s");
}

// --- criterion 5: ranking-metric oracle --------------------------------------
// Single-positive closed forms on 10,000 random ranks, exact equality; the
// three @1 metrics coincide on every run.
Result criterion_5() {
  Checker c;
  const std::vector<int> ks = {1, 3, 5, 10, 37};
  Rng rng(505);
  std::vector<int> ranks(10000);
  for (auto& r : ranks) r = 1 + static_cast<int>(rng.below(200));

  // Per-rank closed forms, checked sample by sample.
  long mismatches = 0;
  for (int r : ranks) {
    MetricReport one = seren_metrics({r}, ks);
    for (int k : one.ks) {
      double hr = r <= k ? 1.0 : 0.0;
      double ndcg = r <= k ? 1.0 / std::log2(1.0 + static_cast<double>(r)) : 0.0;
      double map = r <= k ? 1.0 / static_cast<double>(r) : 0.0;
      if (one.hr.at(k) != hr || one.ndcg.at(k) != ndcg || one.map.at(k) != map)
        ++mismatches;
    }
    if (one.hr.at(1) != one.ndcg.at(1) || one.hr.at(1) != one.map.at(1))
      c.require(false, "@1 metrics diverge at rank " + std::to_string(r));
  }
  c.require(mismatches == 0, std::to_string(mismatches) +
                                 " single-rank closed-form mismatches");

  // Aggregate over all 10,000 ranks: summed closed forms divided once.
  MetricReport all = seren_metrics(ranks, ks);
  double n = static_cast<double>(ranks.size());
  for (int k : all.ks) {
    double hr = 0.0, ndcg = 0.0, map = 0.0;
    for (int r : ranks) {
      if (r <= k) {
        hr += 1.0;
        ndcg += 1.0 / std::log2(1.0 + static_cast<double>(r));
        map += 1.0 / static_cast<double>(r);
      }
    }
    c.require(all.hr.at(k) == hr / n,
              "aggregate HR@" + std::to_string(k) + " not exact");
    c.require(all.ndcg.at(k) == ndcg / n,
              "aggregate NDCG@" + std::to_string(k) + " not exact");
    c.require(all.map.at(k) == map / n,
              "aggregate MAP@" + std::to_string(k) + " not exact");
  }
  c.require(all.hr.at(1) == all.ndcg.at(1) && all.hr.at(1) == all.map.at(1),
            "aggregate @1 metrics diverge");

  // Pinned spot values.
  MetricReport top = seren_metrics({1, 1, 1}, ks);
  for (int k : top.ks) {
    c.require(top.hr.at(k) == 1.0 && top.ndcg.at(k) == 1.0 && top.map.at(k) == 1.0,
              "all-rank-1 metrics not exactly 1.0 at k=" + std::to_string(k));
  }
  MetricReport three = seren_metrics({3}, {3});
  c.require(three.ndcg.at(3) == 0.5, "NDCG@3 of rank 3 is not exactly 0.5");
  c.require(three.hr.at(3) == 1.0, "HR@3 of rank 3 is not exactly 1.0");
  c.require(three.map.at(3) == 1.0 / 3.0, "MAP@3 of rank 3 is not exactly 1/3");

  // 200 random batches: the @1 columns must coincide on every run.
  Rng batch_rng(606);
  for (int b = 0; b < 200; ++b) {
    std::vector<int> batch(50);
    for (auto& r : batch) r = 1 + static_cast<int>(batch_rng.below(40));
    MetricReport rep = seren_metrics(batch, {1, 5});
    if (rep.hr.at(1) != rep.ndcg.at(1) || rep.hr.at(1) != rep.map.at(1))
      c.require(false, "@1 metrics diverge on batch " + std::to_string(b));
  }
  return c.done("closed forms exact on 10000 ranks (and in aggregate); "
                "rank-1 run all 1.0; NDCG@3(rank 3) == 0.5; @1 columns "
                "coincide on 10200 runs");
}

// --- criterion 6: cache contract ---------------------------------------------
// 100 users, 7 days, randomized schedule: zero servings older than the TTL and
// hits + generations + failed generations == lookups, exactly, every day.
Result criterion_6() {
  SimConfig cfg;
  cfg.horizon_days = 7;
  cfg.seed = 2026;
  OnlineReport report = run_simulation(cfg);

  Checker c;
  c.require(report.days.size() == 7, "expected 7 simulated days");
  c.require(report.stale_servings == 0,
            std::to_string(report.stale_servings) + " stale servings");
  for (const auto& d : report.days) {
    c.require(d.hits + d.qps + d.eqps == d.lookups,
              "day " + std::to_string(d.day) + ": hits+qps+eqps = " +
                  std::to_string(d.hits + d.qps + d.eqps) + " != lookups " +
                  std::to_string(d.lookups));
  }
  long lookups = report.total(&DayStats::lookups);
  long hits = report.total(&DayStats::hits);
  long qps = report.total(&DayStats::qps);
  long eqps = report.total(&DayStats::eqps);
  c.require(hits + qps + eqps == lookups, "totals do not balance");
  c.require(lookups > 0, "no cache lookups happened");
  return c.done("100 users x 7 days: " + std::to_string(lookups) +
                " lookups == " + std::to_string(hits) + " hits + " +
                std::to_string(qps) + " gens + " + std::to_string(eqps) +
                " failures; 0 stale servings");
}

// --- criterion 7: cache-frequency trend --------------------------------------
// Fixed seed, 250 generations/day budget, refresh periods {6h, 12h, 24h}:
// QPS strictly falls, S-PVR never rises, and E-QPS > 0 only when demand
// exceeded the budget. Under 2 minutes.
Result criterion_7() {
  auto t0 = Clock::now();
  SimConfig cfg;
  cfg.seed = 7;
  cfg.qps_budget_per_day = 250;
  const std::vector<int> periods = {6, 12, 24};
  SweepReport sweep = cache_sweep(cfg, periods);

  Checker c;
  c.require(sweep.rows.size() == 3, "expected 3 sweep rows");
  const long cap = cfg.qps_budget_per_day * cfg.horizon_days;
  std::ostringstream ok;
  ok << "budget " << cfg.qps_budget_per_day << "/day:";
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    const SweepRow& row = sweep.rows[i];
    c.require(row.period_hours == periods[i], "row period order mismatch");
    if (i > 0) {
      c.require(row.qps < sweep.rows[i - 1].qps,
                "QPS did not fall from " + std::to_string(periods[i - 1]) +
                    "h to " + std::to_string(periods[i]) + "h");
      c.require(row.s_pvr <= sweep.rows[i - 1].s_pvr,
                "S-PVR rose from " + std::to_string(periods[i - 1]) + "h to " +
                    std::to_string(periods[i]) + "h");
    }
    if (row.eqps > 0)
      c.require(row.qps == cap, std::to_string(row.period_hours) +
                                    "h: E-QPS > 0 but budget not exhausted");
    else
      c.require(row.qps <= cap, std::to_string(row.period_hours) +
                                    "h: generations exceed the budget");
    ok << " " << row.period_hours << "h qps=" << row.qps
       << " eqps=" << row.eqps << " s_pvr=" << fmt(row.s_pvr, 4) << ";";
  }
  double secs = seconds_since(t0);
  c.require(secs < 120.0, "runtime " + fmt(secs, 3) + "s >= 120s");
  ok << " " << fmt(secs, 2) << "s";
  return c.done(ok.str());
}

// --- criterion 8: filter-bubble emergence and mitigation ---------------------
// Personalized-only: exposure-category entropy is non-increasing after a
// 5-day burn-in. Serendipity channel on the same seed: mean entropy and mean
// S-PVR strictly rise. S-PVR is non-decreasing in w. Under 5 minutes.
Result criterion_8() {
  auto t0 = Clock::now();
  Checker c;

  SimConfig base;
  base.seed = 7;
  base.seren_enabled = false;
  OnlineReport off = run_simulation(base);
  for (std::size_t i = 6; i < off.days.size(); ++i) {
    c.require(off.days[i].entropy <= off.days[i - 1].entropy,
              "entropy rose on day " + std::to_string(i) + " (" +
                  fmt(off.days[i - 1].entropy, 6) + " -> " +
                  fmt(off.days[i].entropy, 6) + ")");
  }

  std::map<double, double> spvr_by_w;
  double on_entropy = 0.0, on_spvr = 0.0;
  double prev = -1.0;
  for (double w : {0.0, 0.25, 0.5, 1.0}) {
    SimConfig cfg = base;
    cfg.seren_enabled = true;
    cfg.seren_weight = w;
    OnlineReport rep = run_simulation(cfg);
    spvr_by_w[w] = rep.mean_s_pvr();
    c.require(rep.mean_s_pvr() >= prev,
              "S-PVR fell at w=" + fmt(w) + " (" + fmt(prev, 4) + " -> " +
                  fmt(rep.mean_s_pvr(), 4) + ")");
    prev = rep.mean_s_pvr();
    if (w == 0.5) {
      on_entropy = rep.mean_entropy();
      on_spvr = rep.mean_s_pvr();
    }
  }
  c.require(on_entropy > off.mean_entropy(),
            "serendipity channel did not raise mean entropy (" +
                fmt(off.mean_entropy(), 6) + " -> " + fmt(on_entropy, 6) + ")");
  c.require(on_spvr > off.mean_s_pvr(),
            "serendipity channel did not raise mean S-PVR (" +
                fmt(off.mean_s_pvr(), 4) + " -> " + fmt(on_spvr, 4) + ")");

  double secs = seconds_since(t0);
  c.require(secs < 300.0, "runtime " + fmt(secs, 3) + "s >= 300s");
  std::ostringstream ok;
  ok << "entropy non-increasing after burn-in; off->on mean entropy "
     << fmt(off.mean_entropy(), 4) << "->" << fmt(on_entropy, 4) << ", S-PVR "
     << fmt(off.mean_s_pvr(), 4) << "->" << fmt(on_spvr, 4) << "; S-PVR by w:";
  for (const auto& [w, v] : spvr_by_w) ok << " " << fmt(w) << ":" << fmt(v, 4);
  ok << "; " << fmt(secs, 2) << "s";
  return c.done(ok.str());
}

// --- criterion 9: curation conservation ---------------------------------------
// Denoising partitions 1,000 scripted-judge samples exactly, and every emitted
// preference pair has a teacher-score gap of at least delta.
Result criterion_9() {
  Checker c;
  SimConfig world;
  world.users = 1;
  world.items = 150;
  world.categories = 12;
  Catalog cat = make_synthetic_catalog(world);
  std::vector<std::string> item_ids;
  for (const auto& [id, item] : cat.items) item_ids.push_back(id);

  // Scripted judge: five behaviours cycling by sample index. Scripts are keyed
  // by the rendered prompt, so expected counts come from a first-write-wins
  // map over prompts (identical prompts share one script).
  auto backend = std::make_shared<ScriptedBackend>();
  std::map<std::string, int> script_kind;  // prompt -> 0..4
  std::vector<SerenSample> samples;
  for (int i = 0; i < 1000; ++i) {
    SerenSample s;
    s.user_id = "u" + std::to_string(i);
    s.target_item_id = item_ids[(i * 7 + 2) % item_ids.size()];
    s.target_day = 2 + i % 5;
    s.label = true;
    s.context.push_back(ev(s.user_id, item_ids[(i * 3) % item_ids.size()], 0, 0,
                           EventKind::exposure));
    s.context.push_back(ev(s.user_id, item_ids[(i * 3 + 1) % item_ids.size()],
                           1, 0, EventKind::exposure));
    std::string prompt = render_judge_prompt(cat, s);
    int kind = i % 5;
    auto [it, inserted] = script_kind.emplace(prompt, kind);
    if (inserted) {
      switch (kind) {
        case 0:
          backend->add_failure(GatewayRole::judge, prompt,
                               GatewayErrorKind::timeout, "scripted timeout");
          break;
        case 1:
          backend->add(GatewayRole::judge, prompt,
                       VerdictPayload{true, "novel", 0.95});
          break;
        case 2:
          backend->add(GatewayRole::judge, prompt,
                       VerdictPayload{false, "familiar", 0.9});
          break;
        case 3:
          backend->add(GatewayRole::judge, prompt,
                       VerdictPayload{true, "unsure", 0.5});
          break;
        default:
          backend->add(GatewayRole::judge, prompt,
                       VerdictPayload{false, "unsure", 0.65});
          break;
      }
    }
    samples.push_back(std::move(s));
  }
  long want_clean = 0, want_dropped = 0, want_escalated = 0;
  for (const auto& s : samples) {
    switch (script_kind.at(render_judge_prompt(cat, s))) {
      case 1: ++want_clean; break;
      case 2: ++want_dropped; break;
      default: ++want_escalated; break;  // failure or low confidence
    }
  }

  Gateway judge(backend);
  DenoiseResult den = cdi_denoise(cat, samples, judge, 0.7);
  c.require(den.clean.size() + den.dropped.size() + den.escalations.size() ==
                samples.size(),
            "partition sizes do not sum to the input count");
  c.require(static_cast<long>(den.clean.size()) == want_clean,
            "kept " + std::to_string(den.clean.size()) + ", expected " +
                std::to_string(want_clean));
  c.require(static_cast<long>(den.dropped.size()) == want_dropped,
            "dropped " + std::to_string(den.dropped.size()) + ", expected " +
                std::to_string(want_dropped));
  c.require(static_cast<long>(den.escalations.size()) == want_escalated,
            "escalated " + std::to_string(den.escalations.size()) +
                ", expected " + std::to_string(want_escalated));

  // Scripted teacher over 250 prompts x 4 responses; every emitted pair must
  // clear the gap threshold, smaller nonzero gaps escalate.
  const int delta = 2;
  auto teacher_backend = std::make_shared<ScriptedBackend>();
  std::vector<InteractionEvent> context;
  context.push_back(ev("u-pairs", item_ids[0], 0, 0, EventKind::exposure));
  std::vector<std::vector<std::vector<std::string>>> response_groups;
  for (int g = 0; g < 250; ++g) {
    std::vector<std::vector<std::string>> responses;
    // Four distinct scores per group with pairwise gaps covering 1 (which
    // must escalate) through >= delta (which must pair).
    const int offsets[] = {0, 1, 3, 5};
    for (int r = 0; r < 4; ++r) {
      std::vector<std::string> tokens = {"resp", "g" + std::to_string(g),
                                         "r" + std::to_string(r)};
      int score = 1 + (g + offsets[r]) % 6;
      teacher_backend->add(GatewayRole::score,
                           render_score_prompt(cat, context, tokens),
                           ScorePayload{score});
      responses.push_back(std::move(tokens));
    }
    response_groups.push_back(std::move(responses));
  }
  Gateway teacher(teacher_backend);
  long pair_count = 0, pair_escalations = 0;
  int min_gap = INT_MAX;
  for (int g = 0; g < 250; ++g) {
    PairResult pr = cdi_pair(cat, context, "prompt " + std::to_string(g),
                             response_groups[g], teacher, delta, 3);
    for (const auto& p : pr.pairs) {
      ++pair_count;
      min_gap = std::min(min_gap, p.score_w - p.score_l);
      c.require(p.score_w - p.score_l >= delta,
                "pair gap " + std::to_string(p.score_w - p.score_l) +
                    " < delta in group " + std::to_string(g));
      c.require(p.score_w >= 1 && p.score_w <= 6 && p.score_l >= 1 &&
                    p.score_l <= 6,
                "pair score out of [1, 6] in group " + std::to_string(g));
    }
    pair_escalations += static_cast<long>(pr.escalations.size());
  }
  c.require(pair_count > 0, "no preference pairs were emitted");
  return c.done("denoise partition exact: " + std::to_string(den.clean.size()) +
                " kept + " + std::to_string(den.dropped.size()) + " dropped + " +
                std::to_string(den.escalations.size()) + " escalated = 1000; " +
                std::to_string(pair_count) + " pairs all with gap >= " +
                std::to_string(delta) + " (min " + std::to_string(min_gap) +
                "), " + std::to_string(pair_escalations) +
                " pair escalations");
}

// --- criterion 10: diversity metrics ------------------------------------------
// Exact oracle on a hand fixture; the 30-sample per-user protocol; duplicate
// samples strictly reduce avg_title_cnt; IPO vs SFT-only on the toy corpus
// (an inverted ordering is reported as a finding, not a failure).
Result criterion_10() {
  Checker c;

  // Hand-computable fixture: distinct-title counts 2 and 3 -> average 2.5.
  auto retrieve_first = [](const std::vector<std::string>& title) {
    std::set<std::string> out;
    if (!title.empty()) out.insert(title.front());
    return out;
  };
  std::vector<std::vector<std::vector<std::string>>> fixture = {
      {{"a", "b"}, {"c", "d"}, {"a", "b"}},
      {{"e"}, {"f"}, {"g"}},
  };
  DiversityReport hand =
      diversity_metrics(fixture, retrieve_first, {"a", "zzz"});
  c.require(hand.avg_title_cnt == 2.5, "hand fixture avg_title_cnt != 2.5");
  c.require(hand.avg_cate_cnt == 2.5, "hand fixture avg_cate_cnt != 2.5");
  c.require(hand.hit_rate == 0.5, "hand fixture hit_rate != 0.5");
  c.require(hand.user_count == 2, "hand fixture user_count != 2");

  // 30 samples per user for 20 users; replacing the last 10 samples of each
  // user with copies of their first sample must strictly reduce the average
  // distinct-title count.
  std::vector<std::string> vocab;
  for (int i = 0; i < 40; ++i) vocab.push_back("w" + std::to_string(i));
  std::vector<std::string> prompts;
  for (int u = 0; u < 20; ++u) prompts.push_back("user=u" + std::to_string(u));
  TabularPolicy sampler(vocab, prompts, 8, 77, 0.5);
  SampleParams sp;
  sp.n = 30;
  sp.temperature = 1.0;
  sp.repetition_penalty = 1.0;
  sp.seed = 9090;
  std::vector<std::vector<std::vector<std::string>>> per_user, with_dups;
  std::vector<std::string> targets;
  for (const auto& key : prompts) {
    per_user.push_back(sample_policy(sampler, key, sp));
    targets.push_back("w0");
  }
  with_dups = per_user;
  for (auto& lists : with_dups)
    for (std::size_t j = 20; j < lists.size(); ++j) lists[j] = lists[0];
  auto retrieve_tokens = [](const std::vector<std::string>& title) {
    return std::set<std::string>(title.begin(), title.end());
  };
  DiversityReport base = diversity_metrics(per_user, retrieve_tokens, targets);
  DiversityReport dup = diversity_metrics(with_dups, retrieve_tokens, targets);
  c.require(base.user_count == 20 && dup.user_count == 20,
            "protocol did not cover 20 users");
  c.require(dup.avg_title_cnt < base.avg_title_cnt,
            "duplicates did not strictly reduce avg_title_cnt (" +
                fmt(base.avg_title_cnt, 4) + " -> " + fmt(dup.avg_title_cnt, 4) +
                ")");

  // IPO vs SFT-only on the toy corpus, through the real pipeline.
  TempDir tmp("accept-c10");
  PipelineConfig pc;
  pc.seed = 7;
  pc.out_dir = tmp.path() / "out";
  pc.categories_path = pc.out_dir / "gen_corpus" / "categories.jsonl";
  pc.items_path = pc.out_dir / "gen_corpus" / "items.jsonl";
  pc.events_path = pc.out_dir / "gen_corpus" / "events.jsonl";
  pc.users_path = pc.out_dir / "gen_corpus" / "users.jsonl";
  pc.gen_corpus = {100, 1000, 25, 30, 5};
  pc.stages = {"gen_corpus", "ingest", "label", "profile",
               "curate",     "train",  "evaluate"};
  pc.train.align.loss = LossKind::ipo;
  pc.train.align.tau = 0.1;
  pc.train.align.lr = 0.05;
  pc.train.align.steps = 400;
  pc.train.sft_steps = 200;
  pc.evaluate.max_samples = 200;
  pc.evaluate.diversity_users = 20;  // 30 samples per user by default
  // Cooler sampling keeps the distinct-title count off its ceiling of 30 so
  // the two checkpoints can actually separate.
  pc.evaluate.temperature = 0.3;
  Pipeline pipeline(pc);
  pipeline.run(pc.stages);

  nlohmann::json div = nlohmann::json::parse(
      slurp(pc.out_dir / "evaluate" / "diversity.json"));
  double ipo_titles = div.at("policy").at("avg_title_cnt").get<double>();
  double sft_titles = div.at("sft").at("avg_title_cnt").get<double>();
  c.require(div.at("policy").at("user_count").get<int>() == 20,
            "pipeline diversity protocol did not cover 20 users");

  std::string ordering =
      ipo_titles >= sft_titles
          ? "IPO avg_title_cnt " + fmt(ipo_titles, 4) + " >= SFT " +
                fmt(sft_titles, 4)
          : "finding: IPO avg_title_cnt " + fmt(ipo_titles, 4) + " < SFT " +
                fmt(sft_titles, 4) + " on this seed (reported, not failed)";
  return c.done("oracle exact; duplicates reduce avg_title_cnt " +
                fmt(base.avg_title_cnt, 4) + " -> " + fmt(dup.avg_title_cnt, 4) +
                " at 30 samples x 20 users; " + ordering);
}

// --- criterion 11: end-to-end determinism -------------------------------------
// The bundled toy-corpus config runs end to end twice (fresh working
// directories, same seed) in under 10 minutes per run, and all nine stage
// manifests are byte-identical between the runs.
Result criterion_11() {
  Checker c;
  TempDir tmp("accept-c11");
  fs::path run_a = tmp.path() / "runA";
  fs::path run_b = tmp.path() / "runB";
  fs::create_directories(run_a);
  fs::create_directories(run_b);

  auto quoted = [](const std::string& s) { return "'" + s + "'"; };
  auto run_once = [&](const fs::path& dir) {
    std::string cmd = "cd " + quoted(dir.string()) + " && " +
                      quoted(SERENKIT_BIN_PATH) + " run --config " +
                      quoted(SEREN_TOY_CONFIG_PATH) + " > run.log 2>&1";
    int rc = std::system(cmd.c_str());
    return rc != -1 && WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };

  auto t0 = Clock::now();
  int rc_a = run_once(run_a);
  double secs_a = seconds_since(t0);
  c.require(rc_a == 0, "first run exited with " + std::to_string(rc_a));
  c.require(secs_a < 600.0,
            "first run took " + fmt(secs_a, 3) + "s >= 600s");

  auto t1 = Clock::now();
  int rc_b = run_once(run_b);
  double secs_b = seconds_since(t1);
  c.require(rc_b == 0, "second run exited with " + std::to_string(rc_b));
  c.require(secs_b < 600.0,
            "second run took " + fmt(secs_b, 3) + "s >= 600s");

  int matched = 0;
  const char* stages[] = {"gen_corpus", "ingest",   "label",
                          "profile",    "curate",   "train",
                          "evaluate",   "simulate", "cache_sweep"};
  if (rc_a == 0 && rc_b == 0) {
    for (const char* stage : stages) {
      fs::path a = run_a / "toy_out" / stage / "manifest.json";
      fs::path b = run_b / "toy_out" / stage / "manifest.json";
      if (!fs::exists(a) || !fs::exists(b)) {
        c.require(false, std::string(stage) + " manifest missing");
        continue;
      }
      if (slurp(a) == slurp(b))
        ++matched;
      else
        c.require(false, std::string(stage) + " manifests differ");
    }
    c.require(matched == 9, "only " + std::to_string(matched) +
                                "/9 manifests byte-identical");
  }
  return c.done("two full toy-corpus runs (" + fmt(secs_a, 4) + "s, " +
                fmt(secs_b, 4) + "s); " + std::to_string(matched) +
                "/9 stage manifests byte-identical");
}

using CriterionFn = Result (*)();
const CriterionFn kCriteria[] = {
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
    criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
    criterion_11};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
      if (only < 1 || only > 11) {
        std::cerr << "criterion must be in [1, 11]\n";
        return 2;
      }
    } else {
      std::cerr << "usage: seren_acceptance [--criterion N]\n";
      return 2;
    }
  }

  bool all_pass = true;
  for (int n = 1; n <= 11; ++n) {
    if (only != 0 && n != only) continue;
    Result result;
    try {
      result = kCriteria[n - 1]();
    } catch (const std::exception& e) {
      result = {false, std::string("unhandled error: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (result.pass ? "PASS" : "FAIL")
              << " - " << result.detail << std::endl;
    all_pass = all_pass && result.pass;
  }
  return all_pass ? 0 : 1;
}
