#pragma once
// Full-batch gradient-descent trainer over the alignment losses, with a
// per-step diagnostic curve (loss and mean reward margin h). Training is
// exact gradient descent — no minibatching, no momentum — so runs are
// bit-reproducible and small fixtures have closed-form trajectories.

#include <filesystem>
#include <string>
#include <vector>

#include "seren/losses.hpp"

namespace seren {

enum class LossKind { sft, ipo, ipo_plus_sft, dpo, kto, simpo };

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

struct TrainConfig {
  LossKind loss = LossKind::ipo_plus_sft;
  double tau = 0.1;      // ipo / ipo_plus_sft
  double alpha = 0.2;    // sft weight inside ipo_plus_sft
  double beta = 1.0;     // dpo / kto / simpo
  double gamma = 0.0;    // simpo margin
  double lambda_d = 1.0; // kto desirable weight
  double lambda_u = 1.0; // kto undesirable weight
  double lr = 0.05;
  int steps = 1000;
  // Recorded in artifacts/describe(); full-batch gradient descent itself
  // draws no randomness, so the seed does not change the trajectory.
  std::uint64_t seed = 0;
};

std::string describe(const TrainConfig& cfg);

struct TrainBatch {
  std::vector<SftExample> sft;
  std::vector<PairExample> pairs;
  std::vector<KtoExample> kto;
};

struct TrainStepInfo {
  int step = 0;       // 1-based; loss/mean_h are measured before the update
  double loss = 0.0;
  std::optional<double> mean_h;
};

struct TrainResult {
  std::vector<TrainStepInfo> curve;  // one entry per step
  double final_loss = 0.0;           // loss after the last update
  std::optional<double> final_mean_h;
};

// Dispatches to the loss for cfg.loss over the relevant parts of the batch.
// ref may be null only for sft and simpo.
LossResult compute_loss(const TabularPolicy& policy, const TabularPolicy* ref,
                        const TrainBatch& batch, const TrainConfig& cfg);

// Runs cfg.steps full-batch gradient-descent updates in place. Throws
// SerenError naming the step index if the loss stops being finite.
TrainResult train(TabularPolicy& policy, const TabularPolicy* ref,
                  const TrainBatch& batch, const TrainConfig& cfg);

// Writes "step,loss,mean_h" CSV (mean_h column empty when undefined).
void write_curve_csv(const std::filesystem::path& path,
                     const TrainResult& result);

}  // namespace seren
