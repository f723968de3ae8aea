#include "seren/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace seren {

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::sft: return "sft";
    case LossKind::ipo: return "ipo";
    case LossKind::ipo_plus_sft: return "ipo_plus_sft";
    case LossKind::dpo: return "dpo";
    case LossKind::kto: return "kto";
    case LossKind::simpo: return "simpo";
  }
  return "sft";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "sft") return LossKind::sft;
  if (s == "ipo") return LossKind::ipo;
  if (s == "ipo_plus_sft") return LossKind::ipo_plus_sft;
  if (s == "dpo") return LossKind::dpo;
  if (s == "kto") return LossKind::kto;
  if (s == "simpo") return LossKind::simpo;
  throw ValidationError("unknown loss kind: " + s);
}

std::string describe(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "loss=" << to_string(cfg.loss);
  switch (cfg.loss) {
    case LossKind::sft: break;
    case LossKind::ipo: out << " tau=" << cfg.tau; break;
    case LossKind::ipo_plus_sft:
      out << " tau=" << cfg.tau << " alpha=" << cfg.alpha;
      break;
    case LossKind::dpo: out << " beta=" << cfg.beta; break;
    case LossKind::kto:
      out << " beta=" << cfg.beta << " lambda_d=" << cfg.lambda_d
          << " lambda_u=" << cfg.lambda_u;
      break;
    case LossKind::simpo:
      out << " beta=" << cfg.beta << " gamma=" << cfg.gamma;
      break;
  }
  out << " lr=" << cfg.lr << " steps=" << cfg.steps << " seed=" << cfg.seed;
  return out.str();
}

LossResult compute_loss(const TabularPolicy& policy, const TabularPolicy* ref,
                        const TrainBatch& batch, const TrainConfig& cfg) {
  auto need_ref = [&]() -> const TabularPolicy& {
    if (!ref) {
      throw ValidationError(std::string(to_string(cfg.loss)) +
                            " needs a reference policy");
    }
    return *ref;
  };
  switch (cfg.loss) {
    case LossKind::sft:
      return sft_loss(policy, batch.sft);
    case LossKind::ipo:
      return ipo_loss(policy, need_ref(), batch.pairs, cfg.tau);
    case LossKind::ipo_plus_sft:
      return ipo_plus_sft_loss(policy, need_ref(), batch.pairs, batch.sft,
                               cfg.tau, cfg.alpha);
    case LossKind::dpo:
      return dpo_loss(policy, need_ref(), batch.pairs, cfg.beta);
    case LossKind::kto:
      return kto_loss(policy, need_ref(), batch.kto, cfg.beta, cfg.lambda_d,
                      cfg.lambda_u);
    case LossKind::simpo:
      return simpo_loss(policy, batch.pairs, cfg.beta, cfg.gamma);
  }
  throw ValidationError("unhandled loss kind");
}

TrainResult train(TabularPolicy& policy, const TabularPolicy* ref,
                  const TrainBatch& batch, const TrainConfig& cfg) {
  if (cfg.steps <= 0) throw ValidationError("steps must be positive");
  if (!(cfg.lr > 0.0)) throw ValidationError("lr must be positive");
  TrainResult result;
  result.curve.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 1; step <= cfg.steps; ++step) {
    LossResult lr_result = compute_loss(policy, ref, batch, cfg);
    if (!std::isfinite(lr_result.loss)) {
      throw SerenError("training diverged at step " + std::to_string(step) +
                       ": loss is not finite");
    }
    result.curve.push_back({step, lr_result.loss, lr_result.mean_h});
    auto& theta = policy.params();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] -= cfg.lr * lr_result.grad[i];
    }
  }
  LossResult final_result = compute_loss(policy, ref, batch, cfg);
  if (!std::isfinite(final_result.loss)) {
    throw SerenError("training diverged at step " + std::to_string(cfg.steps) +
                     ": loss is not finite after the final update");
  }
  result.final_loss = final_result.loss;
  result.final_mean_h = final_result.mean_h;
  return result;
}

void write_curve_csv(const std::filesystem::path& path,
                     const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw SerenError("cannot open for writing: " + path.string());
  out << "step,loss,mean_h\n";
  out.precision(17);
  for (const auto& info : result.curve) {
    out << info.step << ',' << info.loss << ',';
    if (info.mean_h) out << *info.mean_h;
    out << '\n';
  }
  if (!out) throw SerenError("failed writing curve: " + path.string());
}

}  // namespace seren
