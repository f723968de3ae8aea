#pragma once
// Preference-alignment objectives over a TabularPolicy, each with its exact
// analytic gradient, plus a central-difference gradient checker.
//
// Shared notation, per batch element i with prompt row x and token ids y:
//   lp(y|x)   = sum_t log softmax(theta[x, t])[y_t]
//   h_i       = (lp_theta(w) - lp_theta(l)) - (lp_ref(w) - lp_ref(l)),
//               the implicit reward margin of preferred w over dispreferred l.
//
// Objectives (all means over the batch):
//   sft    L = -mean lp_theta(y)
//   ipo    L = mean (h - 1/(2*tau))^2
//   ipo+sft L = L_ipo + alpha * L_sft   (alpha = 0 reduces bitwise to ipo)
//   dpo    L = mean -log sigmoid(beta * h)
//   kto    r = lp_theta(y) - lp_ref(y); z0 = sum_t KL(pi_theta(x,t) || pi_ref(x,t))
//          (z0 is the exact per-prompt KL over all max_len positions and is
//          differentiated through, keeping finite differences exact)
//          L = mean [lambda_y - v],  v = lambda_D*sigmoid(beta*(r - z0)) for
//          desirable y, lambda_U*sigmoid(beta*(z0 - r)) for undesirable y
//   simpo  L = mean -log sigmoid(beta/|w| * lp_theta(w)
//                                - beta/|l| * lp_theta(l) - gamma)

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seren/policy.hpp"

namespace seren {

struct SftExample {
  std::string prompt;
  std::vector<int> response;
};

struct PairExample {
  std::string prompt;
  std::vector<int> preferred;
  std::vector<int> dispreferred;
};

struct KtoExample {
  std::string prompt;
  std::vector<int> response;
  bool desirable = true;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // same layout/size as policy.params()
  // Mean reward margin where the objective defines one: mean h for
  // ipo/ipo+sft/dpo, mean r for kto, mean length-normalized margin for simpo.
  std::optional<double> mean_h;
};

LossResult sft_loss(const TabularPolicy& policy,
                    std::span<const SftExample> batch);

LossResult ipo_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                    std::span<const PairExample> pairs, double tau);

// L_ipo + alpha * L_sft. The sft batch may be empty only when alpha == 0.
LossResult ipo_plus_sft_loss(const TabularPolicy& policy,
                             const TabularPolicy& ref,
                             std::span<const PairExample> pairs,
                             std::span<const SftExample> sft_batch, double tau,
                             double alpha);

LossResult dpo_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                    std::span<const PairExample> pairs, double beta);

LossResult kto_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                    std::span<const KtoExample> batch, double beta,
                    double lambda_d = 1.0, double lambda_u = 1.0);

LossResult simpo_loss(const TabularPolicy& policy,
                      std::span<const PairExample> pairs, double beta,
                      double gamma);

// Numerically stable helpers shared by the losses and exposed for tests.
double sigmoid(double x);
double softplus(double x);  // log(1 + e^x)

// --- Finite-difference gradient check. ---
//
// Central differences with step eps on every parameter. The relative error
// for parameter j is |analytic_j - numeric_j| / max(1e-3, |analytic_j|,
// |numeric_j|); the floor keeps roundoff noise on near-zero gradient entries
// from registering as disagreement while real sign/scale bugs (O(0.1..1))
// still stand out.
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

using LossFn = std::function<LossResult(const TabularPolicy&)>;

GradCheckReport grad_check(const LossFn& fn, TabularPolicy policy,
                           double eps = 1e-5);

}  // namespace seren
