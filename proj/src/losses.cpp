#include "seren/losses.hpp"

#include <cmath>

namespace seren {

namespace {

void check_same_shape(const TabularPolicy& policy, const TabularPolicy& ref) {
  if (policy.vocab() != ref.vocab() || policy.max_len() != ref.max_len() ||
      policy.prompt_keys() != ref.prompt_keys()) {
    throw ValidationError("policy and reference have different shapes");
  }
}

void check_response(const TabularPolicy& policy, const std::vector<int>& resp,
                    const char* what) {
  if (resp.empty()) {
    throw ValidationError(std::string(what) + " response is empty");
  }
  if (static_cast<int>(resp.size()) > policy.max_len()) {
    throw ValidationError(std::string(what) + " response is longer than max_len");
  }
  for (int tok : resp) {
    if (tok < 0 || tok >= policy.vocab_size()) {
      throw ValidationError(std::string(what) + " response has a token id out of range");
    }
  }
}

void check_pairs(const TabularPolicy& policy, std::span<const PairExample> pairs) {
  if (pairs.empty()) throw ValidationError("empty preference batch");
  for (const auto& pair : pairs) {
    check_response(policy, pair.preferred, "preferred");
    check_response(policy, pair.dispreferred, "dispreferred");
    if (pair.preferred == pair.dispreferred) {
      throw ValidationError("degenerate pair: preferred equals dispreferred");
    }
  }
}

// Adds coeff * d lp(response | row) / d theta into grad:
// d lp / d theta[row, t, v] = [v == y_t] - p_v.
void add_logprob_grad(const TabularPolicy& policy, int row,
                      const std::vector<int>& resp, double coeff,
                      std::vector<double>& grad) {
  for (std::size_t t = 0; t < resp.size(); ++t) {
    auto p = policy.probs(row, static_cast<int>(t));
    std::size_t base = policy.index_of(row, static_cast<int>(t), 0);
    for (std::size_t v = 0; v < p.size(); ++v) grad[base + v] -= coeff * p[v];
    grad[base + static_cast<std::size_t>(resp[t])] += coeff;
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

LossResult sft_loss(const TabularPolicy& policy,
                    std::span<const SftExample> batch) {
  if (batch.empty()) throw ValidationError("empty sft batch");
  LossResult result;
  result.grad.assign(policy.param_count(), 0.0);
  double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    check_response(policy, ex.response, "sft");
    int row = policy.row_of(ex.prompt);
    result.loss -= inv_b * policy.logprob(row, ex.response);
    add_logprob_grad(policy, row, ex.response, -inv_b, result.grad);
  }
  return result;
}

LossResult ipo_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                    std::span<const PairExample> pairs, double tau) {
  check_same_shape(policy, ref);
  check_pairs(policy, pairs);
  if (tau <= 0.0) throw ValidationError("ipo tau must be positive");
  LossResult result;
  result.grad.assign(policy.param_count(), 0.0);
  double c = 1.0 / (2.0 * tau);
  double inv_b = 1.0 / static_cast<double>(pairs.size());
  double h_sum = 0.0;
  for (const auto& pair : pairs) {
    int row = policy.row_of(pair.prompt);
    double h = policy.logprob(row, pair.preferred) -
               policy.logprob(row, pair.dispreferred) -
               (ref.logprob(row, pair.preferred) -
                ref.logprob(row, pair.dispreferred));
    h_sum += h;
    result.loss += inv_b * (h - c) * (h - c);
    double dl_dh = 2.0 * inv_b * (h - c);
    add_logprob_grad(policy, row, pair.preferred, dl_dh, result.grad);
    add_logprob_grad(policy, row, pair.dispreferred, -dl_dh, result.grad);
  }
  result.mean_h = h_sum * inv_b;
  return result;
}

LossResult ipo_plus_sft_loss(const TabularPolicy& policy,
                             const TabularPolicy& ref,
                             std::span<const PairExample> pairs,
                             std::span<const SftExample> sft_batch, double tau,
                             double alpha) {
  if (alpha < 0.0) throw ValidationError("alpha must be non-negative");
  LossResult ipo = ipo_loss(policy, ref, pairs, tau);
  if (alpha == 0.0) return ipo;  // bitwise identical to plain ipo
  LossResult sft = sft_loss(policy, sft_batch);
  LossResult result;
  result.loss = ipo.loss + alpha * sft.loss;
  result.grad = std::move(ipo.grad);
  for (std::size_t i = 0; i < result.grad.size(); ++i) {
    result.grad[i] += alpha * sft.grad[i];
  }
  result.mean_h = ipo.mean_h;
  return result;
}

LossResult dpo_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                    std::span<const PairExample> pairs, double beta) {
  check_same_shape(policy, ref);
  check_pairs(policy, pairs);
  if (beta <= 0.0) throw ValidationError("dpo beta must be positive");
  LossResult result;
  result.grad.assign(policy.param_count(), 0.0);
  double inv_b = 1.0 / static_cast<double>(pairs.size());
  double h_sum = 0.0;
  for (const auto& pair : pairs) {
    int row = policy.row_of(pair.prompt);
    double h = policy.logprob(row, pair.preferred) -
               policy.logprob(row, pair.dispreferred) -
               (ref.logprob(row, pair.preferred) -
                ref.logprob(row, pair.dispreferred));
    h_sum += h;
    result.loss += inv_b * softplus(-beta * h);
    double dl_dh = -beta * sigmoid(-beta * h) * inv_b;
    add_logprob_grad(policy, row, pair.preferred, dl_dh, result.grad);
    add_logprob_grad(policy, row, pair.dispreferred, -dl_dh, result.grad);
  }
  result.mean_h = h_sum * inv_b;
  return result;
}

LossResult kto_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                    std::span<const KtoExample> batch, double beta,
                    double lambda_d, double lambda_u) {
  check_same_shape(policy, ref);
  if (batch.empty()) throw ValidationError("empty kto batch");
  if (beta <= 0.0) throw ValidationError("kto beta must be positive");
  LossResult result;
  result.grad.assign(policy.param_count(), 0.0);
  double inv_b = 1.0 / static_cast<double>(batch.size());
  double r_sum = 0.0;
  for (const auto& ex : batch) {
    check_response(policy, ex.response, "kto");
    int row = policy.row_of(ex.prompt);
    double r = policy.logprob(row, ex.response) - ref.logprob(row, ex.response);
    r_sum += r;

    // z0: exact KL(pi_theta(row, t) || pi_ref(row, t)) summed over every
    // position of the row, plus its gradient
    // d KL_t / d theta[row, t, j] = p_j * ((log p_j - log q_j) - KL_t).
    double z0 = 0.0;
    std::vector<double> kl_t(static_cast<std::size_t>(policy.max_len()), 0.0);
    for (int t = 0; t < policy.max_len(); ++t) {
      auto lp = policy.log_probs(row, t);
      auto lq = ref.log_probs(row, t);
      double kl = 0.0;
      for (std::size_t v = 0; v < lp.size(); ++v) {
        kl += std::exp(lp[v]) * (lp[v] - lq[v]);
      }
      kl_t[static_cast<std::size_t>(t)] = kl;
      z0 += kl;
    }

    double u = ex.desirable ? beta * (r - z0) : beta * (z0 - r);
    double lambda_y = ex.desirable ? lambda_d : lambda_u;
    double v_val = lambda_y * sigmoid(u);
    result.loss += inv_b * (lambda_y - v_val);

    // d loss_i / du = -lambda_y * sigmoid'(u); chain through u.
    double dsig = sigmoid(u) * (1.0 - sigmoid(u));
    double du_dr = ex.desirable ? beta : -beta;
    double coeff_r = inv_b * (-lambda_y) * dsig * du_dr;    // onto d r / d theta
    double coeff_z0 = -coeff_r;                             // onto d z0 / d theta
    add_logprob_grad(policy, row, ex.response, coeff_r, result.grad);
    for (int t = 0; t < policy.max_len(); ++t) {
      auto lp = policy.log_probs(row, t);
      auto lq = ref.log_probs(row, t);
      double kl = kl_t[static_cast<std::size_t>(t)];
      std::size_t base = policy.index_of(row, t, 0);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        double p = std::exp(lp[v]);
        result.grad[base + v] += coeff_z0 * p * ((lp[v] - lq[v]) - kl);
      }
    }
  }
  result.mean_h = r_sum * inv_b;
  return result;
}

LossResult simpo_loss(const TabularPolicy& policy,
                      std::span<const PairExample> pairs, double beta,
                      double gamma) {
  check_pairs(policy, pairs);
  if (beta <= 0.0) throw ValidationError("simpo beta must be positive");
  LossResult result;
  result.grad.assign(policy.param_count(), 0.0);
  double inv_b = 1.0 / static_cast<double>(pairs.size());
  double margin_sum = 0.0;
  for (const auto& pair : pairs) {
    int row = policy.row_of(pair.prompt);
    double lw = policy.logprob(row, pair.preferred);
    double ll = policy.logprob(row, pair.dispreferred);
    double cw = beta / static_cast<double>(pair.preferred.size());
    double cl = beta / static_cast<double>(pair.dispreferred.size());
    double u = cw * lw - cl * ll - gamma;
    margin_sum += lw / static_cast<double>(pair.preferred.size()) -
                  ll / static_cast<double>(pair.dispreferred.size());
    result.loss += inv_b * softplus(-u);
    double dl_du = -sigmoid(-u) * inv_b;
    add_logprob_grad(policy, row, pair.preferred, dl_du * cw, result.grad);
    add_logprob_grad(policy, row, pair.dispreferred, -dl_du * cl, result.grad);
  }
  result.mean_h = margin_sum * inv_b;
  return result;
}

GradCheckReport grad_check(const LossFn& fn, TabularPolicy policy, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw ValidationError("grad_check eps must be in (0, 1e-2]");
  }
  LossResult center = fn(policy);
  if (center.grad.size() != policy.param_count()) {
    throw ValidationError("loss gradient size does not match parameter count");
  }
  GradCheckReport report;
  auto& theta = policy.params();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double saved = theta[i];
    theta[i] = saved + eps;
    double up = fn(policy).loss;
    theta[i] = saved - eps;
    double down = fn(policy).loss;
    theta[i] = saved;
    double numeric = (up - down) / (2.0 * eps);
    double analytic = center.grad[i];
    double denom = std::max({1e-3, std::fabs(analytic), std::fabs(numeric)});
    double rel = std::fabs(analytic - numeric) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
      report.analytic_at_worst = analytic;
      report.numeric_at_worst = numeric;
    }
  }
  return report;
}

}  // namespace seren
