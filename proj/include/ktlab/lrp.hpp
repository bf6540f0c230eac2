#pragma once

// Layer-wise relevance propagation through the DKT output layer and the LSTM
// recurrence.
//
// Rules:
//   * linear maps (output layer, candidate pre-activation, the cell update
//     c_t = f*c_{t-1} + i*g read as a two-term sum) use the epsilon rule
//       R_j = sum_k a_j w_kj / (z_k + eps*sign(z_k)) * R_k
//   * gate x signal products use signal-take-all: the gate gets nothing
//   * pointwise tanh passes relevance through unchanged
//
// Whatever a linear layer does not hand to its inputs is booked either as a
// bias share or as a stabilizer share, so every call conserves relevance
// exactly up to rounding. That is checked on every call.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktlab/model.hpp"
#include "ktlab/numkit.hpp"

namespace ktlab {

enum class SeedMode { Logit, Probability };

inline constexpr double kDegenerateDenominator = 1e-12;
inline constexpr double kLayerConservationTol = 1e-10;

struct LrpConfig {
  double epsilon = 0.001;
  SeedMode seed_mode = SeedMode::Logit;
  bool bias_absorbs = true;

  void validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("lrp: epsilon must be >= 0");
  }
};

struct LinearRelevance {
  std::vector<double> input;
  double absorbed_bias = 0.0;
  double absorbed_stabilizer = 0.0;
};

/// Bookkeeping collected across one relevance pass; used by tests and audits.
struct LrpAudit {
  std::size_t linear_calls = 0;
  double max_linear_residual = 0.0;
  std::size_t gate_calls = 0;
  std::size_t gate_violations = 0;  // gate share != 0 or signal share != incoming
};

namespace detail {

inline double stabilized(double z, double eps) { return z + (z >= 0.0 ? eps : -eps); }

/// Epsilon rule over an implicit weight matrix: weight(k, j) for output unit k
/// and input j. `bias` may be empty (no bias term).
template <class WeightFn>
LinearRelevance lrp_linear_impl(std::size_t n_out, std::size_t n_in, WeightFn&& weight, std::span<const double> bias,
                                std::span<const double> inputs, std::span<const double> out_relevance, double eps,
                                bool bias_absorbs, LrpAudit* audit) {
  if (inputs.size() != n_in || out_relevance.size() != n_out || (!bias.empty() && bias.size() != n_out))
    throw std::invalid_argument("lrp_linear: shape mismatch");
  if (!(eps >= 0.0)) throw std::invalid_argument("lrp_linear: epsilon must be >= 0");

  LinearRelevance res;
  res.input.assign(n_in, 0.0);
  double out_total = 0.0;
  double magnitude = 0.0;
  std::vector<double> contrib(n_in);

  for (std::size_t k = 0; k < n_out; ++k) {
    const double rk = out_relevance[k];
    out_total += rk;
    magnitude += std::abs(rk);
    if (rk == 0.0) continue;

    const double bk = bias.empty() ? 0.0 : bias[k];
    double z = bk;
    double abs_total = 0.0;
    for (std::size_t j = 0; j < n_in; ++j) {
      const double a = inputs[j];
      contrib[j] = a == 0.0 ? 0.0 : a * weight(k, j);
      z += contrib[j];
      abs_total += std::abs(contrib[j]);
    }
    const double denom = stabilized(z, eps);
    if (std::abs(denom) < kDegenerateDenominator) {
      res.absorbed_stabilizer += rk;
      magnitude += std::abs(rk);
      continue;
    }
    const double ratio = rk / denom;
    for (std::size_t j = 0; j < n_in; ++j) {
      if (contrib[j] == 0.0) continue;
      const double share = contrib[j] * ratio;
      res.input[j] += share;
      magnitude += std::abs(share);
    }
    const double bias_share = bk * ratio;
    if (bias_absorbs || abs_total == 0.0) {
      res.absorbed_bias += bias_share;
    } else {
      for (std::size_t j = 0; j < n_in; ++j)
        if (contrib[j] != 0.0) res.input[j] += bias_share * std::abs(contrib[j]) / abs_total;
    }
    const double stab_share = (denom - z) * ratio;
    res.absorbed_stabilizer += stab_share;
    magnitude += std::abs(bias_share) + std::abs(stab_share);
  }

  double in_total = res.absorbed_bias + res.absorbed_stabilizer;
  for (double r : res.input) in_total += r;
  const double residual = std::abs(in_total - out_total);
  if (audit) {
    audit->linear_calls += 1;
    audit->max_linear_residual = std::max(audit->max_linear_residual, residual);
  }
  if (residual > kLayerConservationTol * std::max(1.0, magnitude))
    throw std::logic_error("lrp_linear: relevance not conserved (residual " + std::to_string(residual) + ")");
  return res;
}

}  // namespace detail

/// Epsilon-rule relevance redistribution through z = W a + b.
/// `weights` is out x in; pass an empty bias for a bias-free layer.
inline LinearRelevance lrp_linear(const DenseMatrix& weights, std::span<const double> bias,
                                  std::span<const double> inputs, std::span<const double> out_relevance, double epsilon,
                                  bool bias_absorbs = true, LrpAudit* audit = nullptr) {
  if (weights.cols() != inputs.size() || weights.rows() != out_relevance.size())
    throw std::invalid_argument("lrp_linear: weight shape does not match inputs/relevance");
  return detail::lrp_linear_impl(
      weights.rows(), weights.cols(), [&](std::size_t k, std::size_t j) { return weights(k, j); }, bias, inputs,
      out_relevance, epsilon, bias_absorbs, audit);
}

struct GateRelevance {
  double signal = 0.0;
  double gate = 0.0;
};

/// Signal-take-all for a gate*signal product: all relevance goes to the signal.
inline GateRelevance lrp_gate(double gate_value, double signal_value, double product_relevance,
                              LrpAudit* audit = nullptr) {
  (void)gate_value;
  (void)signal_value;
  GateRelevance r{product_relevance, 0.0};
  if (audit) {
    audit->gate_calls += 1;
    if (r.gate != 0.0 || r.signal != product_relevance) audit->gate_violations += 1;
  }
  return r;
}

struct SeedRelevance {
  DenseVector hidden;  // relevance on h_T
  double seed_value = 0.0;
  double absorbed_bias = 0.0;
  double absorbed_stabilizer = 0.0;
};

/// Seeds the target output neuron at the last step and pushes it through Wy.
inline SeedRelevance lrp_seed(const DktParams& p, const ForwardTrace& tr, std::size_t target_skill,
                              const LrpConfig& cfg, LrpAudit* audit = nullptr) {
  if (target_skill >= p.skills) throw std::out_of_range("lrp_seed: target skill out of range");
  if (tr.steps.empty()) throw std::invalid_argument("lrp_seed: empty trace");
  const StepTrace& last = tr.last();
  SeedRelevance s;
  s.seed_value =
      cfg.seed_mode == SeedMode::Logit ? last.y_logit[target_skill] : last.y_prob[target_skill];
  std::vector<double> out(p.skills, 0.0);
  out[target_skill] = s.seed_value;
  auto lin = lrp_linear(p.Wy, p.by.span(), last.h.span(), out, cfg.epsilon, cfg.bias_absorbs, audit);
  s.hidden = DenseVector(std::move(lin.input));
  s.absorbed_bias = lin.absorbed_bias;
  s.absorbed_stabilizer = lin.absorbed_stabilizer;
  return s;
}

struct RelevanceProfile {
  std::size_t target_skill = 0;
  double seed_value = 0.0;
  std::vector<double> relevance;            // one value per input step
  std::vector<DenseVector> input_relevance; // per step, over the 2M input components
  double absorbed_bias = 0.0;
  double absorbed_stabilizer = 0.0;

  double total() const {
    double s = 0.0;
    for (double r : relevance) s += r;
    return s;
  }
};

/// Relevance of every input step for the prediction of `target_skill` made
/// after the last step of the traced sequence.
inline RelevanceProfile lrp_sequence(const DktParams& p, const ForwardTrace& tr, std::size_t target_skill,
                                     const LrpConfig& cfg, LrpAudit* audit = nullptr) {
  cfg.validate();
  if (tr.hidden != p.hidden || tr.skills != p.skills) throw std::invalid_argument("lrp_sequence: trace/params mismatch");
  const std::size_t T = tr.size();
  const std::size_t H = p.hidden;
  const std::size_t X = p.input_size();

  RelevanceProfile prof;
  prof.target_skill = target_skill;
  prof.relevance.assign(T, 0.0);
  prof.input_relevance.resize(T);

  auto seed = lrp_seed(p, tr, target_skill, cfg, audit);
  prof.seed_value = seed.seed_value;
  prof.absorbed_bias += seed.absorbed_bias;
  prof.absorbed_stabilizer += seed.absorbed_stabilizer;

  DenseVector r_h = std::move(seed.hidden);
  DenseVector r_c_carry(H);
  const DenseVector zeros(H);
  const std::span<const double> cand_bias(p.b.values().data() + 2 * H, H);
  std::vector<double> cand_inputs(X + H);
  std::vector<double> r_g(H);

  for (std::size_t t = T; t-- > 0;) {
    const StepTrace& st = tr.steps[t];
    const DenseVector& c_prev = t > 0 ? tr.steps[t - 1].c : zeros;
    const DenseVector& h_prev = t > 0 ? tr.steps[t - 1].h : zeros;

    DenseVector r_c_prev(H);
    for (std::size_t j = 0; j < H; ++j) {
      // h = o * tanh(c)
      const double r_c = r_c_carry[j] + lrp_gate(st.o[j], std::tanh(st.c[j]), r_h[j], audit).signal;
      // c = f * c_prev + i * g
      const double w[2] = {st.f[j], st.i[j]};
      const double a[2] = {c_prev[j], st.g[j]};
      const double r_out[1] = {r_c};
      auto lin = detail::lrp_linear_impl(
          1, 2, [&](std::size_t, std::size_t q) { return w[q]; }, {}, a, r_out, cfg.epsilon, cfg.bias_absorbs, audit);
      prof.absorbed_stabilizer += lin.absorbed_stabilizer;
      prof.absorbed_bias += lin.absorbed_bias;
      r_c_prev[j] = lrp_gate(st.f[j], c_prev[j], lin.input[0], audit).signal;
      r_g[j] = lrp_gate(st.i[j], st.g[j], lin.input[1], audit).signal;
    }

    // g = tanh([Wg | Ug] [x; h_prev] + bg)
    std::copy(st.x.begin(), st.x.end(), cand_inputs.begin());
    std::copy(h_prev.begin(), h_prev.end(), cand_inputs.begin() + static_cast<std::ptrdiff_t>(X));
    auto lin = detail::lrp_linear_impl(
        H, X + H,
        [&](std::size_t k, std::size_t q) { return q < X ? p.Wx(2 * H + k, q) : p.Uh(2 * H + k, q - X); }, cand_bias,
        cand_inputs, r_g, cfg.epsilon, cfg.bias_absorbs, audit);
    prof.absorbed_bias += lin.absorbed_bias;
    prof.absorbed_stabilizer += lin.absorbed_stabilizer;

    DenseVector r_x(X);
    double r_t = 0.0;
    for (std::size_t q = 0; q < X; ++q) {
      r_x[q] = lin.input[q];
      r_t += lin.input[q];
    }
    prof.relevance[t] = r_t;
    prof.input_relevance[t] = std::move(r_x);
    for (std::size_t j = 0; j < H; ++j) r_h[j] = lin.input[X + j];
    r_c_carry = std::move(r_c_prev);
  }
  // h_0 = c_0 = 0, so whatever is left on them is exactly zero.
  return prof;
}

/// Convenience: forward the steps and explain the prediction for `target_skill`.
inline RelevanceProfile explain(const DktParams& p, std::span<const Step> steps, std::size_t target_skill,
                                const LrpConfig& cfg, LrpAudit* audit = nullptr) {
  if (steps.empty()) throw std::invalid_argument("explain: empty input");
  const auto tr = forward(p, encode(steps, p.skills));
  return lrp_sequence(p, tr, target_skill, cfg, audit);
}

}  // namespace ktlab
