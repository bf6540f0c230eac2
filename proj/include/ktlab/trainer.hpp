#pragma once

// Next-step training for the DKT model: cross-entropy loss, backpropagation
// through time, Adam updates and ACC/AUC evaluation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ktlab/data.hpp"
#include "ktlab/error.hpp"
#include "ktlab/model.hpp"
#include "ktlab/numkit.hpp"
#include "ktlab/parallel.hpp"

namespace ktlab {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
  double gradient_clip = 5.0;   // max global L2 norm, 0 disables
  double output_dropout = 0.0;  // inverted dropout on h_t -> output layer
  std::size_t jobs = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InputError("train: learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw InputError("train: beta1 and beta2 must be in (0,1)");
    if (!(adam_epsilon > 0.0)) throw InputError("train: adam_epsilon must be positive");
    if (batch_size == 0) throw InputError("train: batch_size must be >= 1");
    if (!(gradient_clip >= 0.0)) throw InputError("train: gradient_clip must be >= 0");
    if (!(output_dropout >= 0.0 && output_dropout < 1.0)) throw InputError("train: output_dropout must be in [0,1)");
  }
};

// ---------------------------------------------------------------------------
// Metrics

struct EvalMetrics {
  double acc = 0.0;
  std::optional<double> auc;  // empty when all labels share one class
  std::size_t n_predictions = 0;
  std::optional<double> loss;
};

/// Probability strictly above 0.5 is a positive prediction.
inline bool predicted_positive(double probability) { return probability > 0.5; }

inline double accuracy(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (scores.empty()) throw std::invalid_argument("accuracy: empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hits += (predicted_positive(scores[i]) == (labels[i] != 0));
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

/// Area under the ROC curve via the Mann-Whitney rank statistic; tied scores
/// share their average rank, so each tied positive/negative pair counts 1/2.
/// Throws std::domain_error when only one class is present.
inline double auc_score(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += (l != 0);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::domain_error("auc: undefined when all labels are one class");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && scores[order[hi + 1]] == scores[order[lo]]) ++hi;
    const double avg_rank = 0.5 * static_cast<double>(lo + hi) + 1.0;
    for (std::size_t k = lo; k <= hi; ++k)
      if (labels[order[k]] != 0) pos_rank_sum += avg_rank;
    lo = hi + 1;
  }
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

inline EvalMetrics compute_metrics(std::span<const double> scores, std::span<const int> labels) {
  EvalMetrics m;
  m.n_predictions = scores.size();
  m.acc = accuracy(scores, labels);
  try {
    m.auc = auc_score(scores, labels);
  } catch (const std::domain_error&) {
    m.auc.reset();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Loss and gradients

namespace detail {

/// -log p(label | logit), computed without forming the probability.
inline double bce_from_logit(double logit, bool label) {
  const double z = label ? logit : -logit;
  return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

}  // namespace detail

/// Mean next-step cross-entropy: the prediction at step t for the skill
/// attempted at t+1, for t = 1..T-1.
inline double loss(const ForwardTrace& tr, const LearnerSequence& seq) {
  const std::size_t T = seq.size();
  if (T < 2) throw std::invalid_argument("loss: sequence needs at least two steps");
  if (tr.size() != T) throw std::invalid_argument("loss: trace/sequence length mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const auto& next = seq.steps[t + 1];
    total += detail::bce_from_logit(tr.steps[t].y_logit[next.skill], next.correct);
  }
  return total / static_cast<double>(T - 1);
}

/// Exact gradient of loss() with respect to every parameter block (BPTT).
inline DktParams backward(const DktParams& p, const ForwardTrace& tr, const LearnerSequence& seq,
                          const OutputMask* mask = nullptr) {
  const std::size_t T = seq.size();
  const std::size_t H = p.hidden;
  if (T < 2) throw std::invalid_argument("backward: sequence needs at least two steps");
  if (tr.size() != T || tr.hidden != H || tr.skills != p.skills)
    throw std::invalid_argument("backward: trace does not match params/sequence");

  DktParams grad = p.zeros_like();
  const double scale = 1.0 / static_cast<double>(T - 1);

  DenseVector dh_next(H), dc_next(H), dpre(4 * H);
  const DenseVector zeros(H);
  for (std::size_t t = T; t-- > 0;) {
    const StepTrace& st = tr.steps[t];
    const DenseVector& c_prev = t > 0 ? tr.steps[t - 1].c : zeros;
    const DenseVector& h_prev = t > 0 ? tr.steps[t - 1].h : zeros;

    DenseVector dh = dh_next;
    if (t + 1 < T) {
      const auto& next = seq.steps[t + 1];
      const std::size_t k = next.skill;
      const double dz = (st.y_prob[k] - (next.correct ? 1.0 : 0.0)) * scale;
      for (std::size_t j = 0; j < H; ++j) {
        const double mj = mask ? (*mask)[t][j] : 1.0;
        grad.Wy(k, j) += dz * st.h[j] * mj;
        dh[j] += p.Wy(k, j) * dz * mj;
      }
      grad.by[k] += dz;
    }

    for (std::size_t j = 0; j < H; ++j) {
      const double tc = std::tanh(st.c[j]);
      const double d_o = dh[j] * tc;
      const double dc = dc_next[j] + dh[j] * st.o[j] * (1.0 - tc * tc);
      const double d_i = dc * st.g[j];
      const double d_g = dc * st.i[j];
      const double d_f = dc * c_prev[j];
      dc_next[j] = dc * st.f[j];
      dpre[j] = d_i * st.i[j] * (1.0 - st.i[j]);
      dpre[H + j] = d_f * st.f[j] * (1.0 - st.f[j]);
      dpre[2 * H + j] = d_g * (1.0 - st.g[j] * st.g[j]);
      dpre[3 * H + j] = d_o * st.o[j] * (1.0 - st.o[j]);
    }

    for (std::size_t c = 0; c < st.x.size(); ++c) {
      const double xc = st.x[c];
      if (xc == 0.0) continue;
      for (std::size_t r = 0; r < 4 * H; ++r) grad.Wx(r, c) += dpre[r] * xc;
    }
    add_outer(grad.Uh, dpre.span(), h_prev.span());
    for (std::size_t r = 0; r < 4 * H; ++r) grad.b[r] += dpre[r];

    dh_next.fill(0.0);
    add_transposed_matvec(p.Uh, dpre.span(), dh_next.span());
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  DktParams m;
  DktParams v;
  std::size_t step = 0;

  AdamState() = default;
  explicit AdamState(const DktParams& like) : m(like.zeros_like()), v(like.zeros_like()) {}
};

inline double global_norm(const DktParams& g) {
  double sq = 0.0;
  for (auto blk : g.blocks())
    for (double x : blk) sq += x * x;
  return std::sqrt(sq);
}

/// One bias-corrected Adam update. Gradients are clipped to a global L2 norm
/// of cfg.gradient_clip first when that is nonzero.
inline void adam_step(DktParams& params, DktParams grads, AdamState& state, const TrainConfig& cfg) {
  if (grads.hidden != params.hidden || grads.skills != params.skills || state.m.hidden != params.hidden ||
      state.m.skills != params.skills)
    throw std::invalid_argument("adam_step: shape mismatch");
  if (cfg.gradient_clip > 0.0) {
    const double norm = global_norm(grads);
    if (norm > cfg.gradient_clip) {
      const double s = cfg.gradient_clip / norm;
      for (auto blk : grads.blocks())
        for (double& x : blk) x *= s;
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto pb = params.blocks();
  auto gb = grads.blocks();
  auto mb = state.m.blocks();
  auto vb = state.v.blocks();
  for (std::size_t k = 0; k < pb.size(); ++k) {
    for (std::size_t i = 0; i < pb[k].size(); ++i) {
      const double g = gb[k][i];
      mb[k][i] = cfg.beta1 * mb[k][i] + (1.0 - cfg.beta1) * g;
      vb[k][i] = cfg.beta2 * vb[k][i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = mb[k][i] / bc1;
      const double v_hat = vb[k][i] / bc2;
      pb[k][i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Evaluation sets

/// One first-14 / 15th-question protocol item.
struct EvalItem {
  std::string learner_id;
  std::size_t window_index = 0;
  std::vector<Step> input;
  std::size_t target_skill = 0;
  bool actual_correct = false;
};

inline std::vector<EvalItem> make_eval_items(const std::vector<LearnerSequence>& learners) {
  std::vector<EvalItem> items;
  for (const auto& l : learners) {
    const auto windows = window_eval(l);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const auto& steps = windows[w].steps;
      EvalItem item{l.learner_id, w, {steps.begin(), steps.end() - 1}, steps.back().skill, steps.back().correct};
      items.push_back(std::move(item));
    }
  }
  return items;
}

/// ACC/AUC of predict_next on the protocol items.
inline EvalMetrics evaluate(const DktParams& params, const std::vector<EvalItem>& items, std::size_t jobs = 1) {
  if (items.empty()) throw std::invalid_argument("evaluate: empty evaluation set");
  std::vector<double> scores(items.size());
  std::vector<int> labels(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    scores[i] = predict_steps(params, items[i].input, items[i].target_skill).probability;
    labels[i] = items[i].actual_correct ? 1 : 0;
  });
  return compute_metrics(scores, labels);
}

/// ACC/AUC/loss of all next-step predictions inside training-style windows.
inline EvalMetrics evaluate_next_step(const DktParams& params, const std::vector<LearnerSequence>& windows,
                                      std::size_t jobs = 1) {
  std::vector<std::vector<double>> s(windows.size());
  std::vector<std::vector<int>> l(windows.size());
  std::vector<double> losses(windows.size(), 0.0);
  parallel_for(windows.size(), jobs, [&](std::size_t w) {
    const auto& seq = windows[w];
    if (seq.size() < 2) return;
    const auto tr = forward(params, encode(seq, params.skills));
    losses[w] = loss(tr, seq);
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      s[w].push_back(tr.steps[t].y_prob[seq.steps[t + 1].skill]);
      l[w].push_back(seq.steps[t + 1].correct ? 1 : 0);
    }
  });
  std::vector<double> scores;
  std::vector<int> labels;
  double loss_sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    scores.insert(scores.end(), s[w].begin(), s[w].end());
    labels.insert(labels.end(), l[w].begin(), l[w].end());
    if (windows[w].size() >= 2) {
      loss_sum += losses[w];
      ++counted;
    }
  }
  if (scores.empty()) throw std::invalid_argument("evaluate_next_step: no next-step targets");
  auto m = compute_metrics(scores, labels);
  m.loss = loss_sum / static_cast<double>(counted);
  return m;
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;
  EvalMetrics metrics;
};

struct HeldOutData {
  std::vector<LearnerSequence> windows;  // training-style windows, next-step metrics
  std::vector<EvalItem> protocol;        // first-14 / 15th items
};

struct TrainResult {
  DktParams params;
  DktParams best_params;
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> history;
};

/// Called after every epoch with the epoch number and the current params.
using EpochCallback = std::function<void(std::size_t, const DktParams&, const std::vector<EpochMetrics>&)>;

/// Minibatch Adam over shuffled windows. Per-sequence gradients are computed
/// (possibly in parallel) and summed in batch order, so `cfg.jobs` never
/// changes the result. "best" is tracked by held-out next-step AUC.
inline TrainResult train(const std::vector<LearnerSequence>& corpus, DktParams init, const TrainConfig& cfg,
                         SeededRng& rng, const HeldOutData* heldout = nullptr, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (corpus[i].size() >= 2) usable.push_back(i);
  if (usable.empty()) throw InputError("train: corpus has no sequence with at least two steps");

  TrainResult result{std::move(init), {}, 0, {}};
  result.best_params = result.params;
  AdamState adam(result.params);
  const std::size_t H = result.params.hidden;
  const std::size_t M = result.params.skills;
  const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
  double best_auc = -1.0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = usable;
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::vector<double> train_scores;
    std::vector<int> train_labels;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t n = end - start;

      std::vector<OutputMask> masks(n);
      if (cfg.output_dropout > 0.0) {
        const double keep = 1.0 - cfg.output_dropout;
        for (std::size_t b = 0; b < n; ++b) {
          const auto& seq = corpus[order[start + b]];
          masks[b].assign(seq.size(), DenseVector(H));
          for (auto& m : masks[b])
            for (double& v : m) v = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        }
      }

      DktParams batch_grad = result.params.zeros_like();
      std::vector<double> batch_losses(n);
      std::vector<std::vector<double>> batch_scores(n);
      std::vector<std::vector<int>> batch_labels(n);
      // Rounds of `jobs` sequences keep memory bounded while preserving the
      // summation order of a serial run.
      for (std::size_t round = 0; round < n; round += jobs) {
        const std::size_t width = std::min(jobs, n - round);
        std::vector<DktParams> grads(width);
        parallel_for(width, jobs, [&](std::size_t w) {
          const std::size_t b = round + w;
          const auto& seq = corpus[order[start + b]];
          const OutputMask* mask = cfg.output_dropout > 0.0 ? &masks[b] : nullptr;
          const auto tr = forward(result.params, encode(seq, M), mask);
          batch_losses[b] = loss(tr, seq);
          for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
            batch_scores[b].push_back(tr.steps[t].y_prob[seq.steps[t + 1].skill]);
            batch_labels[b].push_back(seq.steps[t + 1].correct ? 1 : 0);
          }
          grads[w] = backward(result.params, tr, seq, mask);
        });
        for (std::size_t w = 0; w < width; ++w) {
          auto dst = batch_grad.blocks();
          auto src = grads[w].blocks();
          for (std::size_t k = 0; k < dst.size(); ++k)
            for (std::size_t i = 0; i < dst[k].size(); ++i) dst[k][i] += src[k][i];
        }
      }
      const double inv = 1.0 / static_cast<double>(n);
      for (auto blk : batch_grad.blocks())
        for (double& x : blk) x *= inv;
      adam_step(result.params, std::move(batch_grad), adam, cfg);
      if (!result.params.finite()) throw std::runtime_error("train: parameters became non-finite");

      for (std::size_t b = 0; b < n; ++b) {
        epoch_loss += batch_losses[b];
        train_scores.insert(train_scores.end(), batch_scores[b].begin(), batch_scores[b].end());
        train_labels.insert(train_labels.end(), batch_labels[b].begin(), batch_labels[b].end());
      }
    }

    EvalMetrics train_m = compute_metrics(train_scores, train_labels);
    train_m.loss = epoch_loss / static_cast<double>(order.size());
    result.history.push_back({epoch, "train", train_m});

    // Without held-out windows the latest epoch is the best one.
    double selection_auc = std::numeric_limits<double>::infinity();
    if (heldout && !heldout->windows.empty()) {
      const auto m = evaluate_next_step(result.params, heldout->windows, jobs);
      result.history.push_back({epoch, "heldout_window", m});
      selection_auc = m.auc.value_or(0.0);
    }
    if (heldout && !heldout->protocol.empty()) {
      result.history.push_back({epoch, "heldout_eval15", evaluate(result.params, heldout->protocol, jobs)});
    }
    if (selection_auc > best_auc || std::isinf(selection_auc)) {
      best_auc = selection_auc;
      result.best_params = result.params;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(epoch, result.params, result.history);
  }
  return result;
}

}  // namespace ktlab
