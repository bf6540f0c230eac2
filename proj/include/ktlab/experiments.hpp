#pragma once

// Prediction-outcome groups, the consistency-rate experiment and the
// relevance-ordered vs. random deletion experiment.

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ktlab/data.hpp"
#include "ktlab/error.hpp"
#include "ktlab/lrp.hpp"
#include "ktlab/model.hpp"
#include "ktlab/parallel.hpp"
#include "ktlab/trainer.hpp"

namespace ktlab {

enum class OutcomeGroup : std::size_t { CorrectPositive = 0, CorrectNegative = 1, FalsePositive = 2, FalseNegative = 3 };

inline constexpr std::array<OutcomeGroup, 4> kAllGroups = {OutcomeGroup::CorrectPositive, OutcomeGroup::CorrectNegative,
                                                           OutcomeGroup::FalsePositive, OutcomeGroup::FalseNegative};

inline std::string_view group_name(OutcomeGroup g) {
  switch (g) {
    case OutcomeGroup::CorrectPositive: return "correct_positive";
    case OutcomeGroup::CorrectNegative: return "correct_negative";
    case OutcomeGroup::FalsePositive: return "false_positive";
    case OutcomeGroup::FalseNegative: return "false_negative";
  }
  return "?";
}

inline bool is_positive(OutcomeGroup g) { return g == OutcomeGroup::CorrectPositive || g == OutcomeGroup::FalsePositive; }
inline bool is_correct(OutcomeGroup g) { return g == OutcomeGroup::CorrectPositive || g == OutcomeGroup::CorrectNegative; }

struct PredictionOutcome {
  double probability = 0.5;
  bool predicted_positive = false;
  bool actual_correct = false;
  OutcomeGroup group = OutcomeGroup::CorrectNegative;
};

inline OutcomeGroup group_of(bool positive, bool actual) {
  if (positive) return positive == actual ? OutcomeGroup::CorrectPositive : OutcomeGroup::FalsePositive;
  return positive == actual ? OutcomeGroup::CorrectNegative : OutcomeGroup::FalseNegative;
}

inline PredictionOutcome classify_outcome(const MasteryPrediction& pred, bool actual_correct) {
  const bool pos = predicted_positive(pred.probability);
  return {pred.probability, pos, actual_correct, group_of(pos, actual_correct)};
}

// ---------------------------------------------------------------------------
// Consistency

/// Fraction of input questions whose relevance sign agrees with the answer:
/// correct with r > 0, or incorrect with r < 0. r == 0 is never consistent.
inline double consistency_rate(std::span<const double> relevance, std::span<const Step> steps) {
  if (relevance.size() != steps.size()) throw std::invalid_argument("consistency_rate: length mismatch");
  if (steps.empty()) return 0.0;
  std::size_t consistent = 0;
  for (std::size_t t = 0; t < steps.size(); ++t)
    consistent += (steps[t].correct && relevance[t] > 0.0) || (!steps[t].correct && relevance[t] < 0.0);
  return static_cast<double>(consistent) / static_cast<double>(steps.size());
}

inline constexpr std::size_t kHistogramBins = 10;

struct ConsistencyResult {
  OutcomeGroup group = OutcomeGroup::CorrectPositive;
  std::vector<double> rates;
  std::array<std::size_t, kHistogramBins> counts{};
  double fraction_at_least_90 = 0.0;
  double fraction_at_most_50 = 0.0;
  double mean_rate = 0.0;

  std::size_t size() const { return rates.size(); }
};

/// Bin b covers (b/10, (b+1)/10], except bin 0 which is closed: [0, 0.1].
inline std::size_t histogram_bin(double rate) {
  for (std::size_t b = 1; b < kHistogramBins; ++b)
    if (rate <= static_cast<double>(b) / 10.0) return b - 1;
  return kHistogramBins - 1;
}

inline ConsistencyResult consistency_histogram(std::vector<double> rates, OutcomeGroup group) {
  ConsistencyResult res;
  res.group = group;
  std::size_t hi = 0, lo = 0;
  double sum = 0.0;
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("consistency_histogram: rate outside [0,1]");
    res.counts[histogram_bin(r)] += 1;
    hi += r >= 0.9;
    lo += r <= 0.5;
    sum += r;
  }
  if (!rates.empty()) {
    const double n = static_cast<double>(rates.size());
    res.fraction_at_least_90 = static_cast<double>(hi) / n;
    res.fraction_at_most_50 = static_cast<double>(lo) / n;
    res.mean_rate = sum / n;
  }
  res.rates = std::move(rates);
  return res;
}

// ---------------------------------------------------------------------------
// Deletion

enum class DeletionOrdering { Relevance, Random };

inline std::string_view ordering_name(DeletionOrdering o) { return o == DeletionOrdering::Relevance ? "relevance" : "random"; }

/// Positive predictions delete the most relevant question first; negative
/// predictions the most negative first. Ties go to the earlier step.
inline std::vector<std::size_t> deletion_order(std::span<const double> relevance, bool positive_group) {
  std::vector<std::size_t> order(relevance.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return positive_group ? relevance[a] > relevance[b] : relevance[a] < relevance[b];
  });
  return order;
}

/// The input with the first k questions of `order` removed, original order kept.
inline std::vector<Step> delete_steps(std::span<const Step> input, std::span<const std::size_t> order, std::size_t k) {
  std::vector<bool> drop(input.size(), false);
  for (std::size_t i = 0; i < k && i < order.size(); ++i) drop[order[i]] = true;
  std::vector<Step> kept;
  for (std::size_t t = 0; t < input.size(); ++t)
    if (!drop[t]) kept.push_back(input[t]);
  return kept;
}

struct ExplainedItem {
  EvalItem item;
  PredictionOutcome outcome;
  RelevanceProfile profile;
};

struct DeletionCurve {
  OutcomeGroup group = OutcomeGroup::CorrectPositive;
  DeletionOrdering ordering = DeletionOrdering::Relevance;
  std::vector<double> accuracy_at_k;  // k = 0..input length
  std::size_t n_sequences = 0;
};

inline std::uint64_t random_order_seed(std::uint64_t master, const EvalItem& item, std::size_t replicate) {
  return derive_seed(master, item.learner_id + "#" + std::to_string(item.window_index), replicate);
}

/// Per-sequence hit rates at every k: 1 when the re-prediction after deleting
/// k questions matches the actual 15th answer. Random ordering averages over
/// `replicates` seeded permutations.
inline std::vector<double> deletion_hits(const DktParams& params, const ExplainedItem& e, DeletionOrdering ordering,
                                         std::uint64_t seed, std::size_t replicates) {
  const auto& input = e.item.input;
  const std::size_t n = input.size();
  std::vector<double> hits(n + 1, 0.0);
  auto run = [&](const std::vector<std::size_t>& order, double weight) {
    for (std::size_t k = 0; k <= n; ++k) {
      const auto kept = delete_steps(input, order, k);
      const auto pred = predict_steps(params, kept, e.item.target_skill);
      if (predicted_positive(pred.probability) == e.item.actual_correct) hits[k] += weight;
    }
  };
  if (ordering == DeletionOrdering::Relevance) {
    run(deletion_order(e.profile.relevance, e.outcome.predicted_positive), 1.0);
  } else {
    if (replicates == 0) throw std::invalid_argument("deletion: need at least one random replicate");
    for (std::size_t r = 0; r < replicates; ++r) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      SeededRng rng(random_order_seed(seed, e.item, r));
      rng.shuffle(order);
      run(order, 1.0 / static_cast<double>(replicates));
    }
  }
  return hits;
}

/// One curve per outcome group; sequences within a group are averaged.
inline std::vector<DeletionCurve> deletion_experiment(const DktParams& params, const std::vector<ExplainedItem>& items,
                                                      DeletionOrdering ordering, std::uint64_t seed,
                                                      std::size_t replicates = 5, std::size_t jobs = 1) {
  std::vector<std::vector<double>> per_item(items.size());
  parallel_for(items.size(), jobs,
               [&](std::size_t i) { per_item[i] = deletion_hits(params, items[i], ordering, seed, replicates); });

  std::size_t width = 0;
  for (const auto& it : items) width = std::max(width, it.item.input.size() + 1);
  std::vector<DeletionCurve> curves;
  for (auto g : kAllGroups) {
    DeletionCurve c{g, ordering, std::vector<double>(width, 0.0), 0};
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].outcome.group != g) continue;
      if (per_item[i].size() != width) throw std::invalid_argument("deletion: inputs must share one length");
      c.n_sequences += 1;
      for (std::size_t k = 0; k < width; ++k) c.accuracy_at_k[k] += per_item[i][k];
    }
    if (c.n_sequences)
      for (double& a : c.accuracy_at_k) a /= static_cast<double>(c.n_sequences);
    curves.push_back(std::move(c));
  }
  return curves;
}

/// Sequence-weighted mean of several groups' curves.
inline std::vector<double> pooled_curve(const std::vector<DeletionCurve>& curves, bool correct_groups) {
  std::vector<double> acc;
  std::size_t n = 0;
  for (const auto& c : curves) {
    if (is_correct(c.group) != correct_groups || c.n_sequences == 0) continue;
    if (acc.empty()) acc.assign(c.accuracy_at_k.size(), 0.0);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += c.accuracy_at_k[k] * static_cast<double>(c.n_sequences);
    n += c.n_sequences;
  }
  for (double& a : acc) a /= static_cast<double>(n);
  return acc;
}

/// mean over k in [k_lo, k_hi] of (a[k] - b[k]).
inline double mean_gap(const std::vector<double>& a, const std::vector<double>& b, std::size_t k_lo, std::size_t k_hi) {
  if (a.size() != b.size() || k_hi >= a.size() || k_lo > k_hi) throw std::invalid_argument("mean_gap: bad range");
  double s = 0.0;
  for (std::size_t k = k_lo; k <= k_hi; ++k) s += a[k] - b[k];
  return s / static_cast<double>(k_hi - k_lo + 1);
}

// ---------------------------------------------------------------------------
// Whole pipeline

struct ExperimentConfig {
  LrpConfig lrp;
  std::size_t random_replicates = 5;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct ExperimentResults {
  std::vector<ExplainedItem> items;
  std::array<std::size_t, 4> group_sizes{};
  std::vector<ConsistencyResult> consistency;  // one per group, kAllGroups order
  std::vector<DeletionCurve> relevance_curves;
  std::vector<DeletionCurve> random_curves;
  EvalMetrics protocol_metrics;

  const ConsistencyResult& consistency_for(OutcomeGroup g) const { return consistency[static_cast<std::size_t>(g)]; }
};

/// Predict, group and explain every protocol item.
inline std::vector<ExplainedItem> explain_items(const DktParams& params, const std::vector<EvalItem>& items,
                                                const LrpConfig& lrp, std::size_t jobs = 1) {
  std::vector<ExplainedItem> out(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    const auto& it = items[i];
    if (it.input.empty()) throw std::invalid_argument("explain_items: empty input");
    const auto tr = forward(params, encode(it.input, params.skills));
    const auto pred = prediction_at(tr, tr.size() - 1, it.target_skill);
    out[i] = {it, classify_outcome(pred, it.actual_correct), lrp_sequence(params, tr, it.target_skill, lrp)};
  });
  return out;
}

inline ExperimentResults run_experiments(const DktParams& params, const std::vector<EvalItem>& items,
                                         const ExperimentConfig& cfg) {
  if (items.empty()) throw EmptySelection("experiments: no length-15 evaluation windows");
  ExperimentResults res;
  res.items = explain_items(params, items, cfg.lrp, cfg.jobs);

  std::array<std::vector<double>, 4> rates;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& e : res.items) {
    const auto g = static_cast<std::size_t>(e.outcome.group);
    res.group_sizes[g] += 1;
    rates[g].push_back(consistency_rate(e.profile.relevance, e.item.input));
    scores.push_back(e.outcome.probability);
    labels.push_back(e.item.actual_correct ? 1 : 0);
  }
  for (auto g : kAllGroups) res.consistency.push_back(consistency_histogram(rates[static_cast<std::size_t>(g)], g));
  res.relevance_curves = deletion_experiment(params, res.items, DeletionOrdering::Relevance, cfg.seed,
                                             cfg.random_replicates, cfg.jobs);
  res.random_curves =
      deletion_experiment(params, res.items, DeletionOrdering::Random, cfg.seed, cfg.random_replicates, cfg.jobs);
  res.protocol_metrics = compute_metrics(scores, labels);
  return res;
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

inline std::string fmt_double(double v, const char* spec = "%.10f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace detail

inline void write_consistency_csv(std::ostream& out, const std::vector<ConsistencyResult>& results) {
  out << "group,bin_low,bin_high,count,fraction\n";
  for (const auto& r : results) {
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      const double frac = r.size() ? static_cast<double>(r.counts[b]) / static_cast<double>(r.size()) : 0.0;
      out << group_name(r.group) << ',' << detail::fmt_double(static_cast<double>(b) / 10.0, "%.1f") << ','
          << detail::fmt_double(static_cast<double>(b + 1) / 10.0, "%.1f") << ',' << r.counts[b] << ','
          << detail::fmt_double(frac) << '\n';
    }
  }
}

inline void write_deletion_csv(std::ostream& out, const std::vector<DeletionCurve>& curves) {
  out << "group,ordering,k,accuracy,n\n";
  for (const auto& c : curves)
    for (std::size_t k = 0; k < c.accuracy_at_k.size(); ++k)
      out << group_name(c.group) << ',' << ordering_name(c.ordering) << ',' << k << ','
          << detail::fmt_double(c.accuracy_at_k[k]) << ',' << c.n_sequences << '\n';
}

inline nlohmann::json metrics_json(const EvalMetrics& m) {
  nlohmann::json j{{"acc", m.acc}, {"n", m.n_predictions}};
  j["auc"] = m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr);
  if (m.loss) j["loss"] = *m.loss;
  return j;
}

inline nlohmann::json summary_json(const ExperimentResults& res) {
  nlohmann::json j;
  std::size_t total = 0;
  nlohmann::json groups = nlohmann::json::object();
  for (auto g : kAllGroups) {
    const auto n = res.group_sizes[static_cast<std::size_t>(g)];
    total += n;
    groups[std::string(group_name(g))] = n;
  }
  j["total_sequences"] = total;
  j["correctly_predicted"] = res.group_sizes[0] + res.group_sizes[1];
  j["falsely_predicted"] = res.group_sizes[2] + res.group_sizes[3];
  j["groups"] = groups;
  nlohmann::json cons = nlohmann::json::object();
  for (const auto& c : res.consistency)
    cons[std::string(group_name(c.group))] = {{"n", c.size()},
                                              {"mean_rate", c.mean_rate},
                                              {"fraction_at_least_0.9", c.fraction_at_least_90},
                                              {"fraction_at_most_0.5", c.fraction_at_most_50}};
  j["consistency"] = cons;
  j["protocol_metrics"] = metrics_json(res.protocol_metrics);
  nlohmann::json del = nlohmann::json::object();
  for (bool correct : {true, false}) {
    const auto rel = pooled_curve(res.relevance_curves, correct);
    const auto rnd = pooled_curve(res.random_curves, correct);
    if (rel.size() > 10)
      del[correct ? "correct_groups_mean_gap_random_minus_relevance_k1_10"
                  : "false_groups_mean_gap_relevance_minus_random_k1_10"] =
          correct ? mean_gap(rnd, rel, 1, 10) : mean_gap(rel, rnd, 1, 10);
  }
  j["deletion"] = del;
  return j;
}

/// Writes consistency.csv, deletion.csv and summary.json into `dir`.
/// `extra` is merged into the summary (config echo, seeds, checkpoint hash).
inline void emit_reports(const std::filesystem::path& dir, const ExperimentResults& res,
                         const nlohmann::json& extra = nlohmann::json::object()) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("consistency.csv");
    write_consistency_csv(out, res.consistency);
  }
  {
    auto out = open("deletion.csv");
    std::vector<DeletionCurve> all = res.relevance_curves;
    all.insert(all.end(), res.random_curves.begin(), res.random_curves.end());
    write_deletion_csv(out, all);
  }
  {
    auto out = open("summary.json");
    auto j = summary_json(res);
    for (const auto& [k, v] : extra.items()) j[k] = v;
    out << j.dump(2) << '\n';
  }
}

/// Per-sequence explanation report.
inline nlohmann::json explanation_json(const ExplainedItem& e) {
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t t = 0; t < e.item.input.size(); ++t)
    steps.push_back({{"t", t + 1},
                     {"skill_id", e.item.input[t].skill},
                     {"correct", e.item.input[t].correct},
                     {"relevance", e.profile.relevance[t]}});
  return {{"learner_id", e.item.learner_id},
          {"window_index", e.item.window_index},
          {"target_skill", e.item.target_skill},
          {"actual_correct", e.item.actual_correct},
          {"seed_value", e.profile.seed_value},
          {"probability", e.outcome.probability},
          {"group", group_name(e.outcome.group)},
          {"steps", steps},
          {"absorbed_bias", e.profile.absorbed_bias},
          {"absorbed_stabilizer", e.profile.absorbed_stabilizer}};
}

}  // namespace ktlab
