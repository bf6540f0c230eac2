#pragma once

// Single-layer LSTM knowledge-tracing model with per-skill sigmoid outputs.
//
// Gate blocks are stacked [i, f, g, o] in Wx, Uh and b: rows [0,H) drive the
// input gate, [H,2H) the forget gate, [2H,3H) the candidate and [3H,4H) the
// output gate. The same order is used by the trainer, the relevance pass and
// the checkpoint format.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ktlab/data.hpp"
#include "ktlab/error.hpp"
#include "ktlab/numkit.hpp"

namespace ktlab {

enum class Gate : std::size_t { Input = 0, Forget = 1, Candidate = 2, Output = 3 };

inline constexpr std::string_view kGateOrderTag = "i,f,g,o";
inline constexpr std::string_view kCheckpointSchema = "ktlab-checkpoint-v1";

struct DktParams {
  std::size_t hidden = 0;  // H
  std::size_t skills = 0;  // M
  DenseMatrix Wx;          // 4H x 2M
  DenseMatrix Uh;          // 4H x H
  DenseVector b;           // 4H
  DenseMatrix Wy;          // M x H
  DenseVector by;          // M

  DktParams() = default;
  DktParams(std::size_t h, std::size_t m)
      : hidden(h), skills(m), Wx(4 * h, 2 * m), Uh(4 * h, h), b(4 * h), Wy(m, h), by(m) {}

  std::size_t input_size() const { return 2 * skills; }

  /// Parameter blocks in checkpoint order.
  std::array<std::span<double>, 5> blocks() { return {Wx.span(), Uh.span(), b.span(), Wy.span(), by.span()}; }
  std::array<std::span<const double>, 5> blocks() const {
    return {Wx.span(), Uh.span(), b.span(), Wy.span(), by.span()};
  }
  static constexpr std::array<std::string_view, 5> block_names() { return {"Wx", "Uh", "b", "Wy", "by"}; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto blk : blocks()) n += blk.size();
    return n;
  }

  DktParams zeros_like() const { return DktParams(hidden, skills); }

  bool finite() const {
    for (auto blk : blocks())
      if (!all_finite(blk)) return false;
    return true;
  }

  friend bool operator==(const DktParams&, const DktParams&) = default;
};

/// Uniform(-scale/sqrt(fan_in), +scale/sqrt(fan_in)) weights; zero biases
/// except the forget gate, which starts at 1.
inline DktParams init_params(SeededRng& rng, std::size_t hidden, std::size_t skills, double scale = 1.0) {
  if (hidden < 1 || skills < 1) throw std::invalid_argument("init_params: H and M must be >= 1");
  if (!(scale > 0.0)) throw std::invalid_argument("init_params: scale must be positive");
  DktParams p(hidden, skills);
  auto fill = [&](std::span<double> blk, std::size_t fan_in) {
    const double bound = scale / std::sqrt(static_cast<double>(fan_in));
    for (double& w : blk) w = rng.uniform(-bound, bound);
  };
  fill(p.Wx.span(), p.input_size());
  fill(p.Uh.span(), hidden);
  fill(p.Wy.span(), hidden);
  for (std::size_t j = 0; j < hidden; ++j) p.b[hidden + j] = 1.0;
  return p;
}

struct StepTrace {
  DenseVector x;         // 2M input
  DenseVector pre;       // 4H gate pre-activations, [i, f, g, o]
  DenseVector i, f, g, o;
  DenseVector c;         // cell after the step
  DenseVector h;         // hidden after the step
  DenseVector y_logit;   // M
  DenseVector y_prob;    // M
};

struct ForwardTrace {
  std::size_t hidden = 0;
  std::size_t skills = 0;
  std::vector<StepTrace> steps;

  std::size_t size() const { return steps.size(); }
  const StepTrace& last() const { return steps.back(); }
};

/// Optional per-step multiplicative mask on h_t where it feeds the output
/// layer (inverted dropout). Never touches the recurrence.
using OutputMask = std::vector<DenseVector>;

inline ForwardTrace forward(const DktParams& p, const EncodedSequence& seq, const OutputMask* mask = nullptr) {
  if (seq.steps.empty()) throw std::invalid_argument("forward: empty sequence");
  if (mask && mask->size() != seq.size()) throw std::invalid_argument("forward: mask length mismatch");
  const std::size_t H = p.hidden;
  const std::size_t M = p.skills;

  ForwardTrace tr{H, M, {}};
  tr.steps.reserve(seq.size());
  DenseVector h_prev(H), c_prev(H);
  DenseVector masked(H);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const DenseVector& x = seq.steps[t];
    if (x.size() != p.input_size())
      throw std::invalid_argument("forward: input length " + std::to_string(x.size()) + " != 2M = " +
                                  std::to_string(p.input_size()));
    StepTrace st;
    st.x = x;
    st.pre = matvec(p.Uh, h_prev);
    for (std::size_t r = 0; r < 4 * H; ++r) st.pre[r] += p.b[r];
    // Inputs are one-hot in practice; walk only the nonzero columns of Wx.
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      for (std::size_t r = 0; r < 4 * H; ++r) st.pre[r] += p.Wx(r, j) * xj;
    }
    st.i = DenseVector(H);
    st.f = DenseVector(H);
    st.g = DenseVector(H);
    st.o = DenseVector(H);
    st.c = DenseVector(H);
    st.h = DenseVector(H);
    for (std::size_t k = 0; k < H; ++k) {
      st.i[k] = sigmoid(st.pre[k]);
      st.f[k] = sigmoid(st.pre[H + k]);
      st.g[k] = std::tanh(st.pre[2 * H + k]);
      st.o[k] = sigmoid(st.pre[3 * H + k]);
      st.c[k] = st.f[k] * c_prev[k] + st.i[k] * st.g[k];
      st.h[k] = st.o[k] * std::tanh(st.c[k]);
    }
    const DenseVector* out_h = &st.h;
    if (mask) {
      const DenseVector& m = (*mask)[t];
      for (std::size_t k = 0; k < H; ++k) masked[k] = st.h[k] * m[k];
      out_h = &masked;
    }
    st.y_logit = matvec(p.Wy, *out_h);
    for (std::size_t s = 0; s < M; ++s) st.y_logit[s] += p.by[s];
    st.y_prob = sigmoid(st.y_logit);
    h_prev = st.h;
    c_prev = st.c;
    tr.steps.push_back(std::move(st));
  }
  return tr;
}

struct MasteryPrediction {
  std::size_t target_skill = 0;
  double probability = 0.5;
  double logit = 0.0;
};

inline MasteryPrediction prediction_at(const ForwardTrace& tr, std::size_t t, std::size_t target_skill) {
  if (target_skill >= tr.skills) throw std::out_of_range("prediction: target skill out of range");
  const auto& st = tr.steps.at(t);
  return {target_skill, st.y_prob[target_skill], st.y_logit[target_skill]};
}

/// Mastery probability for `target_skill` after the last step of `seq`.
inline MasteryPrediction predict_next(const DktParams& p, const EncodedSequence& seq, std::size_t target_skill) {
  if (target_skill >= p.skills) throw std::out_of_range("predict_next: target skill out of range");
  if (seq.steps.empty()) throw std::invalid_argument("predict_next: empty sequence");
  const auto tr = forward(p, seq);
  return prediction_at(tr, tr.size() - 1, target_skill);
}

/// Prediction after zero steps from the zero state: only the output bias remains.
inline MasteryPrediction predict_empty(const DktParams& p, std::size_t target_skill) {
  if (target_skill >= p.skills) throw std::out_of_range("predict_empty: target skill out of range");
  return {target_skill, sigmoid(p.by[target_skill]), p.by[target_skill]};
}

/// predict_next over raw steps, falling back to predict_empty for no steps.
inline MasteryPrediction predict_steps(const DktParams& p, std::span<const Step> steps, std::size_t target_skill) {
  if (steps.empty()) return predict_empty(p, target_skill);
  return predict_next(p, encode(steps, p.skills), target_skill);
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON header plus hex-encoded little-endian float64 blocks.

namespace detail {

inline std::string to_hex_le(std::span<const double> xs) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(xs.size() * 16);
  for (double x : xs) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    for (int byte = 0; byte < 8; ++byte) {
      const auto v = static_cast<unsigned>((bits >> (8 * byte)) & 0xffu);
      out += digits[v >> 4];
      out += digits[v & 0xf];
    }
  }
  return out;
}

inline void from_hex_le(std::string_view hex, std::span<double> out, const std::string& block) {
  if (hex.size() != out.size() * 16)
    throw InputError("checkpoint block " + block + ": expected " + std::to_string(out.size()) + " values");
  auto nibble = [&](char c) -> std::uint64_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint64_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint64_t>(c - 'a' + 10);
    throw InputError("checkpoint block " + block + ": bad hex digit");
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int byte = 0; byte < 8; ++byte) {
      const std::size_t pos = i * 16 + static_cast<std::size_t>(byte) * 2;
      bits |= ((nibble(hex[pos]) << 4) | nibble(hex[pos + 1])) << (8 * byte);
    }
    out[i] = std::bit_cast<double>(bits);
  }
}

}  // namespace detail

struct Checkpoint {
  DktParams params;
  std::string skill_map_hash;
  nlohmann::json meta = nlohmann::json::object();
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  const auto& p = ck.params;
  nlohmann::json j;
  j["schema"] = kCheckpointSchema;
  j["H"] = p.hidden;
  j["M"] = p.skills;
  j["gate_order"] = kGateOrderTag;
  j["skill_map_hash"] = ck.skill_map_hash;
  j["encoding"] = "hex-f64le";
  j["meta"] = ck.meta;
  auto blocks = nlohmann::json::array();
  const auto names = DktParams::block_names();
  const auto spans = p.blocks();
  for (std::size_t i = 0; i < spans.size(); ++i)
    blocks.push_back({{"name", names[i]}, {"count", spans[i].size()}, {"data", detail::to_hex_le(spans[i])}});
  j["blocks"] = std::move(blocks);
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kCheckpointSchema)
      throw InputError("checkpoint: unsupported schema " + j.at("schema").dump());
    if (j.at("gate_order").get<std::string>() != kGateOrderTag)
      throw InputError("checkpoint: unsupported gate order " + j.at("gate_order").dump());
    Checkpoint ck;
    ck.params = DktParams(j.at("H").get<std::size_t>(), j.at("M").get<std::size_t>());
    ck.skill_map_hash = j.at("skill_map_hash").get<std::string>();
    if (j.contains("meta")) ck.meta = j.at("meta");
    const auto& blocks = j.at("blocks");
    const auto names = DktParams::block_names();
    auto spans = ck.params.blocks();
    if (blocks.size() != spans.size()) throw InputError("checkpoint: expected 5 parameter blocks");
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const auto name = blocks[i].at("name").get<std::string>();
      if (name != names[i]) throw InputError("checkpoint: block " + std::to_string(i) + " should be " +
                                             std::string(names[i]) + ", found " + name);
      detail::from_hex_le(blocks[i].at("data").get<std::string>(), spans[i], name);
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ck).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace ktlab
