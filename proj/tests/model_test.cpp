#include "ktlab/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace ktlab {
namespace {

DktParams random_params(std::uint64_t seed, std::size_t H, std::size_t M, double spread = 1.0) {
  SeededRng rng(seed);
  DktParams p(H, M);
  for (auto blk : p.blocks())
    for (double& w : blk) w = rng.uniform(-spread, spread);
  return p;
}

EncodedSequence random_sequence(SeededRng& rng, std::size_t T, std::size_t M) {
  std::vector<Step> steps;
  for (std::size_t t = 0; t < T; ++t) steps.push_back({static_cast<std::size_t>(rng.below(M)), rng.bernoulli(0.5)});
  return encode(steps, M);
}

TEST(InitParams, BoundsAndForgetBias) {
  SeededRng rng(1);
  const double scale = 0.7;
  const auto p = init_params(rng, 8, 5, scale);
  for (double w : p.Wx.span()) EXPECT_LE(std::abs(w), scale / std::sqrt(10.0));
  for (double w : p.Uh.span()) EXPECT_LE(std::abs(w), scale / std::sqrt(8.0));
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_EQ(p.b[j], 0.0);
    EXPECT_EQ(p.b[8 + j], 1.0);
    EXPECT_EQ(p.b[16 + j], 0.0);
    EXPECT_EQ(p.b[24 + j], 0.0);
  }
  for (double b : p.by) EXPECT_EQ(b, 0.0);
}

TEST(InitParams, Deterministic) {
  SeededRng a(3), b(3);
  EXPECT_EQ(init_params(a, 4, 3), init_params(b, 4, 3));
}

TEST(Forward, ZeroParamsGiveHalf) {
  const DktParams p(3, 4);
  SeededRng rng(2);
  const auto tr = forward(p, random_sequence(rng, 5, 4));
  for (const auto& st : tr.steps)
    for (double y : st.y_prob) EXPECT_EQ(y, 0.5);
  EXPECT_EQ(predict_next(p, random_sequence(rng, 3, 4), 2).probability, 0.5);
}

// Closed-form single step, H = 2, M = 2, written out unit by unit.
TEST(Forward, SingleStepMatchesHandComputation) {
  const auto p = random_params(17, 2, 2);
  const std::vector<Step> steps{{1, false}};  // one-hot index M + 1 = 3
  const auto tr = forward(p, encode(steps, 2));
  ASSERT_EQ(tr.size(), 1u);
  const auto& st = tr.steps[0];

  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const std::size_t col = 3;
  double h[2], c[2];
  for (std::size_t k = 0; k < 2; ++k) {
    // h_0 = 0, so only the active input column and the bias contribute.
    const double zi = p.Wx(0 + k, col) + p.b[0 + k];
    const double zf = p.Wx(2 + k, col) + p.b[2 + k];
    const double zg = p.Wx(4 + k, col) + p.b[4 + k];
    const double zo = p.Wx(6 + k, col) + p.b[6 + k];
    const double i = sig(zi), f = sig(zf), g = std::tanh(zg), o = sig(zo);
    c[k] = f * 0.0 + i * g;
    h[k] = o * std::tanh(c[k]);
    EXPECT_NEAR(st.i[k], i, 1e-14);
    EXPECT_NEAR(st.f[k], f, 1e-14);
    EXPECT_NEAR(st.g[k], g, 1e-14);
    EXPECT_NEAR(st.o[k], o, 1e-14);
    EXPECT_NEAR(st.c[k], c[k], 1e-14);
    EXPECT_NEAR(st.h[k], h[k], 1e-14);
  }
  for (std::size_t s = 0; s < 2; ++s) {
    const double logit = p.Wy(s, 0) * h[0] + p.Wy(s, 1) * h[1] + p.by[s];
    EXPECT_NEAR(st.y_logit[s], logit, 1e-14);
    EXPECT_NEAR(st.y_prob[s], sig(logit), 1e-14);
  }
}

TEST(Forward, TraceRangesAndCellBound) {
  SeededRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_params(100 + static_cast<std::uint64_t>(trial), 6, 4, 3.0);
    const auto tr = forward(p, random_sequence(rng, 12, 4));
    double prev_norm = 0.0;
    for (const auto& st : tr.steps) {
      double norm = 0.0;
      for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_GT(st.i[k], 0.0);
        EXPECT_LT(st.i[k], 1.0);
        EXPECT_GT(st.f[k], 0.0);
        EXPECT_LT(st.f[k], 1.0);
        EXPECT_GT(st.o[k], 0.0);
        EXPECT_LT(st.o[k], 1.0);
        EXPECT_GT(st.g[k], -1.0);
        EXPECT_LT(st.g[k], 1.0);
        norm = std::max(norm, std::abs(st.c[k]));
      }
      EXPECT_LE(norm, prev_norm + 1.0);
      prev_norm = norm;
      for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(st.y_prob[s], sigmoid(st.y_logit[s]));
    }
  }
}

TEST(Forward, DeterministicAndPure) {
  const auto p = random_params(8, 5, 3);
  SeededRng rng(8);
  const auto seq = random_sequence(rng, 9, 3);
  const auto a = forward(p, seq);
  const auto b = forward(p, seq);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a.steps[t].h, b.steps[t].h);
    EXPECT_EQ(a.steps[t].y_logit, b.steps[t].y_logit);
  }
}

TEST(Forward, DimensionMismatch) {
  const DktParams p(2, 3);
  EncodedSequence seq{{DenseVector(5)}};
  EXPECT_THROW(forward(p, seq), std::invalid_argument);
  EXPECT_THROW(forward(p, EncodedSequence{}), std::invalid_argument);
}

TEST(PredictNext, MatchesLastTraceStep) {
  const auto p = random_params(9, 4, 5);
  SeededRng rng(1);
  const auto seq = random_sequence(rng, 14, 5);
  const auto tr = forward(p, seq);
  for (std::size_t s = 0; s < 5; ++s) {
    const auto pred = predict_next(p, seq, s);
    EXPECT_EQ(pred.probability, tr.last().y_prob[s]);
    EXPECT_EQ(pred.probability, sigmoid(pred.logit));
  }
  EXPECT_THROW(predict_next(p, seq, 5), std::out_of_range);
}

TEST(PredictEmpty, IsOutputBiasOnly) {
  auto p = random_params(4, 3, 3);
  EXPECT_EQ(predict_empty(p, 1).probability, sigmoid(p.by[1]));
  EXPECT_EQ(predict_steps(p, {}, 2).logit, p.by[2]);
}

// Relabeling skills consistently (input columns, output rows) permutes predictions.
TEST(Forward, SkillRelabelingInvariance) {
  const std::size_t H = 5, M = 4;
  const auto p = random_params(21, H, M);
  const std::vector<std::size_t> perm{2, 0, 3, 1};  // old skill s -> new skill perm[s]
  DktParams q(H, M);
  q.Uh = p.Uh;
  q.b = p.b;
  for (std::size_t s = 0; s < M; ++s) {
    for (std::size_t r = 0; r < 4 * H; ++r) {
      q.Wx(r, perm[s]) = p.Wx(r, s);
      q.Wx(r, M + perm[s]) = p.Wx(r, M + s);
    }
    for (std::size_t j = 0; j < H; ++j) q.Wy(perm[s], j) = p.Wy(s, j);
    q.by[perm[s]] = p.by[s];
  }
  SeededRng rng(3);
  std::vector<Step> steps, relabeled;
  for (int t = 0; t < 10; ++t) {
    const Step st{static_cast<std::size_t>(rng.below(M)), rng.bernoulli(0.5)};
    steps.push_back(st);
    relabeled.push_back({perm[st.skill], st.correct});
  }
  const auto a = forward(p, encode(steps, M));
  const auto b = forward(q, encode(relabeled, M));
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t s = 0; s < M; ++s) EXPECT_NEAR(a.steps[t].y_prob[s], b.steps[t].y_prob[perm[s]], 1e-15);
}

TEST(Checkpoint, BitExactRoundTrip) {
  auto p = random_params(31, 3, 4);
  p.Wx(0, 0) = -0.0;
  p.Wy(1, 2) = 1e-310;  // subnormal
  p.by[3] = 0.1 + 0.2;
  const Checkpoint ck{p, "abc123", {{"epoch", 3}}};
  const auto back = checkpoint_from_json(nlohmann::json::parse(checkpoint_to_json(ck).dump()));
  EXPECT_EQ(back.skill_map_hash, "abc123");
  EXPECT_EQ(back.meta["epoch"], 3);
  const auto a = p.blocks();
  const auto b = back.params.blocks();
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a[k].size(), b[k].size());
    for (std::size_t i = 0; i < a[k].size(); ++i)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a[k][i]), std::bit_cast<std::uint64_t>(b[k][i]));
  }
}

TEST(Checkpoint, KnownEncoding) {
  DktParams p(1, 1);
  p.by[0] = 1.0;  // 0x3ff0000000000000, little-endian bytes
  const auto j = checkpoint_to_json({p, "h", {}});
  EXPECT_EQ(j["blocks"][4]["data"], "000000000000f03f");
  EXPECT_EQ(j["gate_order"], "i,f,g,o");
}

TEST(Checkpoint, RejectsWrongSchema) {
  auto j = checkpoint_to_json({DktParams(1, 1), "h", {}});
  j["schema"] = "other";
  EXPECT_THROW(checkpoint_from_json(j), InputError);
  auto k = checkpoint_to_json({DktParams(1, 1), "h", {}});
  k["blocks"][0]["data"] = "00";
  EXPECT_THROW(checkpoint_from_json(k), InputError);
}

}  // namespace
}  // namespace ktlab
