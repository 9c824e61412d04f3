#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "docgrid/layers.hpp"
#include "oracles.hpp"

using namespace docgrid;
using oracle::random_tensor;

namespace {

// Random values kept at least `gap` away from each other and from zero so
// that kinks (ReLU at 0, max-pool ties) stay outside the difference step.
Tensor tie_free(Shape s, std::uint64_t seed, float gap = 0.05f) {
  Tensor t(std::move(s));
  std::vector<float> vals(t.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = gap * static_cast<float>(i + 1);
  std::mt19937_64 rng(seed);
  std::shuffle(vals.begin(), vals.end(), rng);
  for (std::size_t i = 0; i < vals.size(); ++i) t[i] = (i % 3 == 0 ? -1.0f : 1.0f) * vals[i];
  return t;
}

}  // namespace

// ---------------------------------------------------------------- ReLU

TEST(Relu, Forward) {
  Tensor y = relu_forward(Tensor({3}, {-1, 0, 2}));
  EXPECT_EQ(y.vec(), (std::vector<float>{0, 0, 2}));
}

TEST(Relu, AllNegative) {
  Tensor x({2, 3}, -0.5f);
  const Tensor y = relu_forward(x);
  const Tensor g = relu_backward(x, Tensor({2, 3}, 1.0f));
  for (float v : y.vec()) EXPECT_EQ(v, 0.0f);
  for (float v : g.vec()) EXPECT_EQ(v, 0.0f);
}

TEST(Relu, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor x = tie_free({2, 3, 4, 4}, seed);
    Tensor probe = random_tensor(x.shape(), 100 + seed);
    Tensor g = relu_backward(x, probe);
    Tensor n = oracle::finite_difference([&](const Tensor& t) { return oracle::weighted_sum(relu_forward(t), probe); }, x);
    EXPECT_LE(oracle::max_rel_error(g, n), 1e-3);
  }
}

// ------------------------------------------------------------- max-pool

TEST(MaxPool, QuadrantMaxima) {
  Tensor x({1, 1, 4, 4});
  std::iota(x.vec().begin(), x.vec().end(), 1.0f);
  auto r = maxpool_forward(x, {2, 2});
  EXPECT_EQ(r.output.vec(), (std::vector<float>{6, 8, 14, 16}));
  EXPECT_EQ(r.switches, (std::vector<std::int32_t>{5, 7, 13, 15}));
}

TEST(MaxPool, ConstantInputTiesGoToFirstInScan) {
  Tensor x({1, 2, 4, 6}, 3.0f);
  auto r = maxpool_forward(x, {2, 2});
  for (float v : r.output.vec()) EXPECT_EQ(v, 3.0f);
  // window origins in row-major order
  const std::vector<std::int32_t> origins{0, 2, 4, 12, 14, 16};
  for (std::size_t i = 0; i < r.switches.size(); ++i) EXPECT_EQ(r.switches[i], origins[i % 6]);
}

TEST(MaxPool, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor x = tie_free({2, 2, 7, 7}, seed);
    const PoolGeometry g{3, 2};
    auto r = maxpool_forward(x, g);
    Tensor probe = random_tensor(r.output.shape(), 50 + seed);
    Tensor a = maxpool_backward(r.switches, probe, x.shape());
    Tensor n = oracle::finite_difference(
        [&](const Tensor& t) { return oracle::weighted_sum(maxpool_forward(t, g).output, probe); }, x);
    EXPECT_LE(oracle::max_rel_error(a, n), 1e-3);
  }
}

TEST(MaxPool, BackwardConservesMassWhenTiling) {
  Tensor x = random_tensor({2, 3, 8, 6}, 4);
  auto r = maxpool_forward(x, {2, 2});
  Tensor g = random_tensor(r.output.shape(), 5);
  Tensor gi = maxpool_backward(r.switches, g, x.shape());
  const double in_sum = std::accumulate(gi.vec().begin(), gi.vec().end(), 0.0);
  const double out_sum = std::accumulate(g.vec().begin(), g.vec().end(), 0.0);
  EXPECT_NEAR(in_sum, out_sum, 1e-4);
}

TEST(MaxPool, DegenerateGeometry) {
  EXPECT_THROW(maxpool_forward(Tensor({1, 1, 2, 2}), {3, 1}), InvalidArgument);
  EXPECT_THROW(maxpool_forward(Tensor({1, 1, 4, 4}), {2, 0}), InvalidArgument);
}

// ------------------------------------------------------------------ LRN

TEST(Lrn, ZeroInput) {
  const Tensor y = lrn_forward(Tensor({1, 5, 3, 3}), LrnParams{});
  for (float v : y.vec()) EXPECT_EQ(v, 0.0f);
}

TEST(Lrn, SingleChannelByHand) {
  Tensor y = lrn_forward(Tensor({1, 1, 1, 1}, {3.0f}), LrnParams{1, 1.0f, 1.0f, 0.5f});
  EXPECT_NEAR(y[0], 3.0 / std::sqrt(10.0), 1e-6);
  EXPECT_NEAR(y[0], 0.9487, 1e-4);
}

TEST(Lrn, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    // large alpha so the cross-channel coupling is exercised
    const LrnParams p{3, 1.0f, 0.8f, 0.75f};
    Tensor x = random_tensor({2, 5, 3, 3}, seed, -1.5f, 1.5f);
    Tensor probe = random_tensor(x.shape(), 10 + seed);
    Tensor a = lrn_backward(x, p, probe);
    Tensor n = oracle::finite_difference([&](const Tensor& t) { return oracle::weighted_sum(lrn_forward(t, p), probe); }, x);
    EXPECT_LE(oracle::max_rel_error(a, n), 1e-3) << "seed " << seed;
  }
}

TEST(Lrn, RejectsEvenOrOversizedWindow) {
  EXPECT_THROW(lrn_forward(Tensor({1, 4, 2, 2}), LrnParams{4, 2, 1e-4f, 0.75f}), InvalidArgument);
  EXPECT_THROW(lrn_forward(Tensor({1, 2, 2, 2}), LrnParams{5, 2, 1e-4f, 0.75f}), InvalidArgument);
}

// -------------------------------------------------------------- dropout

TEST(Dropout, EvalIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({4, 10}, 2);
  auto r = dropout_forward(x, 0.5f, Mode::eval, rng);
  EXPECT_TRUE(bit_identical(r.output, x));
}

TEST(Dropout, KeepAllIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({4, 10}, 2);
  EXPECT_TRUE(bit_identical(dropout_forward(x, 1.0f, Mode::train, rng).output, x));
  EXPECT_TRUE(bit_identical(dropout_forward(x, 1.0f, Mode::eval, rng).output, x));
}

TEST(Dropout, KeptFractionOverMillionElements) {
  std::mt19937_64 rng(1234);
  Tensor x({1000, 1000}, 1.0f);
  auto r = dropout_forward(x, 0.5f, Mode::train, rng);
  const double kept = std::accumulate(r.mask.vec().begin(), r.mask.vec().end(), 0.0) / 1e6;
  EXPECT_GE(kept, 0.498);
  EXPECT_LE(kept, 0.502);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(r.output[i], r.mask[i] * 2.0f);
}

TEST(Dropout, FixedMaskFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor x = random_tensor({3, 8}, seed);
    Tensor mask = dropout_forward(x, 0.6f, Mode::train, rng).mask;
    Tensor probe = random_tensor(x.shape(), 40 + seed);
    Tensor a = dropout_backward(mask, 0.6f, probe);
    Tensor n = oracle::finite_difference(
        [&](const Tensor& t) { return oracle::weighted_sum(dropout_apply(t, mask, 0.6f), probe); }, x);
    EXPECT_LE(oracle::max_rel_error(a, n), 1e-3);
  }
}

// ----------------------------------------------------------- batchnorm

TEST(BatchNorm, NormalizedStatistics) {
  Tensor x = random_tensor({8, 3, 5, 5}, 7, -3.0f, 5.0f);
  auto state = BatchNormState::identity(3);
  auto r = batchnorm_forward(x, state, Mode::train);
  for (int c = 0; c < 3; ++c) {
    double s = 0, ss = 0;
    int n = 0;
    for (int b = 0; b < 8; ++b)
      for (int i = 0; i < 25; ++i) {
        const double v = r.output[(static_cast<std::size_t>(b) * 3 + c) * 25 + i];
        s += v;
        ss += v * v;
        ++n;
      }
    const double mean = s / n;
    EXPECT_LE(std::abs(mean), 1e-5);
    EXPECT_NEAR(ss / n - mean * mean, 1.0, 1e-3);
  }
}

TEST(BatchNorm, TwoValuesByHand) {
  auto state = BatchNormState::identity(1, 1e-12f);
  auto r = batchnorm_forward(Tensor({2, 1}, {1.0f, 3.0f}), state, Mode::train);
  EXPECT_NEAR(r.output[0], -1.0f, 1e-6);
  EXPECT_NEAR(r.output[1], 1.0f, 1e-6);
  EXPECT_NEAR(state.running_mean[0], 0.1f * 2.0f, 1e-6);
  EXPECT_NEAR(state.running_var[0], 0.9f + 0.1f * 1.0f, 1e-6);
}

TEST(BatchNorm, BatchOfOneRejectedInTrain) {
  auto state = BatchNormState::identity(4);
  EXPECT_THROW(batchnorm_forward(Tensor({1, 4}), state, Mode::train), InvalidArgument);
  EXPECT_NO_THROW(batchnorm_forward(Tensor({1, 4}), state, Mode::eval));
}

TEST(BatchNorm, EvalIsDeterministicAndStateless) {
  auto state = BatchNormState::identity(2);
  state.running_mean = Tensor({2}, {0.3f, -0.2f});
  state.running_var = Tensor({2}, {2.0f, 0.5f});
  const auto before = state;
  Tensor x = random_tensor({3, 2, 4, 4}, 3);
  auto a = batchnorm_forward(x, state, Mode::eval);
  auto b = batchnorm_forward(x, state, Mode::eval);
  EXPECT_TRUE(bit_identical(a.output, b.output));
  EXPECT_EQ(state, before);
}

TEST(BatchNorm, FiniteDifferencesForInputGammaBeta) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor x = random_tensor({4, 3, 2, 2}, seed, -2.0f, 2.0f);
    auto state = BatchNormState::identity(3);
    state.gamma = random_tensor({3}, 20 + seed, 0.5f, 1.5f);
    state.beta = random_tensor({3}, 30 + seed);
    Tensor probe = random_tensor(x.shape(), 40 + seed);
    auto st = state;
    auto fwd = batchnorm_forward(x, st, Mode::train);
    auto g = batchnorm_backward(fwd.cache, state, probe);

    auto loss = [&](const Tensor& xx, const Tensor& gamma, const Tensor& beta) {
      auto s = state;
      s.gamma = gamma;
      s.beta = beta;
      return oracle::weighted_sum(batchnorm_forward(xx, s, Mode::train).output, probe);
    };
    EXPECT_LE(oracle::max_rel_error(g.input, oracle::finite_difference(
                                                 [&](const Tensor& t) { return loss(t, state.gamma, state.beta); }, x)),
              1e-3)
        << "seed " << seed;
    EXPECT_LE(oracle::max_rel_error(g.gamma, oracle::finite_difference(
                                                 [&](const Tensor& t) { return loss(x, t, state.beta); }, state.gamma)),
              1e-3);
    EXPECT_LE(oracle::max_rel_error(g.beta, oracle::finite_difference(
                                                [&](const Tensor& t) { return loss(x, state.gamma, t); }, state.beta)),
              1e-3);
  }
}

// ------------------------------------------------------------------ SPP

namespace {
// Brute-force bin maxima straight from the bin boundary definition.
std::vector<float> brute_spp(const Tensor& x, const std::vector<int>& levels) {
  std::vector<float> out;
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  for (int n = 0; n < N; ++n)
    for (int l : levels)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < l; ++i)
          for (int j = 0; j < l; ++j) {
            const int r0 = static_cast<int>(std::floor(static_cast<double>(i) * H / l));
            const int r1 = static_cast<int>(std::floor(static_cast<double>(i + 1) * H / l)) - 1;
            const int c0 = static_cast<int>(std::floor(static_cast<double>(j) * W / l));
            const int c1 = static_cast<int>(std::floor(static_cast<double>(j + 1) * W / l)) - 1;
            float m = -std::numeric_limits<float>::infinity();
            for (int y = r0; y <= r1; ++y)
              for (int xx = c0; xx <= c1; ++xx) m = std::max(m, x.at(n, c, y, xx));
            out.push_back(m);
          }
  return out;
}
}  // namespace

TEST(Spp, FourByFourLevelsOneTwo) {
  Tensor x({1, 1, 4, 4});
  std::iota(x.vec().begin(), x.vec().end(), 1.0f);
  auto r = spp_forward(x, {1, 2});
  EXPECT_EQ(r.output.vec(), (std::vector<float>{16, 6, 8, 14, 16}));
}

TEST(Spp, SingleLevelIsGlobalMax) {
  Tensor x = random_tensor({2, 3, 5, 7}, 8);
  auto r = spp_forward(x, {1});
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      float m = -1e9f;
      for (int y = 0; y < 5; ++y)
        for (int xx = 0; xx < 7; ++xx) m = std::max(m, x.at(n, c, y, xx));
      EXPECT_EQ(r.output.at(n, c), m);
    }
}

TEST(Spp, LengthIndependentOfSpatialSize) {
  const std::vector<int> levels{1, 2, 3, 6};
  EXPECT_EQ(spp_forward(random_tensor({1, 4, 13, 13}, 1), levels).output.shape(),
            spp_forward(random_tensor({1, 4, 17, 11}, 2), levels).output.shape());
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(6, 40);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor x = random_tensor({1, 4, size(rng), size(rng)}, 10 + trial);
    auto r = spp_forward(x, levels);
    EXPECT_EQ(r.output.dim(1), 4 * 50);
    EXPECT_EQ(r.output.vec(), brute_spp(x, levels));
  }
}

TEST(Spp, TooSmallInputRejected) {
  EXPECT_THROW(spp_forward(Tensor({1, 1, 5, 8}), {1, 6}), InvalidArgument);
  EXPECT_THROW(spp_forward(Tensor({1, 1, 8, 8}), {}), InvalidArgument);
}

TEST(Spp, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor x = tie_free({2, 2, 7, 6}, seed);
    const std::vector<int> levels{1, 2, 3};
    auto r = spp_forward(x, levels);
    Tensor probe = random_tensor(r.output.shape(), 60 + seed);
    Tensor a = spp_backward(r.switches, levels, probe, x.shape());
    Tensor n = oracle::finite_difference(
        [&](const Tensor& t) { return oracle::weighted_sum(spp_forward(t, levels).output, probe); }, x);
    EXPECT_LE(oracle::max_rel_error(a, n), 1e-3);
  }
}

// -------------------------------------------------------------- softmax

TEST(SoftmaxXent, Symmetric) {
  auto r = softmax_xent(Tensor({1, 2}, {0, 0}), {0});
  EXPECT_FLOAT_EQ(r.probs[0], 0.5f);
  EXPECT_FLOAT_EQ(r.probs[1], 0.5f);
  EXPECT_NEAR(r.loss, 0.6931, 1e-4);
}

TEST(SoftmaxXent, LargeLogitsStayFinite) {
  auto r = softmax_xent(Tensor({1, 2}, {1000, 0}), {1});
  EXPECT_NEAR(r.probs[0], 1.0f, 1e-6);
  EXPECT_NEAR(r.probs[1], 0.0f, 1e-6);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 1000.0, 1e-3);
}

TEST(SoftmaxXent, ProbabilitiesOnSimplex) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor p = softmax(random_tensor({4, 7}, seed, -20.0f, 20.0f));
    for (int n = 0; n < 4; ++n) {
      double s = 0;
      for (int c = 0; c < 7; ++c) {
        EXPECT_GE(p.at(n, c), 0.0f);
        EXPECT_LE(p.at(n, c), 1.0f);
        s += p.at(n, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-5);
    }
  }
}

TEST(SoftmaxXent, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor z = random_tensor({3, 5}, seed, -2.0f, 2.0f);
    const std::vector<int> labels{static_cast<int>(seed % 5), 2, 4};
    Tensor a = softmax_xent_grad(softmax(z), labels);
    Tensor n = oracle::finite_difference([&](const Tensor& t) { return softmax_xent(t, labels).loss; }, z);
    EXPECT_LE(oracle::max_rel_error(a, n), 1e-3);
  }
}

TEST(SoftmaxXent, OutOfRangeLabel) {
  EXPECT_THROW(softmax_xent(Tensor({1, 3}), {3}), InvalidArgument);
  EXPECT_THROW(softmax_xent(Tensor({1, 3}), {-1}), InvalidArgument);
}

TEST(Argmax, TiesGoToLowestIndex) {
  const std::vector<float> v{0.25f, 0.5f, 0.5f, 0.1f};
  EXPECT_EQ(argmax(v), 1);
}
