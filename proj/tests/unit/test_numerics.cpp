#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "onebit/numerics/adam.hpp"
#include "onebit/numerics/dft.hpp"
#include "onebit/numerics/finite_diff.hpp"
#include "onebit/numerics/rng.hpp"
#include "onebit/numerics/tape.hpp"
#include "onebit/stage1/estimator.hpp"
#include "support/fd_cases.hpp"
#include "support/oracles.hpp"

using namespace onebit;

namespace {

CVec random_cvec(Rng& rng, std::size_t n) {
  CVec v(n);
  for (auto& z : v) z = rng.complex_normal(1.0);
  return v;
}

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

}  // namespace

TEST(Dft, ImpulseIsConstant) {
  const DftPlan plan(4);
  const CVec out = dft(plan, CVec{1, 0, 0, 0});
  for (const auto& z : out) EXPECT_NEAR(std::abs(z - cplx(0.5, 0)), 0.0, 1e-15);
}

TEST(Dft, OnesIsScaledImpulse) {
  const DftPlan plan(4);
  const CVec out = dft(plan, CVec{1, 1, 1, 1});
  EXPECT_NEAR(std::abs(out[0] - cplx(2, 0)), 0.0, 1e-14);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(std::abs(out[i]), 0.0, 1e-14);
}

TEST(Dft, InverseOfConstant) {
  const DftPlan plan(8);
  const cplx c(0.3, -1.1);
  const CVec out = idft(plan, CVec(8, c));
  EXPECT_NEAR(std::abs(out[0] - c * std::sqrt(8.0)), 0.0, 1e-13);
  for (int i = 1; i < 8; ++i) EXPECT_NEAR(std::abs(out[i]), 0.0, 1e-13);
  for (const auto& z : idft(plan, CVec(8))) EXPECT_EQ(z, cplx{});
}

TEST(Dft, MatchesTextbookSumAndRoundTrips) {
  Rng rng(3);
  for (std::size_t n : {4u, 16u, 64u}) {
    const DftPlan plan(n);
    for (int trial = 0; trial < 10; ++trial) {
      const CVec v = random_cvec(rng, n);
      const CVec a = dft(plan, v);
      const CVec b = oracle::dft(v);
      const CVec back = idft(plan, a);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(std::abs(a[i] - b[i]), 0.0, 1e-10);
        EXPECT_NEAR(std::abs(back[i] - v[i]), 0.0, 1e-10);
      }
    }
  }
}

TEST(Dft, UnitaryForAllSupportedSizes) {
  for (std::size_t n = 4; n <= 64; n *= 2) {
    const DftPlan plan(n);
    double worst = 0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        cplx acc{};
        for (std::size_t i = 0; i < n; ++i) acc += plan.entry(r, i) * std::conj(plan.entry(c, i));
        worst = std::max(worst, std::abs(acc - cplx(r == c ? 1.0 : 0.0, 0.0)));
      }
    EXPECT_LT(worst, 1e-12) << "N_f = " << n;
  }
}

TEST(Dft, ParsevalOnRandomVectors) {
  Rng rng(9);
  const DftPlan plan(32);
  for (int t = 0; t < 100; ++t) {
    const CVec v = random_cvec(rng, 32);
    EXPECT_NEAR(std::sqrt(norm_sq(dft(plan, v))), std::sqrt(norm_sq(v)), 1e-10);
  }
}

TEST(Dft, RejectsLengthMismatch) {
  const DftPlan plan(8);
  EXPECT_THROW(dft(plan, CVec(4)), DimensionError);
  EXPECT_THROW(idft(plan, CVec(9)), DimensionError);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.normal(), b.normal());
    ASSERT_EQ(a.qpsk(), b.qpsk());
  }
}

TEST(Rng, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, {1, 2}), derive_seed(1, {2, 1}));
  EXPECT_NE(derive_seed(1, {0}), derive_seed(2, {0}));
  EXPECT_EQ(derive_seed(5, {3, 4}), derive_seed(5, {3, 4}));
}

TEST(Rng, ComplexNormalVariance) {
  Rng rng(17);
  double acc = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) acc += std::norm(rng.complex_normal(2.5));
  EXPECT_NEAR(acc / n, 2.5, 0.03);
}

TEST(GradTape, SquareHasGradientSix) {
  GradTape t;
  const Var theta = t.parameter(Mat::Constant(1, 1, 3.0), "theta");
  const Var loss = t.sum(t.mul(theta, theta));
  t.backward(loss);
  EXPECT_DOUBLE_EQ(t.scalar(loss), 9.0);
  EXPECT_DOUBLE_EQ(t.grad(theta)(0, 0), 6.0);
}

TEST(GradTape, ConstantLossHasZeroGradient) {
  GradTape t;
  const Var theta = t.parameter(Mat::Constant(1, 3, 1.5), "theta");
  const Var c = t.constant(Mat::Constant(1, 3, 2.0));
  const Var loss = t.sum(c);
  t.backward(loss);
  EXPECT_TRUE(t.grad(theta).isZero());
  EXPECT_EQ(t.parameter_gradient(), RealVec(3, 0.0));
}

TEST(GradTape, BackwardBeforeForwardFails) {
  GradTape empty;
  EXPECT_THROW(empty.backward(Var{0}), std::logic_error);

  GradTape t;
  const Var theta = t.parameter(Mat::Constant(1, 1, 1.0));
  const Var loss = t.sum(t.mul(theta, theta));
  t.set_value(theta, Mat::Constant(1, 1, 2.0));
  EXPECT_THROW(t.backward(loss), std::logic_error);  // stale until replay
  t.replay();
  t.backward(loss);
  EXPECT_DOUBLE_EQ(t.grad(theta)(0, 0), 4.0);
}

TEST(GradTape, NonScalarLossRejected) {
  GradTape t;
  const Var x = t.parameter(Mat::Ones(2, 2));
  const Var y = t.relu(x);
  EXPECT_THROW(t.backward(y), std::logic_error);
  EXPECT_THROW(t.parameter_gradient(), std::logic_error);
}

TEST(GradTape, ReplayReproducesRecordingBitForBit) {
  Rng rng(5);
  GradTape t;
  const Var x = t.constant(random_mat(rng, 6, 5));
  const Var w = t.parameter(random_mat(rng, 4, 5));
  const Var b = t.parameter(random_mat(rng, 1, 4));
  const Var h = t.relu(t.affine(x, w, b));
  const Var loss = t.squared_error(h, random_mat(rng, 6, 4), 0.5);
  const Mat recorded = t.value(h);
  const double recorded_loss = t.scalar(loss);
  t.replay();
  EXPECT_EQ(t.value(h), recorded);
  EXPECT_EQ(t.scalar(loss), recorded_loss);
}

TEST(GradTape, EveryParameterGetsOneSlot) {
  Rng rng(6);
  GradTape t;
  const Var x = t.constant(random_mat(rng, 3, 2));
  const Var w = t.parameter(random_mat(rng, 2, 2), "w");
  const Var b = t.parameter(random_mat(rng, 1, 2), "b");
  // w is used twice; its gradient must accumulate into a single slot
  const Var h = t.affine(t.affine(x, w, b), w, b);
  const Var loss = t.sum(t.mul(h, h));
  t.backward(loss);
  EXPECT_EQ(t.parameters().size(), 2u);
  EXPECT_EQ(t.parameter_gradient().size(), 6u);
}

// Reverse mode vs central differences (step 1e-4) on random for_subcarriers nets (widths <= 32).
TEST(GradTape, MlpGradientMatchesFiniteDifferences) {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t nf = 1 + trial % 8;  // hidden widths 4..32
    stage1::MlpModel model;
    Mat inputs, labels;
    do {  // a 1e-4 step moves pre-activations by well under 1e-3
      model = stage1::MlpModel::for_subcarriers(nf);
      model.glorot_init(rng);
      for (auto& b : model.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 0.1 * rng.normal();
      inputs = random_mat(rng, 4, Eigen::Index(2 * nf));
      labels = random_mat(rng, 4, Eigen::Index(2 * nf));
    } while (fd_cases::kink_margin(model, inputs) < 1e-3);

    stage1::MlpGraph g(model, inputs, labels);
    g.tape.backward(g.loss);
    const RealVec analytic = g.tape.parameter_gradient();
    const double loss = g.tape.scalar(g.loss);

    RealVec flat;
    for (Var p : g.tape.parameters()) {
      const Mat& v = g.tape.value(p);
      flat.insert(flat.end(), v.data(), v.data() + v.size());
    }
    auto loss_at = [&](const RealVec& theta) {
      std::size_t off = 0;
      for (Var p : g.tape.parameters()) {
        Mat& v = g.tape.mutable_value(p);
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = theta[off++];
      }
      g.tape.replay();
      return g.tape.scalar(g.loss);
    };
    const RealVec numeric = finite_diff_grad(loss_at, flat, 1e-4);
    EXPECT_LT(oracle::max_rel_err(analytic, numeric, oracle::fd_floor(loss)), 1e-4) << "trial " << trial;
  }
}

TEST(FiniteDiff, QuadraticAndConstant) {
  const RealVec g = finite_diff_grad([](const RealVec& p) { return p[0] * p[0] + 3 * p[1]; }, {2.0, -1.0}, 1e-4);
  EXPECT_NEAR(g[0], 4.0, 1e-8);
  EXPECT_NEAR(g[1], 3.0, 1e-8);
  const RealVec z = finite_diff_grad([](const RealVec&) { return 7.0; }, {1.0, 2.0, 3.0}, 1e-4);
  for (double v : z) EXPECT_EQ(v, 0.0);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  AdamState opt;
  Mat p = Mat::Constant(2, 2, 0.7);
  const Mat g = Mat::Zero(2, 2);
  const Mat before = p;
  const ParamRef block{"p", p, g};
  opt.step({&block, 1});
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.step_count(), 1);
}

TEST(Adam, DescendsScalarQuadratic) {
  AdamState opt(AdamConfig{.learning_rate = 0.1});
  Mat theta = Mat::Constant(1, 1, 1.0);
  Mat grad(1, 1);
  int steps = 0;
  while (std::abs(theta(0, 0)) >= 1e-3 && steps < 200) {
    grad(0, 0) = 2 * theta(0, 0);
    const ParamRef block{"theta", theta, grad};
    opt.step({&block, 1});
    ++steps;
  }
  EXPECT_LT(std::abs(theta(0, 0)), 1e-3);
  EXPECT_LE(steps, 200);
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    Rng rng(77);
    AdamState opt;
    Mat p = random_mat(rng, 3, 3);
    for (int i = 0; i < 50; ++i) {
      const Mat g = random_mat(rng, 3, 3);
      const ParamRef block{"p", p, g};
      opt.step({&block, 1});
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, NonFiniteGradientNamesBlock) {
  AdamState opt;
  Mat p = Mat::Zero(1, 2);
  Mat g(1, 2);
  g << 1.0, std::nan("");
  const ParamRef block{"weight2", p, g};
  try {
    opt.step({&block, 1});
    FAIL() << "expected NonFiniteGradient";
  } catch (const NonFiniteGradient& e) {
    EXPECT_NE(std::string(e.what()).find("weight2"), std::string::npos);
  }
}
