#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "onebit/bench/nmse.hpp"
#include "onebit/numerics/finite_diff.hpp"
#include "onebit/sim/channel.hpp"
#include "onebit/stage2/dip.hpp"
#include "onebit/stage2/layers.hpp"
#include "support/fd_cases.hpp"
#include "support/oracles.hpp"

using namespace onebit;
using namespace onebit::stage2;
using fd_cases::flatten_parameters;
using fd_cases::fd_well_conditioned;
using fd_cases::loss_at_parameters;
using fd_cases::oracle_forward;
using fd_cases::perturbed_model;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

DipConfig tiny_config() {
  DipConfig cfg;
  cfg.layers = 2;
  cfg.widths = {3, 3, 2};
  cfg.subcarriers = 4;
  cfg.time_symbols = 4;
  cfg.antennas = 1;
  return cfg;
}

DipConfig small_config(std::size_t antennas = 2) {
  DipConfig cfg;
  cfg.layers = 3;
  cfg.widths = {8, 8, 8, 2 * antennas};
  cfg.subcarriers = 32;
  cfg.time_symbols = 4;
  cfg.antennas = antennas;
  return cfg;
}

ChannelTensor smooth_target(Rng& rng, const DipConfig& cfg) {
  // three leading taps keep the frequency response smooth
  std::vector<std::vector<CVec>> taps(1, std::vector<CVec>(cfg.antennas, CVec(cfg.subcarriers)));
  for (auto& h : taps[0])
    for (std::size_t l = 0; l < 3; ++l) h[l] = rng.complex_normal(1.0 / 3.0);
  const auto ch = sim::realize_channel(std::move(taps), cfg.subcarriers);
  return build_tensor(ch.lambda[0], cfg.time_symbols);
}

}  // namespace

TEST(Tensor, BuildReplicatesAlongTime) {
  CMatrix lam(2, 3);
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t m = 0; m < 3; ++m) lam(f, m) = cplx(double(f), double(m));
  const ChannelTensor t = build_tensor(lam, 4);
  EXPECT_EQ(t.grid.time(), 4u);
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(t.grid(f, n, m), lam(f, m));
  EXPECT_EQ(extract_estimate(t), lam);
  EXPECT_EQ(extract_estimate(build_tensor(lam, 1)), lam);
  EXPECT_NEAR(pack_real(t.grid).data.squaredNorm(), 4 * lam.frobenius_sq(), 1e-12);
  EXPECT_THROW(build_tensor(lam, 0), std::invalid_argument);
}

TEST(Tensor, ExtractTakesFirstTimeSlice) {
  ChannelTensor t{ComplexGrid(2, 3, 1), ChannelTensor::Source::network};
  t.grid(1, 0, 0) = {1, 1};
  t.grid(1, 2, 0) = {9, 9};
  EXPECT_EQ(extract_estimate(t)(1, 0), cplx(1, 1));
}

TEST(Tensor, PackUnpackRoundTrip) {
  Rng rng(1);
  ComplexGrid g(4, 2, 3);
  for (std::size_t f = 0; f < 4; ++f)
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t m = 0; m < 3; ++m) g(f, t, m) = rng.complex_normal(1.0);
  const RealGrid r = pack_real(g);
  EXPECT_EQ(r.channels(), 6u);
  EXPECT_EQ(r(3, 1, 4), g(3, 1, 1).imag());
  const ComplexGrid back = unpack_complex(r, 3);
  for (std::size_t f = 0; f < 4; ++f)
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(back(f, t, m), g(f, t, m));
}

TEST(Upsample, ConstantStaysConstant) {
  RealGrid g(3, 5, 2);
  g.data.col(0).setConstant(2.5);
  g.data.col(1).setConstant(-1.0);
  const RealGrid u = upsample_2x_bilinear(g);
  EXPECT_EQ(u.freq, 6u);
  EXPECT_EQ(u.time, 10u);
  EXPECT_NEAR((u.data.col(0).array() - 2.5).abs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR((u.data.col(1).array() + 1.0).abs().maxCoeff(), 0.0, 1e-15);
}

TEST(Upsample, SinglePixelReplicates) {
  RealGrid g(1, 1, 1);
  g(0, 0, 0) = 4.0;
  const RealGrid u = upsample_2x_bilinear(g);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(u.data(i, 0), 4.0);
}

TEST(Upsample, RampHalfPixelValues) {
  RealGrid g(1, 2, 1);
  g(0, 0, 0) = 0.0;
  g(0, 1, 0) = 1.0;
  const RealGrid u = upsample_2x_bilinear(g);
  const double want[4] = {0.0, 0.25, 0.75, 1.0};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(u(r, t, 0), want[t], 1e-15);
}

TEST(Upsample, MatchesSeparableOracle) {
  Rng rng(2);
  for (auto [f, t] : {std::pair{4u, 4u}, {3u, 5u}, {8u, 2u}}) {
    RealGrid g(f, t, random_mat(rng, long(f * t), 3));
    const RealGrid u = upsample_2x_bilinear(g);
    EXPECT_LT((u.data - oracle::upsample(g.data, f, t)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Conv1x1, IdentityAndOracle) {
  Rng rng(3);
  RealGrid g(2, 3, random_mat(rng, 6, 4));
  EXPECT_EQ(conv_1x1(g, Mat::Identity(4, 4), Mat::Zero(1, 4)).data, g.data);
  const Mat k = random_mat(rng, 5, 4), b = random_mat(rng, 1, 5);
  EXPECT_LT((conv_1x1(g, k, b).data - oracle::conv1x1(g.data, k, b)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(conv_1x1(g, Mat::Zero(5, 3), b), DimensionError);
}

TEST(BatchNorm, NormalizesEachChannel) {
  Rng rng(4);
  RealGrid g(4, 4, random_mat(rng, 16, 3, 5.0));
  const RealGrid out = batch_norm(g, Mat::Ones(1, 3), Mat::Zero(1, 3));
  for (Eigen::Index c = 0; c < 3; ++c) {
    EXPECT_NEAR(out.data.col(c).mean(), 0.0, 1e-12);
    EXPECT_NEAR(out.data.col(c).array().square().mean(), 1.0, 1e-5);
  }
  const Mat s = random_mat(rng, 1, 3), h = random_mat(rng, 1, 3);
  EXPECT_LT((batch_norm(g, s, h).data - oracle::batch_norm(g.data, s, h)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BatchNorm, ConstantChannelMapsToShift) {
  RealGrid g(2, 2, 1);
  g.data.setConstant(3.0);
  const RealGrid out = batch_norm(g, Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 0.5));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(out.data(i, 0), 0.5);
}

TEST(BatchNorm, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  GradTape tape;
  const Var x = tape.parameter(random_mat(rng, 8, 3), "x");
  const Var s = tape.parameter(random_mat(rng, 1, 3), "scale");
  const Var h = tape.parameter(random_mat(rng, 1, 3), "shift");
  const Var loss = tape.squared_error(tape.batch_norm(x, s, h), random_mat(rng, 8, 3));
  tape.backward(loss);
  const RealVec analytic = tape.parameter_gradient();
  const double floor = oracle::fd_floor(tape.scalar(loss));
  const RealVec numeric =
      finite_diff_grad([&](const RealVec& th) { return loss_at_parameters(tape, loss, th); }, flatten_parameters(tape),
                       1e-5);
  EXPECT_LT(oracle::max_rel_err(analytic, numeric, floor), 1e-4);
}

TEST(Dip, GradientMatchesFiniteDifferences) {
  const DipConfig cfg = tiny_config();
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    DipModel m = perturbed_model(cfg, rng);
    while (!fd_well_conditioned(m, cfg)) m = perturbed_model(cfg, rng);
    DipGraph g(m, cfg, random_mat(rng, 16, 2));
    g.tape.backward(g.loss);
    const RealVec analytic = g.tape.parameter_gradient();
    const double floor = oracle::fd_floor(g.tape.scalar(g.loss));  // biases feeding batch norm have zero gradient
    const RealVec numeric = finite_diff_grad(
        [&](const RealVec& th) { return loss_at_parameters(g.tape, g.loss, th); }, flatten_parameters(g.tape), 1e-5);
    EXPECT_LT(oracle::max_rel_err(analytic, numeric, floor), 1e-4) << "trial " << trial;
  }
}

TEST(Dip, ZeroOutputKernelGivesBiasOnly) {
  const DipConfig cfg = small_config();
  Rng rng(7);
  DipModel m = init_dip(cfg, rng);
  m.kernels.back().setZero();
  const ChannelTensor out = dip_forward(m, cfg);
  EXPECT_EQ(out.source, ChannelTensor::Source::network);
  EXPECT_EQ(pack_real(out.grid).data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dip, OutputDimensions) {
  DipConfig cfg;
  cfg.layers = 3;
  cfg.subcarriers = 16;
  cfg.time_symbols = 16;
  cfg.antennas = 4;
  cfg.widths = {8, 8, 8, 8};
  Rng rng(8);
  const DipModel m = init_dip(cfg, rng);
  EXPECT_EQ(m.z0.freq, 4u);
  EXPECT_EQ(m.z0.time, 4u);
  const ChannelTensor out = dip_forward(m, cfg);
  EXPECT_EQ(out.grid.freq(), 16u);
  EXPECT_EQ(out.grid.time(), 16u);
  EXPECT_EQ(out.grid.space(), 4u);
}

TEST(Dip, ConfigValidation) {
  DipConfig cfg = small_config();
  cfg.widths.back() = 3;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.subcarriers = 34;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.widths.pop_back();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Dip, ForwardMatchesComposedOracle) {
  Rng rng(9);
  for (const DipConfig& cfg : {tiny_config(), small_config()}) {
    const DipModel m = perturbed_model(cfg, rng);
    const Mat got = pack_real(dip_forward(m, cfg).grid).data;
    EXPECT_LT((got - oracle_forward(m, cfg)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Dip, TapeForwardMatchesLayerForward) {
  const DipConfig cfg = small_config();
  Rng rng(10);
  const DipModel m = perturbed_model(cfg, rng);
  DipGraph g(m, cfg, Mat::Zero(long(cfg.subcarriers * cfg.time_symbols), long(2 * cfg.antennas)));
  EXPECT_LT((g.tape.value(g.output) - pack_real(dip_forward(m, cfg).grid).data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DipFit, ZeroTargetConverges) {
  DipConfig cfg = small_config();
  cfg.iterations = 3000;
  Rng rng(11);
  const DipModel init = init_dip(cfg, rng);
  const ChannelTensor target{ComplexGrid(32, 4, 2), ChannelTensor::Source::target};
  const DipFit fit = dip_fit(init, target, cfg);
  const double final_loss = pack_real(fit.output.grid).data.squaredNorm();
  EXPECT_LT(final_loss, 1e-6);
}

TEST(DipFit, FitsRankOneTarget) {
  DipConfig cfg = small_config();
  cfg.iterations = 2000;
  Rng rng(12);
  ChannelTensor target{ComplexGrid(32, 4, 2), ChannelTensor::Source::target};
  const cplx b[2] = {{1.0, -0.5}, {-0.3, 0.8}};
  for (std::size_t f = 0; f < 32; ++f)
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t m = 0; m < 2; ++m) target.grid(f, t, m) = std::cos(0.2 * double(f)) * b[m];
  const DipModel init = init_dip(cfg, rng);
  const DipFit fit = dip_fit(init, target, cfg);
  const Mat t = pack_real(target.grid).data;
  const double rel = (pack_real(fit.output.grid).data - t).squaredNorm() / t.squaredNorm();
  EXPECT_LT(rel, 1e-2);
}

TEST(DipFit, SmoothedLossNonIncreasingAndSeedFixed) {
  DipConfig cfg = small_config();
  cfg.iterations = 400;
  Rng rng(13);
  const ChannelTensor target = smooth_target(rng, cfg);
  const DipModel init = init_dip(cfg, rng);
  const DipFit fit = dip_fit(init, target, cfg);
  std::vector<double> means;
  for (std::size_t i = 0; i + 50 <= fit.loss_trace.size(); i += 50)
    means.push_back(std::accumulate(fit.loss_trace.begin() + long(i), fit.loss_trace.begin() + long(i + 50), 0.0) /
                    50.0);
  for (std::size_t i = 1; i < means.size(); ++i) EXPECT_LE(means[i], 1.1 * means[i - 1]) << "window " << i;
  EXPECT_EQ(fit.model.z0.data, init.z0.data);
  EXPECT_NE(fit.model.kernels[0], init.kernels[0]);
}

TEST(DipFit, Deterministic) {
  DipConfig cfg = small_config();
  cfg.iterations = 50;
  Rng rng(14);
  const ChannelTensor target = smooth_target(rng, cfg);
  cfg.seed = 99;
  std::vector<double> la, lb;
  const CMatrix a = denoise(extract_estimate(target), cfg, &la);
  const CMatrix b = denoise(extract_estimate(target), cfg, &lb);
  EXPECT_EQ(a, b);
  EXPECT_EQ(la, lb);
  EXPECT_EQ(la.size(), 50u);
}

TEST(DipFit, DimensionMismatchRejected) {
  const DipConfig cfg = small_config();
  Rng rng(15);
  const DipModel init = init_dip(cfg, rng);
  const ChannelTensor wrong{ComplexGrid(16, 4, 2), ChannelTensor::Source::target};
  EXPECT_THROW(dip_fit(init, wrong, cfg), DimensionError);
}

TEST(DipFit, DenoisesSmoothChannels) {
  // noisy smooth frequency responses at 10 dB; the early-stopped fit should land closer to the clean one
  DipConfig cfg = small_config();
  int improved = 0;
  const int trials = 25;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(derive_seed(16, {std::uint64_t(trial)}));
    const ChannelTensor clean = smooth_target(rng, cfg);
    const CMatrix truth = extract_estimate(clean);
    CMatrix noisy = truth;
    const double power = truth.frobenius_sq() / double(truth.rows() * truth.cols());
    for (auto& z : noisy.data()) z += rng.complex_normal(0.1 * power);
    cfg.seed = derive_seed(17, {std::uint64_t(trial)});
    const CMatrix den = denoise(noisy, cfg);
    if (bench::nmse_linear(den, truth) < bench::nmse_linear(noisy, truth)) ++improved;
  }
  EXPECT_GE(improved, 20);
}
