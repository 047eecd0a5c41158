#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "onebit/numerics/adam.hpp"
#include "onebit/numerics/rng.hpp"
#include "onebit/numerics/tape.hpp"
#include "onebit/stage1/estimator.hpp"
#include "onebit/stage2/layers.hpp"

namespace onebit::stage2 {

/// Geometry and fit schedule of the generator.
///
/// Layers 0..l-1 are hidden, layer l is the output conv. widths has l + 1 entries:
/// widths[0] is also the channel count of Z0, hidden layer i outputs widths[i], and
/// widths[l] = 2M carries Re/Im of every antenna. Hidden layers 0..l-2 upsample, so the
/// seed grid is (N_f / 2^(l-1)) x (N / 2^(l-1)).
struct DipConfig {
  std::size_t layers = 4;
  std::vector<std::size_t> widths = {8, 8, 8, 8, 32};
  std::size_t subcarriers = 64;  // N_f
  std::size_t time_symbols = 8;  // N, time length of the fitted grid
  std::size_t antennas = 16;     // M
  std::size_t iterations = 200;
  double learning_rate = 0.01;
  double input_scale = 0.1;  // Z0 ~ U[0, input_scale]
  std::uint64_t seed = 11;

  std::size_t upsampling_layers() const { return layers - 1; }
  std::size_t base_freq() const { return subcarriers >> upsampling_layers(); }
  std::size_t base_time() const { return time_symbols >> upsampling_layers(); }
  std::size_t input_width(std::size_t layer) const { return layer == 0 ? widths[0] : widths[layer - 1]; }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("DipConfig: " + m); };
    if (layers < 1) fail("need at least one hidden layer");
    if (widths.size() != layers + 1) fail("widths must have layers + 1 entries");
    for (auto w : widths)
      if (w < 1) fail("widths must be positive");
    if (widths[layers] != 2 * antennas) fail("output width must be 2 * antennas");
    const std::size_t scale = std::size_t{1} << upsampling_layers();
    if (subcarriers == 0 || subcarriers % scale != 0 || base_freq() * scale != subcarriers)
      fail("subcarriers must equal base_freq * 2^(layers-1)");
    if (time_symbols == 0 || time_symbols % scale != 0 || base_time() * scale != time_symbols)
      fail("time_symbols must equal base_time * 2^(layers-1)");
    if (iterations < 1) fail("iterations must be positive");
  }
};

/// Complex (N_f, N, M) tensor plus where it came from.
struct ChannelTensor {
  enum class Source { target, network };
  ComplexGrid grid;
  Source source = Source::target;
};

/// Fixed seed grid Z0 plus the trainable parameters Theta.
struct DipModel {
  RealGrid z0;
  std::vector<Mat> kernels;  // l + 1 kernels, (widths[i] x input_width(i))
  std::vector<Mat> biases;   // l + 1, (1 x widths[i])
  std::vector<Mat> bn_scale;  // l hidden layers, (1 x widths[i])
  std::vector<Mat> bn_shift;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* group : {&kernels, &biases, &bn_scale, &bn_shift})
      for (const auto& m : *group) n += static_cast<std::size_t>(m.size());
    return n;
  }
};

/// Z0 ~ U[0, input_scale]; kernels uniform in +-sqrt(6/(fan_in+fan_out)); biases 0; BN scale 1, shift 0.
inline DipModel init_dip(const DipConfig& cfg, Rng& rng) {
  cfg.validate();
  DipModel m;
  m.z0 = RealGrid(cfg.base_freq(), cfg.base_time(), cfg.widths[0]);
  for (Eigen::Index i = 0; i < m.z0.data.size(); ++i) m.z0.data.data()[i] = rng.uniform(0.0, cfg.input_scale);
  for (std::size_t i = 0; i <= cfg.layers; ++i) {
    const auto out = static_cast<Eigen::Index>(cfg.widths[i]);
    const auto in = static_cast<Eigen::Index>(cfg.input_width(i));
    Mat k(out, in);
    const double limit = std::sqrt(6.0 / static_cast<double>(out + in));
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) k(r, c) = rng.uniform(-limit, limit);
    m.kernels.push_back(std::move(k));
    m.biases.push_back(Mat::Zero(1, out));
    if (i < cfg.layers) {
      m.bn_scale.push_back(Mat::Ones(1, out));
      m.bn_shift.push_back(Mat::Zero(1, out));
    }
  }
  return m;
}

/// Channels [0, M) hold real parts and [M, 2M) imaginary parts.
inline ComplexGrid unpack_complex(const RealGrid& g, std::size_t antennas) {
  require_dims(g.channels() == 2 * antennas, "unpack_complex: expected 2M channels");
  ComplexGrid out(g.freq, g.time, antennas);
  for (std::size_t f = 0; f < g.freq; ++f)
    for (std::size_t t = 0; t < g.time; ++t)
      for (std::size_t m = 0; m < antennas; ++m) out(f, t, m) = {g(f, t, m), g(f, t, m + antennas)};
  return out;
}

inline RealGrid pack_real(const ComplexGrid& g) {
  const std::size_t M = g.space();
  RealGrid out(g.freq(), g.time(), 2 * M);
  for (std::size_t f = 0; f < g.freq(); ++f)
    for (std::size_t t = 0; t < g.time(); ++t)
      for (std::size_t m = 0; m < M; ++m) {
        out(f, t, m) = g(f, t, m).real();
        out(f, t, m + M) = g(f, t, m).imag();
      }
  return out;
}

/// Replicates the N_f x M estimate along a time axis of length N.
inline ChannelTensor build_tensor(const CMatrix& lambda_hat, std::size_t time_symbols) {
  if (time_symbols < 1) throw std::invalid_argument("build_tensor: N must be at least 1");
  ChannelTensor out{ComplexGrid(lambda_hat.rows(), time_symbols, lambda_hat.cols()), ChannelTensor::Source::target};
  for (std::size_t f = 0; f < lambda_hat.rows(); ++f)
    for (std::size_t t = 0; t < time_symbols; ++t)
      for (std::size_t m = 0; m < lambda_hat.cols(); ++m) out.grid(f, t, m) = lambda_hat(f, m);
  return out;
}

inline ChannelTensor build_tensor(const stage1::Stage1Estimate& est, std::size_t time_symbols) {
  return build_tensor(est.lambda_hat, time_symbols);
}

/// The N_f x M slice at the first time index.
inline CMatrix extract_estimate(const ChannelTensor& t) {
  CMatrix out(t.grid.freq(), t.grid.space());
  for (std::size_t f = 0; f < t.grid.freq(); ++f)
    for (std::size_t m = 0; m < t.grid.space(); ++m) out(f, m) = t.grid(f, 0, m);
  return out;
}

inline void check_model(const DipModel& model, const DipConfig& cfg) {
  cfg.validate();
  require_dims(model.kernels.size() == cfg.layers + 1 && model.biases.size() == cfg.layers + 1 &&
                   model.bn_scale.size() == cfg.layers && model.bn_shift.size() == cfg.layers,
               "DipModel: layer count does not match config");
  require_dims(model.z0.freq == cfg.base_freq() && model.z0.time == cfg.base_time() &&
                   model.z0.channels() == cfg.widths[0],
               "DipModel: Z0 shape does not match config");
  for (std::size_t i = 0; i <= cfg.layers; ++i)
    require_dims(static_cast<std::size_t>(model.kernels[i].rows()) == cfg.widths[i] &&
                     static_cast<std::size_t>(model.kernels[i].cols()) == cfg.input_width(i),
                 "DipModel: kernel " + std::to_string(i) + " breaks the dimension chain");
}

/// Hidden layers 0..l-2: BN(ReLU(Up(conv(Z)))); layer l-1: BN(ReLU(conv(Z))); output: conv(Z).
inline ChannelTensor dip_forward(const DipModel& model, const DipConfig& cfg) {
  check_model(model, cfg);
  RealGrid z = model.z0;
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    z = conv_1x1(z, model.kernels[i], model.biases[i]);
    if (i + 1 < cfg.layers) z = upsample_2x_bilinear(z);
    z = batch_norm(relu(z), model.bn_scale[i], model.bn_shift[i]);
  }
  z = conv_1x1(z, model.kernels[cfg.layers], model.biases[cfg.layers]);
  return {unpack_complex(z, cfg.antennas), ChannelTensor::Source::network};
}

/// The generator recorded on a tape, with the squared l2 fit loss against a real target.
struct DipGraph {
  GradTape tape;
  std::vector<Var> kernels, biases, bn_scale, bn_shift;
  Var output;
  Var loss;

  DipGraph(const DipModel& model, const DipConfig& cfg, const Mat& target) {
    check_model(model, cfg);
    for (std::size_t i = 0; i <= cfg.layers; ++i) {
      kernels.push_back(tape.parameter(model.kernels[i], "kernel" + std::to_string(i)));
      biases.push_back(tape.parameter(model.biases[i], "bias" + std::to_string(i)));
      if (i < cfg.layers) {
        bn_scale.push_back(tape.parameter(model.bn_scale[i], "bn_scale" + std::to_string(i)));
        bn_shift.push_back(tape.parameter(model.bn_shift[i], "bn_shift" + std::to_string(i)));
      }
    }
    Var z = tape.constant(model.z0.data, GridShape{model.z0.freq, model.z0.time});
    for (std::size_t i = 0; i < cfg.layers; ++i) {
      z = tape.affine(z, kernels[i], biases[i]);
      if (i + 1 < cfg.layers) z = tape.upsample2x(z);
      z = tape.batch_norm(tape.relu(z), bn_scale[i], bn_shift[i]);
    }
    output = tape.affine(z, kernels[cfg.layers], biases[cfg.layers]);
    loss = tape.squared_error(output, target);
  }

  std::vector<ParamRef> blocks() {
    std::vector<ParamRef> out;
    for (const auto* group : {&kernels, &biases, &bn_scale, &bn_shift})
      for (Var v : *group) out.push_back({tape.name(v), tape.mutable_value(v), tape.grad(v)});
    return out;
  }

  DipModel model(const RealGrid& z0) const {
    DipModel m;
    m.z0 = z0;
    for (Var v : kernels) m.kernels.push_back(tape.value(v));
    for (Var v : biases) m.biases.push_back(tape.value(v));
    for (Var v : bn_scale) m.bn_scale.push_back(tape.value(v));
    for (Var v : bn_shift) m.bn_shift.push_back(tape.value(v));
    return m;
  }
};

struct DipFit {
  DipModel model;
  std::vector<double> loss_trace;  // loss before each update
  ChannelTensor output;            // network output after the last update
};

/// Minimizes ||target - f_Theta(Z0)||^2 over Theta for cfg.iterations Adam steps. Z0 is never written.
inline DipFit dip_fit(const DipModel& init, const ChannelTensor& target, const DipConfig& cfg) {
  require_dims(target.grid.freq() == cfg.subcarriers && target.grid.time() == cfg.time_symbols &&
                   target.grid.space() == cfg.antennas,
               "dip_fit: target dims do not match config");
  DipGraph g(init, cfg, pack_real(target.grid).data);
  AdamState opt(AdamConfig{.learning_rate = cfg.learning_rate});
  DipFit out;
  out.loss_trace.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    if (it > 0) g.tape.replay();
    const double loss = g.tape.scalar(g.loss);
    if (!std::isfinite(loss)) throw TrainingDiverged("DIP fit loss is not finite", it);
    out.loss_trace.push_back(loss);
    g.tape.backward(g.loss);
    opt.step(g.blocks());
  }
  out.model = g.model(init.z0);
  out.output = dip_forward(out.model, cfg);
  return out;
}

/// Stage 2 end to end: replicate, fit from a fresh seeded model, take the first time slice.
inline CMatrix denoise(const CMatrix& lambda_hat, const DipConfig& cfg, std::vector<double>* loss_trace = nullptr) {
  Rng rng(cfg.seed);
  const DipModel init = init_dip(cfg, rng);
  DipFit fit = dip_fit(init, build_tensor(lambda_hat, cfg.time_symbols), cfg);
  if (loss_trace) *loss_trace = std::move(fit.loss_trace);
  return extract_estimate(fit.output);
}

}  // namespace onebit::stage2
