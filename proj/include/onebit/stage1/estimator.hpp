#pragma once

#include <cmath>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "onebit/numerics/adam.hpp"
#include "onebit/numerics/rng.hpp"
#include "onebit/numerics/tape.hpp"
#include "onebit/sim/link.hpp"
#include "onebit/stage1/labels.hpp"
#include "onebit/stage1/mlp.hpp"

namespace onebit::stage1 {

enum class LabelScaling {
  none,      // labels used exactly as diag(F r x^H)
  bussgang,  // labels divided by the nominal Bussgang gain of the converter
};

struct Stage1Params {
  std::size_t epochs = 500;
  double learning_rate = 1e-3;
  std::size_t generated_samples = 64;  // N_g
  std::uint64_t seed = 7;
  LabelScaling label_scaling = LabelScaling::bussgang;
  std::size_t threads = 1;
};

struct TrainedNet {
  MlpModel model;
  std::vector<double> loss_trace;  // loss before each update, one entry per epoch
};

/// Records the per-antenna network on a tape for a full batch of inputs.
struct MlpGraph {
  GradTape tape;
  std::array<Var, 3> weights;
  std::array<Var, 3> biases;
  Var output;
  Var loss;

  MlpGraph(const MlpModel& init, const Mat& inputs, const Mat& labels) {
    for (std::size_t i = 0; i < 3; ++i) {
      weights[i] = tape.parameter(init.weights[i], "weight" + std::to_string(i + 1));
      biases[i] = tape.parameter(init.biases[i], "bias" + std::to_string(i + 1));
    }
    Var h = tape.constant(inputs);
    for (std::size_t i = 0; i < 3; ++i) {
      h = tape.affine(h, weights[i], biases[i]);
      if (i < 2) h = tape.relu(h);
    }
    output = h;
    loss = tape.squared_error(output, labels, 1.0 / static_cast<double>(inputs.rows()));
  }

  MlpModel model() const {
    MlpModel m;
    for (std::size_t i = 0; i < 3; ++i) {
      m.weights[i] = tape.value(weights[i]);
      m.biases[i] = tape.value(biases[i]);
    }
    return m;
  }
};

/// Full-batch training of the mean per-pair squared error with Adam.
inline TrainedNet train_antenna_net(const TrainingSet& ts, const Stage1Params& hp, Rng& rng) {
  if (ts.size() == 0) throw std::invalid_argument("train_antenna_net: empty training set");
  const auto nf = static_cast<std::size_t>(ts.inputs.cols()) / 2;
  MlpModel init = MlpModel::for_subcarriers(nf);
  init.glorot_init(rng);

  MlpGraph g(init, ts.inputs, ts.labels);
  AdamState opt(AdamConfig{.learning_rate = hp.learning_rate});
  TrainedNet out;
  out.loss_trace.reserve(hp.epochs);
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    if (epoch > 0) g.tape.replay();
    const double loss = g.tape.scalar(g.loss);
    if (!std::isfinite(loss)) throw TrainingDiverged("stage-1 training loss is not finite", epoch);
    out.loss_trace.push_back(loss);
    g.tape.backward(g.loss);
    std::vector<ParamRef> blocks;
    for (std::size_t i = 0; i < 3; ++i) {
      blocks.push_back({g.tape.name(g.weights[i]), g.tape.mutable_value(g.weights[i]), g.tape.grad(g.weights[i])});
      blocks.push_back({g.tape.name(g.biases[i]), g.tape.mutable_value(g.biases[i]), g.tape.grad(g.biases[i])});
    }
    opt.step(blocks);
  }
  out.model = g.model();
  return out;
}

/// Average of N_g network outputs for i.i.d. QPSK inputs drawn in the receiver.
inline CVec generate_estimate(const MlpModel& model, std::size_t n_generated, Rng& rng) {
  if (n_generated == 0) throw std::invalid_argument("generate_estimate: N_g must be at least 1");
  const std::size_t nf = model.input_size() / 2;
  Mat inputs(static_cast<Eigen::Index>(n_generated), static_cast<Eigen::Index>(2 * nf));
  for (std::size_t i = 0; i < n_generated; ++i) {
    CVec x(nf);
    for (auto& s : x) s = rng.qpsk();
    set_row(inputs, static_cast<Eigen::Index>(i), to_real(x));
  }
  const Mat out = mlp_forward_batch(model, inputs);
  const Mat mean = out.colwise().mean();
  return from_real(RealVec(mean.data(), mean.data() + mean.size()));
}

struct Stage1Estimate {
  std::size_t user = 0;
  CMatrix lambda_hat;                          // N_f x M
  std::vector<std::vector<double>> loss_traces;  // per antenna
};

inline double label_gain(const sim::SystemConfig& cfg, const Stage1Params& hp) {
  return hp.label_scaling == LabelScaling::bussgang ? sim::nominal_bussgang_gain(cfg) : 1.0;
}

/// Network for antenna m of user k uses generator stream derive_seed(hp.seed, {k, m}).
inline std::pair<CVec, std::vector<double>> estimate_antenna(std::span<const sim::QuantizedRxBlock> blocks,
                                                             const sim::PilotBook& book, std::size_t k, std::size_t m,
                                                             const sim::SystemConfig& cfg, const Stage1Params& hp) {
  const DftPlan plan(cfg.subcarriers);
  const TrainingSet ts = build_training_set(blocks, book, k, m, plan, label_gain(cfg, hp));
  Rng rng(derive_seed(hp.seed, {k, m}));
  TrainedNet net = train_antenna_net(ts, hp, rng);
  return {generate_estimate(net.model, hp.generated_samples, rng), std::move(net.loss_trace)};
}

/// Trains one independent network per antenna column and stacks their estimates.
inline Stage1Estimate run_stage1(std::span<const sim::QuantizedRxBlock> blocks, const sim::PilotBook& book,
                                 std::size_t k, const sim::SystemConfig& cfg, const Stage1Params& hp) {
  Stage1Estimate est{k, CMatrix(cfg.subcarriers, cfg.antennas), std::vector<std::vector<double>>(cfg.antennas)};
  std::vector<CVec> columns(cfg.antennas);
  std::vector<std::exception_ptr> errors(cfg.antennas);

  auto work = [&](std::size_t m) {
    try {
      auto [col, trace] = estimate_antenna(blocks, book, k, m, cfg, hp);
      columns[m] = std::move(col);
      est.loss_traces[m] = std::move(trace);
    } catch (...) {
      errors[m] = std::current_exception();
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(hp.threads, cfg.antennas));
  if (threads == 1) {
    for (std::size_t m = 0; m < cfg.antennas; ++m) work(m);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t m = t; m < cfg.antennas; m += threads) work(m);
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (std::size_t m = 0; m < cfg.antennas; ++m) est.lambda_hat.set_column(m, columns[m]);
  return est;
}

}  // namespace onebit::stage1
