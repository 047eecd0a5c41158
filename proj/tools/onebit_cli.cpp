// onebit: sweep / selftest / demo front end.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "onebit/bench/baselines.hpp"
#include "onebit/bench/experiment.hpp"
#include "onebit/bench/nmse.hpp"
#include "onebit/bench/report.hpp"
#include "onebit/bench/sweep.hpp"
#include "onebit/numerics/dft.hpp"
#include "onebit/numerics/finite_diff.hpp"
#include "onebit/sim/channel.hpp"
#include "onebit/sim/link.hpp"
#include "onebit/sim/pilots.hpp"
#include "onebit/stage1/estimator.hpp"
#include "onebit/stage1/labels.hpp"
#include "onebit/stage1/mlp.hpp"
#include "onebit/stage2/dip.hpp"

using namespace onebit;

namespace {

constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct CommonOpts {
  std::string config;
  std::string methods;
  std::string snr;
  std::uint64_t seed = 0;
  bool reduced = false;
};

bench::ExperimentConfig resolve_config(const CommonOpts& o, const CLI::App& sub) {
  bench::ExperimentConfig cfg;
  if (!o.config.empty()) {
    try {
      cfg = bench::load_experiment_config(o.config);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  if (o.reduced) cfg = bench::reduced_profile(cfg);
  if (sub.count("--seed")) cfg.seed = o.seed;
  if (!o.methods.empty()) {
    cfg.methods.clear();
    try {
      for (const auto& m : split_commas(o.methods)) cfg.methods.push_back(bench::parse_method(m));
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  if (!o.snr.empty()) {
    cfg.snr_db.clear();
    for (const auto& s : split_commas(o.snr)) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != s.size()) throw UsageError("bad SNR value '" + s + "'");
      cfg.snr_db.push_back(v);
    }
  }
  cfg.sync();
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

int cmd_sweep(const CommonOpts& o, const CLI::App& sub, std::string out) {
  bench::ExperimentConfig cfg = resolve_config(o, sub);
  if (out.empty()) out = cfg.output;
  const bench::NmseReport report = run_sweep(cfg, [](const std::string& msg) { std::cerr << msg << "\n"; });
  bench::write_report(report, out);
  std::cerr << "wrote " << report.rows.size() << " rows to " << out << "\n";
  return 0;
}

int cmd_demo(const CommonOpts& o, const CLI::App& sub, double snr, const std::string& trace_path) {
  bench::ExperimentConfig cfg = resolve_config(o, sub);
  sim::SystemConfig sys = cfg.system;
  sys.snr_db = snr;
  Rng chan_rng(derive_seed(cfg.seed, {1, 0}));
  const auto ch = sim::sample_channel(sys, chan_rng);
  const auto book = sim::build_pilot_book(sys, chan_rng);
  Rng noise_rng(derive_seed(cfg.seed, {2, 0, 0}));
  const auto slots = sim::transmit_block(ch, book, sys, noise_rng);
  const auto blocks = sim::receive(slots, sys);

  stage1::Stage1Params hp = cfg.stage1;
  hp.seed = derive_seed(cfg.seed, {3, 0, 0});
  stage2::DipConfig dc = cfg.dip;
  dc.seed = derive_seed(cfg.seed, {4, 0, 0, 0});
  const CMatrix& truth = ch.lambda[0];
  const CMatrix s1 = stage1::run_stage1(blocks, book, 0, sys, hp).lambda_hat;
  std::vector<double> trace;
  const CMatrix pipe = stage2::denoise(s1, dc, &trace);
  if (!trace_path.empty()) {
    std::ofstream f(trace_path);
    f << "iteration,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) f << i << ',' << bench::fixed6(trace[i]) << '\n';
    if (!f) throw std::runtime_error("cannot write loss trace '" + trace_path + "'");
  }
  const CMatrix bls = bench::bussgang_ls_baseline(blocks, book, 0, snr);
  const CMatrix uls = bench::ls_unquantized_baseline(slots, book, 0);

  std::printf("user 0, SNR %.1f dB, K=%zu M=%zu N_f=%zu N_t=%zu\n", snr, sys.users, sys.antennas, sys.subcarriers,
              sys.pilots);
  std::printf("%-14s NMSE %9.3f dB\n", "stage1", bench::nmse_db(s1, truth));
  std::printf("%-14s NMSE %9.3f dB\n", "pipeline", bench::nmse_db(pipe, truth));
  std::printf("%-14s NMSE %9.3f dB\n", "bussgang-ls", bench::nmse_db(bls, truth));
  std::printf("%-14s NMSE %9.3f dB\n", "ls-unquantized", bench::nmse_db(uls, truth));
  return 0;
}

// Quick invariants; the full suites live in the test binaries.
int cmd_selftest() {
  int failed = 0;
  auto check = [&](const char* name, const std::function<bool()>& fn) {
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      std::cerr << name << ": " << e.what() << "\n";
    }
    std::printf("%-24s %s\n", name, ok ? "ok" : "FAILED");
    failed += !ok;
  };

  check("quantizer", [] {
    Rng rng(1);
    const double a = std::numbers::sqrt2 / 2;
    for (int i = 0; i < 1000; ++i) {
      CVec y(4);
      for (auto& v : y) v = rng.complex_normal(1.0);
      const double alpha = std::exp(rng.normal());
      CVec scaled = y;
      for (auto& v : scaled) v *= alpha;
      const CVec q = sim::one_bit_quantize(y);
      if (q != sim::one_bit_quantize(scaled) || q != sim::one_bit_quantize(q)) return false;
      for (const auto& v : q)
        if (std::abs(v.real()) != a || std::abs(v.imag()) != a) return false;
    }
    return true;
  });

  check("dft unitarity", [] {
    Rng rng(2);
    for (std::size_t n : {1u, 8u, 64u}) {
      const DftPlan plan(n);
      CVec x(n);
      for (auto& v : x) v = rng.complex_normal(1.0);
      const CVec X = plan.forward(x), back = plan.inverse(X);
      double ex = 0, eX = 0, err = 0;
      for (std::size_t i = 0; i < n; ++i) ex += std::norm(x[i]), eX += std::norm(X[i]), err += std::norm(back[i] - x[i]);
      if (std::abs(ex - eX) > 1e-10 * ex || err > 1e-20 * ex) return false;
    }
    return true;
  });

  check("parameter count", [] {
    for (std::size_t nf : {16u, 32u, 64u})
      if (stage1::MlpModel::for_subcarriers(nf).weight_count() != 32 * nf * nf) return false;
    return true;
  });

  check("label oracle", [] {
    sim::SystemConfig cfg;
    cfg.users = 1;
    cfg.antennas = 1;
    cfg.subcarriers = 16;
    cfg.pilots = 1;
    cfg.symbols = 1;
    cfg.noise = false;
    cfg.quantize = false;
    cfg.taps = {{0, 0.5}, {3, 0.5}};
    const DftPlan plan(16);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      const auto ch = sim::sample_channel(cfg, rng);
      const auto book = sim::build_pilot_book(cfg, rng);
      const auto blocks = sim::receive(sim::transmit_block(ch, book, cfg, rng), cfg);
      const CVec label = stage1::make_label(plan, blocks[0].R.column(0), book.pilot(0, 0));
      const CVec want = sim::freq_response(ch, 0, 0);
      for (std::size_t n = 0; n < 16; ++n)
        if (std::abs(label[n] - want[n]) > 1e-9) return false;
    }
    return true;
  });

  check("mlp gradient", [] {
    Rng rng(4);
    stage1::MlpModel model = stage1::MlpModel::for_subcarriers(2);
    model.glorot_init(rng);
    Mat x(3, 4), y(3, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(), y.data()[i] = rng.normal();
    stage1::MlpGraph g(model, x, y);
    g.tape.backward(g.loss);
    const RealVec analytic = g.tape.parameter_gradient();
    RealVec flat;
    for (Var p : g.tape.parameters()) flat.insert(flat.end(), g.tape.value(p).data(), g.tape.value(p).data() + g.tape.value(p).size());
    const RealVec numeric = finite_diff_grad(
        [&](const RealVec& th) {
          std::size_t off = 0;
          for (Var p : g.tape.parameters()) {
            Mat& v = g.tape.mutable_value(p);
            for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = th[off++];
          }
          g.tape.replay();
          return g.tape.scalar(g.loss);
        },
        flat, 1e-5);
    double worst = 0;
    for (std::size_t i = 0; i < flat.size(); ++i)
      worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6}));
    return worst < 1e-4;
  });

  check("dip forward shape", [] {
    stage2::DipConfig cfg;
    cfg.layers = 2;
    cfg.widths = {4, 4, 2};
    cfg.subcarriers = 8;
    cfg.time_symbols = 4;
    cfg.antennas = 1;
    Rng rng(5);
    const auto t = stage2::dip_forward(stage2::init_dip(cfg, rng), cfg);
    return t.grid.freq() == 8 && t.grid.time() == 4 && t.grid.space() == 1;
  });

  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-bit massive MIMO channel estimation bench"};
  app.require_subcommand(1);

  CommonOpts sweep_opts, demo_opts;
  std::string out;
  double demo_snr = 5.0;
  std::string trace_path;

  auto add_common = [](CLI::App* sub, CommonOpts& o) {
    sub->add_option("--config", o.config, "JSON experiment config (defaults when omitted)");
    sub->add_option("--seed", o.seed, "master seed, overrides the file");
    sub->add_option("--methods", o.methods, "comma list: pipeline,stage1-only,ls-unquantized,bussgang-ls");
    sub->add_flag("--reduced", o.reduced, "apply the reduced desk-scale profile");
  };

  CLI::App* sweep = app.add_subcommand("sweep", "run the NMSE-vs-SNR sweep and write a CSV");
  add_common(sweep, sweep_opts);
  sweep->add_option("--snr", sweep_opts.snr, "comma list of SNR points in dB");
  sweep->add_option("--out", out, "CSV path (default: the config's output)");

  CLI::App* selftest = app.add_subcommand("selftest", "quick invariant checks");

  CLI::App* demo = app.add_subcommand("demo", "one realization at one SNR, per-stage NMSE");
  add_common(demo, demo_opts);
  demo->add_option("--snr", demo_snr, "SNR in dB");
  demo->add_option("--loss-trace", trace_path, "write the DIP fit loss per iteration as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*sweep) return cmd_sweep(sweep_opts, *sweep, out);
    if (*selftest) return cmd_selftest();
    if (*demo) return cmd_demo(demo_opts, *demo, demo_snr, trace_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}
