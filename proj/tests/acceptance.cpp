// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include "oracles.hpp"
#include "test_util.hpp"

#include "cli.hpp"
#include "config.hpp"

#include "elmsim/analog.hpp"
#include "elmsim/budget.hpp"
#include "elmsim/decoder.hpp"
#include "elmsim/frontend.hpp"
#include "elmsim/rng.hpp"
#include "elmsim/spikeio.hpp"
#include "elmsim/training.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace elmsim;

namespace {

// Tolerances, fixed by the acceptance criteria.
constexpr double kTolPjPerMac = 0.01;
constexpr double kTolNjPerClassify = 0.01;
constexpr double kTolTotal = 0.02;
constexpr double kTolCombined = 0.02;
constexpr double kTolFullArray = 0.10;
constexpr double kTolRate = 1e-12;
constexpr long kWindowTicks = 1'000'000;
constexpr double kMeanVtBoundMv = 0.6;
constexpr double kMirrorStdLo = 0.5, kMirrorStdHi = 2.0;
constexpr double kJitterBound = 1e-3;
constexpr double kNormTol = 0.005;
constexpr double kT1Tol = 1e-8;
constexpr double kKktTol = 1e-6;
constexpr double kObjTol = 1e-6;
constexpr double kTrendL = 0.05;
constexpr double kT2Gap = 0.02;
constexpr double kT2Keep = 0.60;
constexpr double kEasyAcc = 0.90;
constexpr int kTrendSeeds = 5;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

// ---- 1 ----
Outcome budget_reproduction() {
  Outcome o;
  BudgetInputs in;  // D=40, L=60, C=12, 50 Hz, 360+54 nW, 11 pJ/MAC
  const EnergyFigures e = energy_report(in);
  const double mac = e.e_per_mac_stage1_j * 1e12, cls = e.e_per_classify_stage1_j * 1e9,
               tot = e.e_per_classify_total_j * 1e9, comb = e.e_per_mac_combined_j * 1e12;
  in.inputs = in.hidden = 128;
  const double full = energy_report(in).e_per_mac_combined_j * 1e12;
  o.pass = within(mac, 3.45, kTolPjPerMac) && within(cls, 8.3, kTolNjPerClassify) && within(tot, 16.2, kTolTotal) &&
           within(comb, 5.2, kTolCombined) && within(full, 1.46, kTolFullArray);
  o.detail = fmt("%.4f pJ/MAC, ", mac) + fmt("%.3f nJ/classify, ", cls) + fmt("total %.3f nJ, ", tot) +
             fmt("combined %.4f pJ/MAC, ", comb) + fmt("128x128 %.4f pJ/MAC (fixed power)", full);
  return o;
}

// ---- 2 ----
Outcome datarates() {
  Outcome o;
  BudgetInputs in;
  const DataRates r = datarate_report(in);
  in.outputs = 13;
  const double prop13 = datarate_report(in).r_prop_test_bps;
  o.pass = within(r.r_conv_bps, 204.8e3, kTolRate) && within(prop13, 200.0, kTolRate) &&
           within(r.r_raw_bps, 20e6, kTolRate);
  o.detail = fmt("R_conv %.1f bps, ", r.r_conv_bps) + fmt("R_prop(C=13) %.1f bps, ", prop13) +
             fmt("R_raw %.0f bps", r.r_raw_bps);
  return o;
}

// ---- 3 ----
Outcome window_counter() {
  Outcome o;
  const int rows = 128;
  Frontend fe(FrontendConfig::direct(rows));
  std::mt19937_64 rng(2024);
  std::vector<std::array<int, 5>> last(rows);  // raw spike counts, ring
  for (auto& a : last) a.fill(0);
  std::vector<int> spikes(rows);
  long mismatches = 0;
  for (long n = 0; n < kWindowTicks; ++n) {
    const int regime = static_cast<int>(rng() % 4);
    const unsigned span = regime == 0 ? 1 : regime == 1 ? 4 : regime == 2 ? 12 : 40;
    for (int r = 0; r < rows; ++r) spikes[r] = static_cast<int>(rng() % span);
    const VectorXi q = fe.step(spikes);
    for (int r = 0; r < rows; ++r) {
      last[r][n % 5] = spikes[r];
      int s = 0;
      for (int v : last[r]) s += std::min(15, v);
      if (q[r] != std::min(63, s)) ++mismatches;
    }
  }
  o.pass = mismatches == 0;
  o.detail = std::to_string(kWindowTicks) + " ticks x 128 rows, " + std::to_string(mismatches) + " mismatches";
  return o;
}

// ---- 4 ----
Outcome tdbdi_delay() {
  Outcome o;
  long mismatches = 0, checked = 0;
  for (int sdl = 0; sdl <= 4; ++sdl) {
    // Source row plus a chain of three delayed rows, all with the same SDL.
    FrontendConfig cfg;
    cfg.rows = {RowConfig{false, 0, 0}, RowConfig{true, sdl, 0}, RowConfig{true, sdl, 0}, RowConfig{true, sdl, 0}};
    Frontend fe(cfg);
    std::mt19937_64 rng(100 + sdl);
    const int delay = sdl_to_delay(sdl);
    std::vector<VectorXi> q;
    for (int k = 0; k < 20000; ++k) q.push_back(fe.step(std::vector<int>{static_cast<int>(rng() % 14)}));
    for (int k = 0; k < 20000; ++k) {
      for (int r = 1; r < 4; ++r) {
        const int shift = r * delay;
        const int expect = k >= shift ? q[k - shift][0] : 0;
        ++checked;
        if (q[k][r] != expect) ++mismatches;
      }
    }
  }
  o.pass = mismatches == 0;
  o.detail = "SDL delays 1..5 ticks, chained rows, " + std::to_string(checked) + " samples, " +
             std::to_string(mismatches) + " mismatches; SDL=001 -> " + std::to_string(sdl_to_delay(1) * 20) + " ms";
  return o;
}

// ---- 5 ----
struct VtStats {
  double ks = 0.0, crit = 0.0, mean = 0.0;
};

VtStats vt_stats(std::uint64_t seed) {
  const ChipInstance chip = build_chip(seed, AnalogParams{}, 128, 128);
  std::vector<double> lw(chip.weights().data(), chip.weights().data() + chip.weights().size());
  for (double& v : lw) v = std::log(v);
  return {oracle::ks_normal(lw, 0.0, 16.5 / 26.0), oracle::ks_critical_1pct(lw.size()), chip.delta_vt_mv().mean()};
}

// The chip the tool builds by default, plus the rejection rate over 100
// further seeds: a 1% test must reject about 1 in 100 (P(>= 5) = 0.3%).
Outcome mismatch_statistics() {
  Outcome o;
  cli::RunConfig cfg;
  cfg.resolve();
  const std::uint64_t seed = cfg.get_u64("chip.seed");
  const VtStats d = vt_stats(seed);
  int rejected = 0, mean_out = 0;
  for (std::uint64_t s = 1; s <= 100; ++s) {
    const VtStats v = vt_stats(s);
    rejected += v.ks >= v.crit;
    mean_out += std::abs(v.mean) > kMeanVtBoundMv;
  }
  o.pass = d.ks < d.crit && std::abs(d.mean) <= kMeanVtBoundMv && rejected <= 4 && mean_out == 0;
  o.detail = "default chip: " + fmt("KS D=%.5f", d.ks) + fmt(" (crit %.5f), ", d.crit) +
             fmt("mean dVt %.3f mV; ", d.mean) + "seeds 1..100: " + std::to_string(rejected) +
             " KS rejections, " + std::to_string(mean_out) + " means outside +-0.6 mV";
  return o;
}

// ---- 6 ----
Outcome noise_calibration() {
  Outcome o;
  AnalogParams p;
  p.dnl_lsb = 0.0;
  const ChipInstance chip(1, p, MatrixXd::Zero(1, 1), MatrixXd::Zero(1, kDacCodes));
  Engine rng(6);
  std::vector<double> rel;
  for (int k = 0; k < 1000; ++k) rel.push_back(mirror_multiply(VectorXd::Constant(1, 40.0), chip, rng)[0] / 40.0 - 1.0);
  const double target = std::pow(10.0, -p.mirror_snr_db / 20.0);
  const double mirror = oracle::stddev(rel);
  bool ok = mirror >= kMirrorStdLo * target && mirror <= kMirrorStdHi * target;
  std::string jit;
  // Low, medium and high counts within the 14-bit range.
  for (double counts : {2000.0, 6000.0, 15000.0}) {
    std::vector<double> c;
    const double i_na = counts / p.counts_per_na();
    for (int k = 0; k < 100; ++k) c.push_back(cco_count(i_na, p, rng));
    double mean = 0.0;
    for (double v : c) mean += v;
    mean /= c.size();
    const double r = oracle::stddev(c) / mean;
    ok = ok && r < kJitterBound;
    jit += fmt(" %.4f%%", 100.0 * r);
  }
  o.pass = ok;
  o.detail = fmt("mirror rel std %.4f%%", 100.0 * mirror) + fmt(" (target %.4f%%), CCO jitter", 100.0 * target) + jit;
  return o;
}

// ---- 7 ----
// Operating point: I_ref = 48 nA keeps alpha = 0.5 counts large enough for
// sub-0.5% floor error while about half the ticks stay unclamped at
// alpha = 2. The readout is the default min-norm T1 fit.
Outcome normalization_invariance() {
  Outcome o;
  SynthParams sp;
  sp.trials_per_class = 4;
  const SpikeDataset ds = gen_synthetic(sp);
  AnalogParams p;
  p.i_ref_na = 48;
  const FrontendConfig fe = FrontendConfig::direct(30);
  const ChipInstance chip = build_chip(7, p, 30, 60);
  CollectOptions co;
  co.features = {false, true, 0};
  auto [hm, ts] = collect_H(ds, chip, fe, co);
  const MatrixXd beta = train_T1(hm.H, ts.combined(), 0.0, ts.column_weights()).beta;

  long ticks = 0, clamped = 0, silent = 0, over = 0, flips = 0;
  double worst = 0.0, flip_margin = 0.0;
  const int stop = p.stop_value();
  std::vector<ChipInstance> chips;
  for (double a : {0.5, 1.0, 2.0}) {
    AnalogParams q = p;
    q.alpha_supply = a;
    chips.push_back(chip.reprogrammed(q));
  }
  for (const Trial& t : ds.trials) {
    const CodeMatrix codes = run_frontend(t, fe, ds.channel_count);
    for (Eigen::Index k = 0; k < codes.rows(); ++k) {
      const VectorXi x = codes.row(k).transpose();
      ++ticks;
      std::vector<VectorXi> h;
      for (const ChipInstance& c : chips) h.push_back(hidden_layer(x, c).counts);
      if (x.sum() == 0 || h[0].sum() == 0) {
        ++silent;
        continue;
      }
      bool clamp = false;
      for (const VectorXi& v : h) clamp = clamp || v.maxCoeff() >= stop;
      if (clamp) {
        ++clamped;
        continue;
      }
      const VectorXd ref = normalize_hidden(h[1].cast<double>(), x);
      const TypeDecision d = classify_type(ref, beta);
      for (int a : {0, 2}) {
        const VectorXd n = normalize_hidden(h[a].cast<double>(), x);
        const double e = (n - ref).norm() / ref.norm();
        worst = std::max(worst, e);
        over += e > kNormTol;
        if (classify_type(n, beta).label != d.label) {
          ++flips;
          VectorXd s = d.outputs.head(d.outputs.size() - 1);
          std::sort(s.data(), s.data() + s.size(), std::greater<>());
          flip_margin = std::max(flip_margin, (s[0] - s[1]) / std::abs(s[0]));
        }
      }
    }
  }
  o.pass = worst <= kNormTol && flips == 0 && ticks - clamped - silent > 0;
  o.detail = std::to_string(ticks) + " ticks (" + std::to_string(clamped) + " clamped, " + std::to_string(silent) +
             " silent excluded); worst rel diff " + fmt("%.4f%%", 100.0 * worst) + " (" + std::to_string(over) +
             " over 0.5%); argmax changes " + std::to_string(flips) +
             (flips ? fmt(" (largest top-two margin among them %.1e relative)", flip_margin) : std::string());
  return o;
}

// ---- 8 ----
Outcome trainer_oracles() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  auto rnd = [&](int r, int c) {
    MatrixXd m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
    return m;
  };
  double worst_t1 = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int rows = 20 + static_cast<int>(rng() % 60), cols = 3 + static_cast<int>(rng() % 15);
    MatrixXd H = rnd(rows, cols);
    const MatrixXd T = rnd(rows, 1 + static_cast<int>(rng() % 4));
    MatrixXd ref;
    if (k % 2 == 0) {
      ref = (H.transpose() * H).llt().solve(H.transpose() * T);
    } else {
      H.col(cols - 1) = H.col(0) - 0.5 * H.col(1);  // rank deficient: min-norm oracle
      ref = H.completeOrthogonalDecomposition().solve(T);
    }
    const MatrixXd b = train_T1(H, T, 0.0).beta;
    worst_t1 = std::max(worst_t1, (b - ref).norm() / ref.norm());
  }
  double worst_kkt = 0.0, worst_obj = 0.0;
  for (int k = 0; k < 100; ++k) {
    const MatrixXd H = rnd(20, 6);
    const MatrixXd T = rnd(20, 2);
    const double lam = (H.transpose() * T).cwiseAbs().maxCoeff() * (0.01 + 0.8 * (rng() % 1000) / 1000.0);
    T2Options opt;
    opt.l1_lambda = lam;
    opt.refit = false;
    opt.scale_columns = false;
    const MatrixXd b = train_T2(H, T, opt).beta;
    for (int c = 0; c < 2; ++c) {
      const VectorXd g = H.transpose() * (T.col(c) - H * b.col(c));
      for (int j = 0; j < 6; ++j) {
        const double v = b(j, c) != 0.0 ? std::abs(g[j] - lam * (b(j, c) > 0 ? 1.0 : -1.0))
                                        : std::max(0.0, std::abs(g[j]) - lam);
        worst_kkt = std::max(worst_kkt, v / std::max(1.0, lam));
      }
      const VectorXd cd = oracle::lasso_cd(H, T.col(c), lam);
      const double fo = oracle::lasso_objective(H, T.col(c), cd, lam);
      const double fb = oracle::lasso_objective(H, T.col(c), b.col(c), lam);
      worst_obj = std::max(worst_obj, std::abs(fb - fo) / std::max(1.0, std::abs(fo)));
    }
  }
  o.pass = worst_t1 <= kT1Tol && worst_kkt <= kKktTol && worst_obj <= kObjTol;
  o.detail = fmt("T1 worst rel %.2e over 100; ", worst_t1) + fmt("T2 KKT %.2e, ", worst_kkt) +
             fmt("objective gap %.2e over 100 20x6 instances", worst_obj);
  return o;
}

// ---- 9 ----
struct TrendRun {
  double accuracy = 0.0;
  double support = 0.0;
};

TrendRun decode_accuracy(const DatasetSplit& split, int n, int p, int L, bool t2) {
  TrendRun out;
  for (int s = 0; s < kTrendSeeds; ++s) {
    const FrontendConfig fe = FrontendConfig::tdbdi(n, p);
    const ChipInstance chip = build_chip(derive_seed(900, {static_cast<std::uint64_t>(s)}), AnalogParams{},
                                         fe.dimension(), L);
    CollectOptions co;
    co.features.noise_seed = 5;
    auto [hm, ts] = collect_H(split.train, chip, fe, co);
    DecoderModel m;
    if (t2) {
      T2Options opt;
      opt.target_sparsity = kT2Keep;
      m.weights = train_T2(hm.H, ts.combined(), opt, ts.column_weights());
    } else {
      m.weights = train_T1(hm.H, ts.combined(), 0.0, ts.column_weights());
    }
    m.frontend = fe;
    m.fmax_sel = chip.params().fmax_sel;
    out.accuracy += evaluate(split.test, m, deployed_chip(chip, m, true), co.features).type_accuracy;
    out.support += m.weights.report.support_size;
  }
  out.accuracy /= kTrendSeeds;
  out.support /= kTrendSeeds;
  return out;
}

Outcome decoding_trends() {
  Outcome o;
  const DatasetSplit def = split_dataset(gen_synthetic(SynthParams{}), 0.25, 99);
  const TrendRun l10 = decode_accuracy(def, 30, 1, 10, false);
  const TrendRun l60 = decode_accuracy(def, 30, 1, 60, false);
  const TrendRun p1 = decode_accuracy(def, 15, 1, 60, false);
  const TrendRun p2 = decode_accuracy(def, 15, 2, 60, false);
  const TrendRun t2 = decode_accuracy(def, 30, 1, 60, true);
  SynthParams easy;
  easy.peak_rate_hz = 200.0;
  easy.baseline_rate_hz = 5.0;
  easy.tuning_width = 2.0;
  const TrendRun e = decode_accuracy(split_dataset(gen_synthetic(easy), 0.25, 99), 30, 1, 60, false);

  const bool a = l60.accuracy - l10.accuracy >= kTrendL;
  const bool b = p2.accuracy >= p1.accuracy;
  const bool c = t2.accuracy >= l60.accuracy - kT2Gap && t2.support <= kT2Keep * 60 + 1e-9;
  const bool d = e.accuracy >= kEasyAcc;
  o.pass = a && b && c && d;
  o.detail = std::string("(a)") + (a ? "ok" : "FAIL") + fmt(" L10 %.3f", l10.accuracy) +
             fmt(" L60 %.3f; ", l60.accuracy) + "(b)" + (b ? "ok" : "FAIL") + fmt(" n15 p1 %.3f", p1.accuracy) +
             fmt(" p2 %.3f; ", p2.accuracy) + "(c)" + (c ? "ok" : "FAIL") + fmt(" T2 %.3f", t2.accuracy) +
             fmt(" with %.1f/60 neurons; ", t2.support) + "(d)" + (d ? "ok" : "FAIL") +
             fmt(" easy %.3f", e.accuracy) + " [mean of " + std::to_string(kTrendSeeds) + " chip seeds]";
  return o;
}

// ---- 10 ----
Outcome fsm_equivalence() {
  Outcome o;
  long strings = 0, mismatches = 0;
  for (int tau = 1; tau <= 4; ++tau) {
    for (int lambda = 1; lambda <= tau; ++lambda) {
      for (int refr = 0; refr <= 4; ++refr) {
        for (int len = 1; len <= 12; ++len) {
          for (int bits = 0; bits < (1 << len); ++bits) {
            std::vector<int> g(len);
            for (int k = 0; k < len; ++k) g[k] = (bits >> k) & 1;
            const auto ref = oracle::track(g, lambda, tau, refr);
            OnsetTracker t(lambda, tau, refr);
            for (int k = 0; k < len; ++k) mismatches += t.step(g[k]) != ref[k];
            ++strings;
          }
        }
      }
    }
  }
  const int refr = refractory_ticks(140.0, 20'000);
  std::mt19937_64 rng(10);
  std::vector<int> g(100000);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = (rng() % 100) < (k / 1000 % 2 ? 70u : 30u) ? 1 : 0;
  const auto ref = oracle::track(g, 6, 10, refr);
  OnsetTracker t(6, 10, refr);
  long random_mismatch = 0, too_close = 0, detections = 0, last = -1000000;
  for (std::size_t k = 0; k < g.size(); ++k) {
    random_mismatch += t.step(g[k]) != ref[k];
    if (t.detection()) {
      ++detections;
      if (static_cast<long>(k) - last < refr) ++too_close;
      last = static_cast<long>(k);
    }
  }
  o.pass = mismatches == 0 && random_mismatch == 0 && too_close == 0 && detections > 0;
  o.detail = std::to_string(strings) + " exhaustive strings, " + std::to_string(mismatches) + " mismatches; 1e5 random ticks, " +
             std::to_string(random_mismatch) + " mismatches, " + std::to_string(detections) + " detections, " +
             std::to_string(too_close) + " closer than Tr";
  return o;
}

// ---- 11 ----
Outcome roc_sanity() {
  Outcome o;
  SynthParams sp;
  sp.trials_per_class = 8;
  const DatasetSplit split = split_dataset(gen_synthetic(sp), 0.25, 11);
  const FrontendConfig fe = FrontendConfig::direct(30);
  const ChipInstance chip = build_chip(11, AnalogParams{}, 30, 60);
  CollectOptions co;
  auto [hm, ts] = collect_H(split.train, chip, fe, co);
  DecoderModel m;
  m.weights = train_T1(hm.H, ts.combined(), 0.0, ts.column_weights());
  m.frontend = fe;
  const OnsetTraces tr = onset_traces(split.test, m, chip, co.features);
  double top = -1e300;
  for (const VectorXd& v : tr.outputs) top = std::max(top, v.maxCoeff());
  std::vector<double> thetas;
  for (int k = 0; k < 20; ++k) thetas.push_back(-0.5 + 0.1 * k);
  thetas.push_back(top + 0.01);
  const auto pts = roc_from_traces(tr, thetas, m.decoder);
  long violations = 0;
  for (std::size_t a = 0; a + 1 < pts.size(); ++a) {
    if (pts[a].theta > pts[a + 1].theta) ++violations;
    for (const VectorXd& v : tr.outputs) {
      for (Eigen::Index k = 0; k < v.size(); ++k) {
        violations += onset_primary(v[k], pts[a].theta) < onset_primary(v[k], pts[a + 1].theta);
      }
    }
  }
  const RocPoint& hi = pts.back();
  o.pass = violations == 0 && hi.tpr == 0.0 && hi.fp_per_trial == 0.0;
  o.detail = std::to_string(pts.size()) + " thresholds, " + std::to_string(violations) +
             " monotonicity violations; theta above max -> TPR " + fmt("%g", hi.tpr) + ", FP " +
             fmt("%g", hi.fp_per_trial);
  return o;
}

// ---- 12 ----
using Snapshot = std::map<std::string, std::string>;

Snapshot run_all_commands(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string r = root.string();
  const std::vector<std::string> small = {"--seed", "12", "--set", "synth.trials_per_class=6"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), small.begin(), small.end());
    return a;
  };
  const std::vector<std::vector<std::string>> commands = {
      with({"gen", "--out", r + "/data"}),
      with({"chip", "--dump", "--out", r + "/chip.txt"}),
      with({"train", "--data", r + "/data", "--out", r + "/t1.json"}),
      with({"train", "--data", r + "/data", "--chip", r + "/chip.txt", "--out", r + "/t2.json", "--set",
            "train.method=T2"}),
      with({"eval", "--data", r + "/data", "--model", r + "/t1.json", "--out", r + "/eval.json"}),
      with({"eval", "--data", r + "/data", "--model", r + "/t2.json", "--chip", r + "/chip.txt"}),
      with({"stream", "--data", r + "/data", "--model", r + "/t1.json", "--out", r + "/stream.csv"}),
      with({"roc", "--data", r + "/data", "--model", r + "/t1.json", "--out", r + "/roc.csv"}),
      with({"sweep", "--data", r + "/data", "--set", "sweep.hidden=10,30", "--set", "sweep.methods=T1,T2", "--set",
            "sweep.taps=1,2", "--set", "sweep.channels=10", "--set", "sweep.seeds=2", "--out", r + "/sweep.csv"}),
      with({"budget"}),
      with({"budget", "--set", "budget.format=json", "--out", r + "/budget.json"}),
  };
  Snapshot snap;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    std::ostringstream out, err;
    const int code = cli::run_cli(commands[k], out, err);
    snap["stdout#" + std::to_string(k)] = std::to_string(code) + "\n" + out.str() + err.str();
  }
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) snap[fs::relative(e.path(), root).string()] = testutil::read_file(e.path());
  }
  return snap;
}

Outcome determinism() {
  Outcome o;
  testutil::TempDir dir("accept-determinism");
  const auto root = dir / "run";
  const Snapshot a = run_all_commands(root);
  const Snapshot b = run_all_commands(root);
  int failures = 0, differing = 0;
  for (const auto& [k, v] : a) {
    if (k.rfind("stdout#", 0) == 0 && v.rfind("0\n", 0) != 0) ++failures;
  }
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end() || it->second != v) ++differing;
  }
  o.pass = failures == 0 && differing == 0 && a.size() == b.size();
  o.detail = std::to_string(a.size()) + " outputs (files + stdout) across 11 invocations, " +
             std::to_string(differing) + " differ, " + std::to_string(failures) + " commands failed";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"budget reproduction", budget_reproduction},
      {"data-rate reproduction", datarates},
      {"window-counter oracle equivalence", window_counter},
      {"TDBDI delay exactness", tdbdi_delay},
      {"mismatch statistics", mismatch_statistics},
      {"noise calibration", noise_calibration},
      {"normalization invariance", normalization_invariance},
      {"trainer oracles", trainer_oracles},
      {"decoding trends", decoding_trends},
      {"FSM equivalence", fsm_equivalence},
      {"ROC sanity", roc_sanity},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("[%s] %2zu. %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed;
}
