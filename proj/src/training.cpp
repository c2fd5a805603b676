#include "elmsim/training.hpp"

#include "elmsim/errors.hpp"
#include "elmsim/rng.hpp"
#include "elmsim/solvers.hpp"

#include <algorithm>
#include <cmath>

namespace elmsim {

void TrapezoidParams::validate() const {
  if (!(t0_ms <= t1_ms && t1_ms <= t2_ms && t2_ms <= t3_ms)) {
    throw UsageError("trapezoid: need t0 <= t1 <= t2 <= t3");
  }
}

double trapezoid(double t, const TrapezoidParams& p) {
  if (t < p.t0_ms || t > p.t3_ms) return 0.0;
  if (t >= p.t1_ms && t <= p.t2_ms) return 1.0;
  if (t < p.t1_ms) return (t - p.t0_ms) / (p.t1_ms - p.t0_ms);
  return (p.t3_ms - t) / (p.t3_ms - p.t2_ms);
}

double trial_membership(double t_ms, double onset_ms, const TrapezoidParams& p) {
  return trapezoid(t_ms - (onset_ms - p.reference_onset_ms), p);
}

MatrixXd TargetSet::combined() const {
  MatrixXd T(type.rows(), type.cols() + 1);
  T << type, onset;
  return T;
}

MatrixXd TargetSet::column_weights() const {
  MatrixXd W = MatrixXd::Ones(type.rows(), type.cols() + 1);
  for (Eigen::Index r = 0; r < type.rows(); ++r) {
    if (!type_rows[static_cast<std::size_t>(r)]) W.row(r).head(type.cols()).setZero();
  }
  return W;
}

double tick_time_ms(int k, Microseconds tick_us) {
  return static_cast<double>(k + 1) * static_cast<double>(tick_us) / 1000.0;
}

TrialFeatures trial_features(const Trial& trial, int channel_count, const ChipInstance& chip,
                             const FrontendConfig& frontend, const FeatureOptions& options) {
  if (frontend.dimension() != chip.inputs()) {
    throw UsageError("frontend produces " + std::to_string(frontend.dimension()) +
                     " features but the chip has " + std::to_string(chip.inputs()) + " inputs");
  }
  TrialFeatures out;
  out.codes = run_frontend(trial, frontend, channel_count);
  Engine noise = make_engine(options.noise_seed, {fnv1a(trial.id)});
  out.counts = hidden_responses(out.codes, chip, options.noise ? &noise : nullptr);
  out.features = out.counts.cast<double>();
  if (options.normalize) {
    for (Eigen::Index k = 0; k < out.features.rows(); ++k) {
      const VectorXi x = out.codes.row(k).transpose();
      if (x.sum() > 0 && out.counts.row(k).sum() > 0) {
        out.features.row(k) = normalize_hidden(out.features.row(k).transpose(), x).transpose();
      } else {
        out.features.row(k).setZero();
      }
    }
  }
  return out;
}

std::pair<HiddenMatrix, TargetSet> collect_H(const SpikeDataset& dataset, const ChipInstance& chip,
                                             const FrontendConfig& frontend,
                                             const CollectOptions& options) {
  if (dataset.trials.empty()) throw UsageError("collect_H: dataset has no trials");
  options.trapezoid.validate();

  std::vector<TrialFeatures> per_trial;
  per_trial.reserve(dataset.trials.size());
  Eigen::Index rows = 0;
  for (const Trial& trial : dataset.trials) {
    per_trial.push_back(trial_features(trial, dataset.channel_count, chip, frontend, options.features));
    rows += per_trial.back().features.rows();
  }

  HiddenMatrix hm;
  TargetSet ts;
  hm.H.resize(rows, chip.hidden());
  hm.meta.reserve(static_cast<std::size_t>(rows));
  ts.type = MatrixXd::Zero(rows, dataset.class_count);
  ts.onset.resize(rows);
  ts.type_rows.reserve(static_cast<std::size_t>(rows));

  Eigen::Index r = 0;
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
    const Trial& trial = dataset.trials[i];
    const MatrixXd& f = per_trial[i].features;
    const double onset_ms = static_cast<double>(trial.onset_us) / 1000.0;
    for (Eigen::Index k = 0; k < f.rows(); ++k, ++r) {
      hm.H.row(r) = f.row(k);
      hm.meta.push_back({trial.id, static_cast<int>(k)});
      const double m = trial_membership(tick_time_ms(static_cast<int>(k), frontend.tick_us), onset_ms,
                                        options.trapezoid);
      ts.type(r, trial.label - 1) = 1.0;
      ts.onset[r] = m;
      ts.type_rows.push_back(options.policy == SamplePolicy::kEveryTick || m == 0.0 || m == 1.0);
    }
  }
  return {std::move(hm), std::move(ts)};
}

namespace {

/// Groups output columns that share an identical weight column.
std::vector<std::vector<Eigen::Index>> weight_groups(const MatrixXd& W, Eigen::Index cols) {
  std::vector<std::vector<Eigen::Index>> groups;
  if (W.size() == 0) {
    groups.emplace_back();
    for (Eigen::Index c = 0; c < cols; ++c) groups.back().push_back(c);
    return groups;
  }
  for (Eigen::Index c = 0; c < cols; ++c) {
    bool placed = false;
    for (auto& g : groups) {
      if (W.col(g.front()) == W.col(c)) {
        g.push_back(c);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({c});
  }
  return groups;
}

void check_shapes(const MatrixXd& H, const MatrixXd& T, const MatrixXd& W) {
  if (H.rows() == 0 || H.cols() == 0) throw UsageError("training: H is empty");
  if (T.rows() != H.rows()) throw UsageError("training: H and T row counts differ");
  if (W.size() != 0 && (W.rows() != T.rows() || W.cols() != T.cols())) {
    throw UsageError("training: weight matrix must match T");
  }
  if (W.size() != 0 && W.minCoeff() < 0.0) throw UsageError("training: weights must be non-negative");
}

VectorXd column_residuals(const MatrixXd& H, const MatrixXd& T, const MatrixXd& B, const MatrixXd& W) {
  MatrixXd R = H * B - T;
  if (W.size() != 0) R = R.cwiseProduct(W.cwiseSqrt());
  return R.colwise().norm().transpose();
}

std::vector<bool> support_of(const MatrixXd& B) {
  std::vector<bool> s(static_cast<std::size_t>(B.rows()));
  for (Eigen::Index i = 0; i < B.rows(); ++i) s[static_cast<std::size_t>(i)] = (B.row(i).array() != 0.0).any();
  return s;
}

MatrixXd fit_min_norm(const MatrixXd& H, const MatrixXd& T, double ridge, const MatrixXd& W) {
  MatrixXd B = MatrixXd::Zero(H.cols(), T.cols());
  for (const auto& group : weight_groups(W, T.cols())) {
    MatrixXd Tg(T.rows(), static_cast<Eigen::Index>(group.size()));
    for (std::size_t g = 0; g < group.size(); ++g) Tg.col(static_cast<Eigen::Index>(g)) = T.col(group[g]);
    MatrixXd Bg;
    if (W.size() == 0) {
      Bg = solve_min_norm(H, Tg, ridge);
    } else {
      const VectorXd sw = W.col(group.front()).cwiseSqrt();
      Bg = solve_min_norm(sw.asDiagonal() * H, sw.asDiagonal() * Tg, ridge);
    }
    for (std::size_t g = 0; g < group.size(); ++g) B.col(group[g]) = Bg.col(static_cast<Eigen::Index>(g));
  }
  return B;
}

void finish_report(OutputWeights& ow, const MatrixXd& H, const MatrixXd& T, const MatrixXd& W) {
  ow.support = support_of(ow.beta);
  ow.report.support_size = static_cast<int>(std::count(ow.support.begin(), ow.support.end(), true));
  ow.report.sparsity = 1.0 - static_cast<double>(ow.report.support_size) / static_cast<double>(H.cols());
  ow.report.residuals = column_residuals(H, T, ow.beta, W);
}

}  // namespace

OutputWeights train_T1(const MatrixXd& H, const MatrixXd& T, double ridge, const MatrixXd& W) {
  check_shapes(H, T, W);
  if (!(ridge >= 0.0)) throw UsageError("train_T1: ridge must be >= 0");
  OutputWeights ow;
  ow.report.method = "T1";
  ow.report.degenerate = H.cwiseAbs().maxCoeff() == 0.0;
  ow.beta = fit_min_norm(H, T, ridge, W);
  finish_report(ow, H, T, W);
  return ow;
}

namespace {

struct ColumnLasso {
  MatrixXd gram;  // scaled
  VectorXd rhs;   // scaled
  VectorXd scale;
};

}  // namespace

OutputWeights train_T2(const MatrixXd& H, const MatrixXd& T, const T2Options& opt, const MatrixXd& W) {
  check_shapes(H, T, W);
  if (!opt.l1_lambda && !opt.target_sparsity) {
    throw UsageError("train_T2: give either l1_lambda or target_sparsity");
  }
  if (opt.l1_lambda && !(*opt.l1_lambda >= 0.0)) throw UsageError("train_T2: l1_lambda must be >= 0");
  if (opt.target_sparsity && !(*opt.target_sparsity > 0.0 && *opt.target_sparsity <= 1.0)) {
    throw UsageError("train_T2: target_sparsity must be in (0,1]");
  }
  const Eigen::Index L = H.cols();
  const Eigen::Index C = T.cols();

  OutputWeights ow;
  ow.report.method = "T2";
  ow.report.lambdas = VectorXd::Zero(C);
  if (H.cwiseAbs().maxCoeff() == 0.0) {
    ow.report.degenerate = true;
    ow.beta = MatrixXd::Zero(L, C);
    finish_report(ow, H, T, W);
    return ow;
  }

  // One scaled Gram matrix per distinct row-weight pattern.
  std::vector<ColumnLasso> problems(static_cast<std::size_t>(C));
  for (const auto& group : weight_groups(W, C)) {
    MatrixXd Hw = H;
    if (W.size() != 0) Hw = W.col(group.front()).asDiagonal() * H;
    const MatrixXd gram = H.transpose() * Hw;
    VectorXd scale = VectorXd::Ones(L);
    if (opt.scale_columns) {
      for (Eigen::Index j = 0; j < L; ++j) scale[j] = gram(j, j) > 0.0 ? std::sqrt(gram(j, j)) : 1.0;
    }
    const VectorXd inv = scale.cwiseInverse();
    const MatrixXd scaled = inv.asDiagonal() * gram * inv.asDiagonal();
    for (Eigen::Index c : group) {
      ColumnLasso& p = problems[static_cast<std::size_t>(c)];
      p.gram = scaled;
      p.rhs = inv.asDiagonal() * (Hw.transpose() * T.col(c));
      p.scale = scale;
    }
  }

  int iterations = 0;
  auto solve_all = [&](auto lambda_of) {
    MatrixXd B = MatrixXd::Zero(L, C);
    for (Eigen::Index c = 0; c < C; ++c) {
      const ColumnLasso& p = problems[static_cast<std::size_t>(c)];
      const double lam = lambda_of(c, p.rhs.cwiseAbs().maxCoeff());
      ow.report.lambdas[c] = lam;
      const auto res = lasso_lars_gram(p.gram, p.rhs, lam, opt.max_iter);
      iterations += res.iterations;
      B.col(c) = res.beta.cwiseQuotient(p.scale);
    }
    return B;
  };
  auto support_size = [](const MatrixXd& B) {
    const auto s = support_of(B);
    return static_cast<Eigen::Index>(std::count(s.begin(), s.end(), true));
  };

  if (opt.target_sparsity) {
    const auto budget = static_cast<Eigen::Index>(std::floor(*opt.target_sparsity * static_cast<double>(L) + 1e-9));
    auto at = [&](double frac) { return solve_all([frac](Eigen::Index, double lmax) { return frac * lmax; }); };
    double lo = 0.0, hi = 1.0;
    MatrixXd best = MatrixXd::Zero(L, C);
    VectorXd best_lambdas = VectorXd::Zero(C);
    for (Eigen::Index c = 0; c < C; ++c) best_lambdas[c] = problems[static_cast<std::size_t>(c)].rhs.cwiseAbs().maxCoeff();
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      MatrixXd B = at(mid);
      if (support_size(B) <= budget) {
        hi = mid;
        best = std::move(B);
        best_lambdas = ow.report.lambdas;
      } else {
        lo = mid;
      }
    }
    ow.beta = std::move(best);
    ow.report.lambdas = best_lambdas;
  } else {
    const double lam = *opt.l1_lambda;
    ow.beta = solve_all([lam](Eigen::Index, double) { return lam; });
  }
  ow.report.iterations = iterations;

  if (opt.refit) {
    const auto support = support_of(ow.beta);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < L; ++i) if (support[static_cast<std::size_t>(i)]) keep.push_back(i);
    if (!keep.empty()) {
      MatrixXd Hs(H.rows(), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t k = 0; k < keep.size(); ++k) Hs.col(static_cast<Eigen::Index>(k)) = H.col(keep[k]);
      const MatrixXd Bs = fit_min_norm(Hs, T, 0.0, W);
      ow.beta.setZero();
      for (std::size_t k = 0; k < keep.size(); ++k) ow.beta.row(keep[k]) = Bs.row(static_cast<Eigen::Index>(k));
    }
    ow.report.method = "T2+refit";
  }
  finish_report(ow, H, T, W);
  return ow;
}

}  // namespace elmsim
