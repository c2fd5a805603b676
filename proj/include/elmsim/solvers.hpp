#pragma once

#include "elmsim/errors.hpp"
#include "elmsim/types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace elmsim {

/// Minimum-L2-norm least-squares solution of H B = T via SVD. Singular
/// values below `rel_cutoff * s_max` are treated as zero. With `ridge > 0`
/// the Tikhonov solution (H'H + ridge I)^-1 H'T is returned instead.
template <typename DerivedH, typename DerivedT>
Matrix<typename DerivedH::Scalar> solve_min_norm(const Eigen::MatrixBase<DerivedH>& H,
                                                 const Eigen::MatrixBase<DerivedT>& T,
                                                 typename DerivedH::Scalar ridge = 0,
                                                 typename DerivedH::Scalar rel_cutoff = 1e-10) {
  using Scalar = typename DerivedH::Scalar;
  const Matrix<Scalar> Hm = H;
  if (Hm.rows() != T.rows()) throw UsageError("solve_min_norm: row count mismatch");
  Matrix<Scalar> B = Matrix<Scalar>::Zero(Hm.cols(), T.cols());
  if (Hm.size() == 0 || Hm.cwiseAbs().maxCoeff() == Scalar(0)) return B;

  Eigen::BDCSVD<Matrix<Scalar>> svd(Hm, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar cutoff = rel_cutoff * s[0];
  Vector<Scalar> gain = Vector<Scalar>::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff) gain[i] = ridge > Scalar(0) ? s[i] / (s[i] * s[i] + ridge) : Scalar(1) / s[i];
  }
  B = svd.matrixV() * gain.asDiagonal() * (svd.matrixU().transpose() * T);
  return B;
}

template <typename Scalar>
struct LassoResult {
  Vector<Scalar> beta;
  Scalar lambda_max = 0;  // smallest penalty giving the all-zero solution
  int iterations = 0;
};

/// Lasso by least-angle homotopy on the Gram form:
///   minimize 1/2 |H b - t|^2 + lambda |b|_1,  G = H'H, rhs = H't.
/// Follows the piecewise-linear solution path from lambda_max down to
/// `lambda`, adding a variable when its correlation reaches the active level
/// and dropping one when its coefficient crosses zero.
template <typename DerivedG, typename DerivedB>
LassoResult<typename DerivedG::Scalar> lasso_lars_gram(const Eigen::MatrixBase<DerivedG>& G,
                                                       const Eigen::MatrixBase<DerivedB>& rhs,
                                                       typename DerivedG::Scalar lambda,
                                                       int max_iter = 0) {
  using Scalar = typename DerivedG::Scalar;
  const Eigen::Index n = G.rows();
  if (G.cols() != n || rhs.size() != n) throw UsageError("lasso: Gram/rhs dimension mismatch");
  if (lambda < Scalar(0)) throw UsageError("lasso: penalty must be non-negative");
  if (max_iter <= 0) max_iter = static_cast<int>(8 * n + 64);

  LassoResult<Scalar> out;
  out.beta = Vector<Scalar>::Zero(n);
  if (n == 0) return out;

  Vector<Scalar> c = rhs;
  Eigen::Index first = 0;
  out.lambda_max = c.cwiseAbs().maxCoeff(&first);
  Scalar level = out.lambda_max;
  if (level <= lambda) return out;

  const Scalar scale = std::max(out.lambda_max, std::numeric_limits<Scalar>::min());
  const Scalar tiny = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scale;

  std::vector<Eigen::Index> active{first};
  std::vector<Scalar> sign{c[first] > 0 ? Scalar(1) : Scalar(-1)};
  std::vector<char> in_active(static_cast<std::size_t>(n), 0);
  in_active[static_cast<std::size_t>(first)] = 1;
  Eigen::Index just_dropped = -1;
  Eigen::Index just_added = first;

  for (int iter = 1;; ++iter) {
    if (iter > max_iter) {
      throw NumericalError("lasso: no convergence after " + std::to_string(max_iter) +
                           " steps (level " + std::to_string(static_cast<double>(level)) +
                           ", target " + std::to_string(static_cast<double>(lambda)) +
                           ", active " + std::to_string(active.size()) + ")");
    }
    out.iterations = iter;
    const auto k = static_cast<Eigen::Index>(active.size());
    Matrix<Scalar> g_aa(k, k);
    Vector<Scalar> s_a(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      s_a[a] = sign[static_cast<std::size_t>(a)];
      for (Eigen::Index b = 0; b < k; ++b) g_aa(a, b) = G(active[a], active[b]);
    }
    Vector<Scalar> d = g_aa.ldlt().solve(s_a);
    if (!d.allFinite() || (g_aa * d - s_a).norm() > Scalar(1e-6) * (Scalar(1) + s_a.norm())) {
      d = g_aa.completeOrthogonalDecomposition().solve(s_a);
    }
    // Rate of change of every correlation per unit step.
    Vector<Scalar> a_all = Vector<Scalar>::Zero(n);
    for (Eigen::Index a = 0; a < k; ++a) a_all += G.col(active[a]) * d[a];

    Scalar step = level - lambda;
    Eigen::Index enter = -1, leave = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (in_active[static_cast<std::size_t>(j)] || j == just_dropped) continue;
      const Scalar up = Scalar(1) - a_all[j];
      if (up > Scalar(1e-12)) {
        const Scalar g = (level - c[j]) / up;
        if (g > tiny && g < step) { step = g; enter = j; leave = -1; }
      }
      const Scalar down = Scalar(1) + a_all[j];
      if (down > Scalar(1e-12)) {
        const Scalar g = (level + c[j]) / down;
        if (g > tiny && g < step) { step = g; enter = j; leave = -1; }
      }
    }
    for (Eigen::Index a = 0; a < k; ++a) {
      const Eigen::Index j = active[a];
      if (j == just_added || d[a] == Scalar(0)) continue;
      const Scalar g = -out.beta[j] / d[a];
      if (g > Scalar(0) && g < step) { step = g; leave = a; enter = -1; }
    }

    for (Eigen::Index a = 0; a < k; ++a) out.beta[active[a]] += step * d[a];
    level -= step;
    c = rhs - G * out.beta;
    just_added = -1;
    just_dropped = -1;

    if (leave >= 0) {
      const Eigen::Index j = active[leave];
      out.beta[j] = 0;
      in_active[static_cast<std::size_t>(j)] = 0;
      active.erase(active.begin() + leave);
      sign.erase(sign.begin() + leave);
      just_dropped = j;
      if (active.empty()) {
        // Only possible at a kink where every coefficient returns to zero.
        Eigen::Index best = 0;
        level = std::min(level, c.cwiseAbs().maxCoeff(&best));
        if (level <= lambda) break;
        active.push_back(best);
        sign.push_back(c[best] > 0 ? Scalar(1) : Scalar(-1));
        in_active[static_cast<std::size_t>(best)] = 1;
        just_added = best;
      }
    } else if (enter >= 0) {
      active.push_back(enter);
      sign.push_back(c[enter] > 0 ? Scalar(1) : Scalar(-1));
      in_active[static_cast<std::size_t>(enter)] = 1;
      just_added = enter;
    } else {
      break;  // reached the requested penalty
    }
    if (level <= lambda) break;
  }
  return out;
}

/// Lasso on a design matrix; see lasso_lars_gram.
template <typename DerivedH, typename DerivedT>
LassoResult<typename DerivedH::Scalar> lasso_lars(const Eigen::MatrixBase<DerivedH>& H,
                                                  const Eigen::MatrixBase<DerivedT>& t,
                                                  typename DerivedH::Scalar lambda, int max_iter = 0) {
  using Scalar = typename DerivedH::Scalar;
  if (H.rows() != t.size()) throw UsageError("lasso: row count mismatch");
  const Matrix<Scalar> G = H.transpose() * H;
  const Vector<Scalar> rhs = H.transpose() * t;
  return lasso_lars_gram(G, rhs, lambda, max_iter);
}

/// 1/2 |H b - t|^2 + lambda |b|_1
template <typename DerivedH, typename DerivedT, typename DerivedB>
typename DerivedH::Scalar lasso_objective(const Eigen::MatrixBase<DerivedH>& H,
                                          const Eigen::MatrixBase<DerivedT>& t,
                                          const Eigen::MatrixBase<DerivedB>& b,
                                          typename DerivedH::Scalar lambda) {
  return (H * b - t).squaredNorm() / 2 + lambda * b.template lpNorm<1>();
}

}  // namespace elmsim
