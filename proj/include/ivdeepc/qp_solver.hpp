#pragma once

// Dense convex quadratic programming with linear equality and inequality
// constraints, certified by independently recomputed KKT residuals.
//
//   minimize    (1/2) z' H z + c' z
//   subject to  A_eq z  = b_eq
//               A_in z <= b_in
//
// Method: primal active-set. The Hessian is factored once (Cholesky); each
// iteration solves the working-set KKT system through a Schur complement on
// the active rows. A slack-variable phase one constructs a feasible start
// when none is supplied. `optimal` is only returned when the KKT residual,
// recomputed from scratch against the original problem data, is within
// tolerance — the certificate is the contract, not the iteration count.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ivdeepc/rng.hpp"

namespace ivdeepc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct QuadraticProgram {
  MatrixXd H;     ///< m x m symmetric positive (semi)definite
  VectorXd c;     ///< m
  MatrixXd A_eq;  ///< m_e x m (may have zero rows)
  VectorXd b_eq;  ///< m_e
  MatrixXd A_in;  ///< m_i x m (may have zero rows)
  VectorXd b_in;  ///< m_i

  Eigen::Index vars() const { return c.size(); }

  void validate() const {
    const Eigen::Index m = vars();
    if (H.rows() != m || H.cols() != m)
      throw std::invalid_argument("qp: H must be m x m");
    const double hnorm = H.lpNorm<Eigen::Infinity>();
    if ((H - H.transpose()).lpNorm<Eigen::Infinity>() >
        1e-12 * std::max(1.0, hnorm))
      throw std::invalid_argument("qp: H must be symmetric");
    if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != m))
      throw std::invalid_argument("qp: equality dimensions inconsistent");
    if (A_in.rows() != b_in.size() || (A_in.rows() > 0 && A_in.cols() != m))
      throw std::invalid_argument("qp: inequality dimensions inconsistent");
  }
};

enum class QpStatus { optimal, infeasible, max_iter };

struct QpSolution {
  VectorXd z;
  VectorXd eq_duals;  ///< one per equality row
  VectorXd in_duals;  ///< one per inequality row, >= 0, zero when inactive
  double kkt_residual = std::numeric_limits<double>::infinity();
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
};

/// Max over stationarity, primal feasibility, dual feasibility, and
/// complementary slackness violations, evaluated on the original problem
/// data. Each component is normalized by the magnitude of the terms that
/// produce it, so the residual is scale invariant: multiplying the objective
/// or a constraint row by a constant does not change it.
inline double kkt_residual(const QuadraticProgram& qp, const VectorXd& z,
                           const VectorXd& eq_duals,
                           const VectorXd& in_duals) {
  const VectorXd hz = qp.H * z;
  VectorXd stat = hz + qp.c;
  double stat_scale =
      std::max(hz.lpNorm<Eigen::Infinity>(), qp.c.lpNorm<Eigen::Infinity>());
  if (qp.A_eq.rows() > 0) {
    const VectorXd t = qp.A_eq.transpose() * eq_duals;
    stat += t;
    stat_scale = std::max(stat_scale, t.lpNorm<Eigen::Infinity>());
  }
  if (qp.A_in.rows() > 0) {
    const VectorXd t = qp.A_in.transpose() * in_duals;
    stat += t;
    stat_scale = std::max(stat_scale, t.lpNorm<Eigen::Infinity>());
  }
  double res = stat.lpNorm<Eigen::Infinity>() / (1.0 + stat_scale);

  if (qp.A_eq.rows() > 0) {
    const double scale = 1.0 +
                         std::max((qp.A_eq * z).lpNorm<Eigen::Infinity>(),
                                  qp.b_eq.lpNorm<Eigen::Infinity>());
    res = std::max(
        res, (qp.A_eq * z - qp.b_eq).lpNorm<Eigen::Infinity>() / scale);
  }
  for (Eigen::Index i = 0; i < qp.A_in.rows(); ++i) {
    const double az = qp.A_in.row(i).dot(z);
    const double slack = qp.b_in(i) - az;
    const double pscale = 1.0 + std::max(std::abs(az), std::abs(qp.b_in(i)));
    res = std::max(res, std::max(0.0, -slack) / pscale);  // primal
    res = std::max(res, std::max(0.0, -in_duals(i)) /
                            (1.0 + std::abs(in_duals(i))));  // dual
    res = std::max(res, std::abs(in_duals(i) * slack) /
                            (1.0 + std::abs(in_duals(i)) + std::abs(slack)));
  }
  return res;
}

/// Solve the QP by primal active set from a feasible point z0.
/// Internal routine: assumes z0 satisfies all constraints to tolerance.
///
/// The problem is equilibrated internally — Jacobi scaling of the variables
/// from diag(H), unit-norm constraint rows — so the iteration's tolerances
/// see O(1) data regardless of how the caller scaled the objective. H is
/// factored once; the working set is tracked through an incrementally
/// maintained block [A_w; H^-1 A_w'; S = A_w H^-1 A_w'] so adding or dropping
/// a constraint costs one triangular solve, not a refactorization. At exit
/// the point and multipliers are refined once against the original,
/// unscaled KKT system; the returned certificate is evaluated on the
/// original data.
inline QpSolution solve_from_feasible(const QuadraticProgram& qp, VectorXd z0,
                                      double tol, int max_iter) {
  const Eigen::Index m = qp.vars();
  const Eigen::Index me = qp.A_eq.rows();
  const Eigen::Index mi = qp.A_in.rows();

  // --- Equilibration -------------------------------------------------------
  // Variables: z = D zs with D = diag(dscale). Rows: each constraint row of
  // the scaled problem is normalized, so its dual is 1/rowscale times the
  // original dual.
  MatrixXd Horig = 0.5 * (qp.H + qp.H.transpose());
  const double hdiag_max = std::max(Horig.diagonal().maxCoeff(), 0.0);
  const VectorXd dscale =
      Horig.diagonal()
          .cwiseMax(std::max(1e-12 * hdiag_max, 1e-300))
          .cwiseSqrt()
          .cwiseInverse();

  MatrixXd Hw = dscale.asDiagonal() * Horig * dscale.asDiagonal();
  const VectorXd cs = dscale.cwiseProduct(qp.c);

  MatrixXd A_eq(me, m), A_in(mi, m);
  VectorXd b_eq(me), b_in(mi), eq_rowscale(me), in_rowscale(mi);
  for (Eigen::Index i = 0; i < me; ++i) {
    Eigen::RowVectorXd row = qp.A_eq.row(i).cwiseProduct(dscale.transpose());
    const double n = row.norm();
    eq_rowscale(i) = n > 1e-300 ? 1.0 / n : 1.0;
    A_eq.row(i) = eq_rowscale(i) * row;
    b_eq(i) = eq_rowscale(i) * qp.b_eq(i);
  }
  for (Eigen::Index i = 0; i < mi; ++i) {
    Eigen::RowVectorXd row = qp.A_in.row(i).cwiseProduct(dscale.transpose());
    const double n = row.norm();
    in_rowscale(i) = n > 1e-300 ? 1.0 / n : 1.0;
    A_in.row(i) = in_rowscale(i) * row;
    b_in(i) = in_rowscale(i) * qp.b_in(i);
  }
  VectorXd z = z0.cwiseQuotient(dscale);

  // Factor H; shift only if it is not numerically positive definite.
  Eigen::LLT<MatrixXd> hfac(Hw);
  if (hfac.info() != Eigen::Success) {
    Hw += 1e-10 * std::max(1.0, Hw.norm()) * MatrixXd::Identity(m, m);
    hfac.compute(Hw);
    if (hfac.info() != Eigen::Success)
      throw std::invalid_argument("qp: H is not positive semidefinite");
  }

  std::vector<Eigen::Index> active;  // inequality working set, append order

  // Workspace columns follow [equality rows | active inequality rows].
  MatrixXd Arows(0, m);  // na x m
  MatrixXd HiAt(m, 0);   // m x na, = H^-1 Arows'
  MatrixXd S(0, 0);      // na x na, = Arows H^-1 Arows'

  const auto append_ws = [&](const Eigen::RowVectorXd& a) {
    const Eigen::Index na = Arows.rows();
    const VectorXd hia = hfac.solve(a.transpose());
    Arows.conservativeResize(na + 1, Eigen::NoChange);
    Arows.row(na) = a;
    HiAt.conservativeResize(Eigen::NoChange, na + 1);
    HiAt.col(na) = hia;
    S.conservativeResize(na + 1, na + 1);
    if (na > 0) {
      S.block(0, na, na, 1) = Arows.topRows(na) * hia;
      S.block(na, 0, 1, na) = S.block(0, na, na, 1).transpose().eval();
    }
    S(na, na) = (a * hia)(0);
  };
  const auto remove_ws = [&](Eigen::Index k) {
    const Eigen::Index na = Arows.rows();
    const Eigen::Index tail = na - 1 - k;
    if (tail > 0) {
      Arows.middleRows(k, tail) = Arows.bottomRows(tail).eval();
      HiAt.middleCols(k, tail) = HiAt.rightCols(tail).eval();
      S.middleRows(k, tail) = S.bottomRows(tail).eval();
      S.middleCols(k, tail) = S.rightCols(tail).eval();
    }
    Arows.conservativeResize(na - 1, Eigen::NoChange);
    HiAt.conservativeResize(Eigen::NoChange, na - 1);
    S.conservativeResize(na - 1, na - 1);
  };
  for (Eigen::Index i = 0; i < me; ++i) append_ws(A_eq.row(i));

  QpSolution sol;
  sol.eq_duals = VectorXd::Zero(me);
  sol.in_duals = VectorXd::Zero(mi);

  // Solve the working-set KKT system via the Schur complement; false when the
  // working rows have become numerically dependent. `cancel_scale` records
  // the magnitude of the terms whose difference forms d, so the stationarity
  // test below can distinguish a true step from cancellation noise. `sfac`
  // keeps the factor of the current S for the dependency screen below.
  VectorXd d, lam;
  double cancel_scale = 0.0;
  Eigen::LDLT<MatrixXd> sfac;
  const auto schur_step = [&](const VectorXd& hg) {
    cancel_scale = hg.lpNorm<Eigen::Infinity>();
    if (Arows.rows() == 0) {
      d = -hg;
      lam.resize(0);
      return true;
    }
    sfac.compute(S);
    const double dmax = S.diagonal().cwiseAbs().maxCoeff();
    if (sfac.info() != Eigen::Success ||
        sfac.vectorD().cwiseAbs().minCoeff() <= 1e-12 * std::max(1.0, dmax))
      return false;
    lam = sfac.solve(-(Arows * hg));
    const VectorXd corr = HiAt * lam;
    cancel_scale = std::max(cancel_scale, corr.lpNorm<Eigen::Infinity>());
    d = -hg - corr;
    return true;
  };

  // A row whose bordered Schur pivot would vanish lies in the span of the
  // working set; in exact arithmetic such a row satisfies a.d = 0 and can
  // never block, so treating its rounding noise as a blocker would cycle
  // add / reject / re-add forever. Banned rows are skipped by the ratio test;
  // their gap cannot change while the working set is fixed (a = A_w' xi
  // implies a.z = xi' b_w along every working-set-preserving step), so bans
  // stay valid exactly until the working set changes.
  std::vector<char> banned(static_cast<std::size_t>(mi), 0);

  int it = 0;
  for (; it < max_iter; ++it) {
    const VectorXd grad = Hw * z + cs;
    const VectorXd hg = hfac.solve(grad);
    if (!schur_step(hg)) {
      // Backstop (the screen below keeps the working set independent): drop
      // the most recently added row.
      if (!active.empty()) {
        remove_ws(me + static_cast<Eigen::Index>(active.size()) - 1);
        active.pop_back();
        std::fill(banned.begin(), banned.end(), 0);
        continue;
      }
      break;
    }

    // A step below the cancellation noise of the KKT solve carries no signal:
    // we are already at the working-set optimum, so go straight to the
    // multiplier check (a noise-level d must not move z or add rows).
    const double dinf = d.lpNorm<Eigen::Infinity>();
    const bool d_is_noise = dinf <= 1e-13 * cancel_scale;

    if (!d_is_noise) {
      // z + d is the optimum of the working-set subproblem. Ratio test
      // against the inactive inequalities; smallest index wins ties. The
      // directional threshold is relative to the step size (working rows are
      // unit-norm here). A surviving blocker is screened through its bordered
      // Schur pivot before it may enter; near-dependent candidates are banned
      // and the ratio test rerun without them.
      double alpha = 1.0;
      Eigen::Index blocker = -1;
      VectorXd hia;
      while (true) {
        alpha = 1.0;
        blocker = -1;
        for (Eigen::Index i = 0; i < mi; ++i) {
          if (banned[static_cast<std::size_t>(i)]) continue;
          if (std::find(active.begin(), active.end(), i) != active.end())
            continue;
          const double ad = A_in.row(i).dot(d);
          if (ad > std::max(1e-12, 1e-10 * dinf)) {
            const double gap = b_in(i) - A_in.row(i).dot(z);
            const double a = std::max(0.0, gap) / ad;
            if (a < alpha - 1e-15) {
              alpha = a;
              blocker = i;
            }
          }
        }
        if (blocker < 0) break;

        hia = hfac.solve(A_in.row(blocker).transpose());
        const double ahia = (A_in.row(blocker) * hia)(0);
        double piv = ahia;
        double scale = std::max(1.0, ahia);
        if (Arows.rows() > 0) {
          const VectorXd s = Arows * hia;
          piv -= s.dot(sfac.solve(s));
          scale = std::max(scale, S.diagonal().cwiseAbs().maxCoeff());
        }
        if (piv > 1e-12 * scale) break;  // independent: commit this blocker
        banned[static_cast<std::size_t>(blocker)] = 1;
      }

      if (blocker >= 0) {
        z += alpha * d;
        active.push_back(blocker);
        append_ws(A_in.row(blocker));
        std::fill(banned.begin(), banned.end(), 0);
        continue;
      }

      // Full unblocked step to the working-set optimum.
      z += d;
    }

    // The multipliers of the subproblem are valid at its optimum (the step
    // direction lies in the constraint null space). Check them against a
    // threshold relative to the multiplier scale, so rounding noise on a
    // degenerate constraint does not trigger an endless drop/re-add cycle.
    const double lam_scale =
        lam.size() > 0 ? lam.lpNorm<Eigen::Infinity>() : 0.0;
    Eigen::Index worst = -1;
    double most_negative = -tol * (1.0 + lam_scale);
    for (std::size_t j = 0; j < active.size(); ++j) {
      const double lj = lam(me + static_cast<Eigen::Index>(j));
      if (lj < most_negative) {
        most_negative = lj;
        worst = static_cast<Eigen::Index>(j);
      }
    }
    if (worst < 0) break;  // KKT point
    remove_ws(me + worst);
    active.erase(active.begin() + worst);
    std::fill(banned.begin(), banned.end(), 0);
  }

  sol.iterations = it;

  // Recompute the multipliers for the final working set, then apply one step
  // of iterative refinement on the working-set KKT system measured against
  // the ORIGINAL (unscaled) data. The refinement removes the drift the
  // active-set walk accumulates in z and the rounding in the multipliers.
  VectorXd z_orig = z.cwiseProduct(dscale);
  VectorXd eq_d = VectorXd::Zero(me);
  VectorXd in_d = VectorXd::Zero(mi);
  {
    const VectorXd grad = Hw * z + cs;
    const VectorXd hg = hfac.solve(grad);
    if (schur_step(hg) && Arows.rows() > 0) {
      for (int pass = 0; pass < 2; ++pass) {
        // Original-data duals for the current lam.
        eq_d = lam.head(me).cwiseProduct(eq_rowscale);
        for (std::size_t j = 0; j < active.size(); ++j)
          in_d(active[j]) = lam(me + static_cast<Eigen::Index>(j)) *
                            in_rowscale(active[j]);

        // Residuals of the working-set KKT system on original data.
        VectorXd r1 = -(Horig * z_orig + qp.c);
        if (me > 0) r1 -= qp.A_eq.transpose() * eq_d;
        for (std::size_t j = 0; j < active.size(); ++j)
          r1 -= qp.A_in.row(active[j]).transpose() * in_d(active[j]);
        VectorXd r2(me + static_cast<Eigen::Index>(active.size()));
        if (me > 0) r2.head(me) = qp.b_eq - qp.A_eq * z_orig;
        for (std::size_t j = 0; j < active.size(); ++j)
          r2(me + static_cast<Eigen::Index>(j)) =
              qp.b_in(active[j]) - qp.A_in.row(active[j]).dot(z_orig);

        // Solve the correction through the scaled machinery:
        //   H dz + A_w' dl = r1,  A_w dz = r2.
        const VectorXd r1s = dscale.cwiseProduct(r1);
        VectorXd r2s(r2.size());
        r2s.head(me) = r2.head(me).cwiseProduct(eq_rowscale);
        for (std::size_t j = 0; j < active.size(); ++j)
          r2s(me + static_cast<Eigen::Index>(j)) =
              r2(me + static_cast<Eigen::Index>(j)) * in_rowscale(active[j]);

        const VectorXd hr = hfac.solve(r1s);
        Eigen::LDLT<MatrixXd> sfac(S);
        const VectorXd dl = sfac.solve(Arows * hr - r2s);
        const VectorXd dz = hr - HiAt * dl;
        z += dz;
        lam += dl;
        z_orig = z.cwiseProduct(dscale);
      }
      eq_d = lam.head(me).cwiseProduct(eq_rowscale);
      in_d.setZero();
      for (std::size_t j = 0; j < active.size(); ++j)
        in_d(active[j]) = std::max(
            0.0, lam(me + static_cast<Eigen::Index>(j)) * in_rowscale(active[j]));
    }
  }
  sol.z = z_orig;
  sol.eq_duals = eq_d;
  sol.in_duals = in_d;
  sol.kkt_residual = kkt_residual(qp, sol.z, sol.eq_duals, sol.in_duals);
  sol.status =
      sol.kkt_residual <= tol ? QpStatus::optimal : QpStatus::max_iter;
  return sol;
}

/// Full solve: validates, finds a feasible start (phase one) when z0 is
/// absent or infeasible, then runs the active-set iteration.
/// Defaults: tol = 1e-8, max_iter = 10 m + 200 (pass 0 to use the default).
inline QpSolution solve(const QuadraticProgram& qp, double tol = 1e-8,
                        int max_iter = 0,
                        const std::optional<VectorXd>& z0 = std::nullopt) {
  qp.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("qp: tol must be positive");
  const Eigen::Index m = qp.vars();
  const Eigen::Index me = qp.A_eq.rows();
  const Eigen::Index mi = qp.A_in.rows();
  if (max_iter <= 0) max_iter = static_cast<int>(10 * m) + 200;

  const double feas_scale =
      1.0 + (mi > 0 ? qp.b_in.lpNorm<Eigen::Infinity>() : 0.0) +
      (me > 0 ? qp.b_eq.lpNorm<Eigen::Infinity>() : 0.0);
  auto violation = [&](const VectorXd& z) {
    double v = 0.0;
    if (me > 0) v = (qp.A_eq * z - qp.b_eq).lpNorm<Eigen::Infinity>();
    if (mi > 0) v = std::max(v, (qp.A_in * z - qp.b_in).maxCoeff());
    return v;
  };

  VectorXd zstart;
  if (z0 && z0->size() == m && violation(*z0) <= 1e-9 * feas_scale) {
    zstart = *z0;
  } else {
    // Least-squares point for the equalities.
    VectorXd zbar = VectorXd::Zero(m);
    if (me > 0) {
      zbar = qp.A_eq.colPivHouseholderQr().solve(qp.b_eq);
      if ((qp.A_eq * zbar - qp.b_eq).lpNorm<Eigen::Infinity>() >
          1e-8 * feas_scale) {
        QpSolution sol;
        sol.z = zbar;
        sol.status = QpStatus::infeasible;
        return sol;
      }
    }
    double viol = mi > 0 ? std::max(0.0, (qp.A_in * zbar - qp.b_in).maxCoeff())
                         : 0.0;
    if (viol <= 1e-9 * feas_scale) {
      zstart = zbar;
    } else {
      // Phase one in (z, s): relax every inequality by a common slack s >= 0
      // and drive s to zero. Feasible start: (zbar, viol + 1).
      QpSolution ph;
      double mu = 1e-6;
      for (int attempt = 0; attempt < 3; ++attempt, mu *= 1e-4) {
        QuadraticProgram p1;
        p1.H = MatrixXd::Zero(m + 1, m + 1);
        p1.H.topLeftCorner(m, m) = mu * MatrixXd::Identity(m, m);
        p1.H(m, m) = 1.0;
        p1.c = VectorXd::Zero(m + 1);
        p1.c(m) = 1.0;
        p1.A_eq = MatrixXd::Zero(me, m + 1);
        if (me > 0) p1.A_eq.leftCols(m) = qp.A_eq;
        p1.b_eq = qp.b_eq;
        p1.A_in = MatrixXd::Zero(mi + 1, m + 1);
        p1.A_in.topLeftCorner(mi, m) = qp.A_in;
        p1.A_in.col(m).head(mi).setConstant(-1.0);
        p1.A_in(mi, m) = -1.0;  // s >= 0
        p1.b_in = VectorXd::Zero(mi + 1);
        p1.b_in.head(mi) = qp.b_in;

        VectorXd zs(m + 1);
        zs.head(m) = zbar;
        zs(m) = viol + 1.0;
        ph = solve_from_feasible(p1, zs, std::min(tol, 1e-9),
                                 static_cast<int>(10 * (m + 1)) + 200);
        if (violation(ph.z.head(m)) <= 1e-9 * feas_scale) break;
      }
      zstart = ph.z.head(m);
      if (violation(zstart) > 1e-7 * feas_scale) {
        QpSolution sol;
        sol.z = zstart;
        sol.status = QpStatus::infeasible;
        return sol;
      }
    }
  }

  return solve_from_feasible(qp, zstart, tol, max_iter);
}

/// Reference solver: enumerate every subset of inequality constraints as a
/// candidate active set, solve the resulting KKT system, and keep the best
/// feasible candidate with nonnegative multipliers.  Exponential in the number
/// of inequalities — intended as an oracle for small test problems only.
inline QpSolution solve_by_enumeration(const QuadraticProgram& qp,
                                       double tol = 1e-8) {
  qp.validate();
  const Eigen::Index m = qp.vars();
  const Eigen::Index me = qp.A_eq.rows();
  const Eigen::Index mi = qp.A_in.rows();
  if (mi > 20)
    throw std::invalid_argument("enumeration oracle limited to 20 inequalities");

  QpSolution best;
  best.status = QpStatus::infeasible;
  double best_obj = std::numeric_limits<double>::infinity();

  const double feas_tol =
      tol * (1.0 + std::max(qp.b_eq.size() ? qp.b_eq.lpNorm<Eigen::Infinity>() : 0.0,
                            qp.b_in.size() ? qp.b_in.lpNorm<Eigen::Infinity>() : 0.0));

  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << mi); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < mi; ++i)
      if (mask & (std::uint64_t{1} << i)) act.push_back(i);
    const Eigen::Index na = me + static_cast<Eigen::Index>(act.size());

    MatrixXd kkt = MatrixXd::Zero(m + na, m + na);
    kkt.topLeftCorner(m, m) = qp.H;
    VectorXd rhs(m + na);
    rhs.head(m) = -qp.c;
    for (Eigen::Index i = 0; i < me; ++i) {
      kkt.block(m + i, 0, 1, m) = qp.A_eq.row(i);
      kkt.block(0, m + i, m, 1) = qp.A_eq.row(i).transpose();
      rhs(m + i) = qp.b_eq(i);
    }
    for (std::size_t j = 0; j < act.size(); ++j) {
      const Eigen::Index row = m + me + static_cast<Eigen::Index>(j);
      kkt.block(row, 0, 1, m) = qp.A_in.row(act[j]);
      kkt.block(0, row, m, 1) = qp.A_in.row(act[j]).transpose();
      rhs(row) = qp.b_in(act[j]);
    }

    const Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const VectorXd sol = lu.solve(rhs);
    const VectorXd z = sol.head(m);

    bool ok = true;
    if (me > 0 &&
        (qp.A_eq * z - qp.b_eq).lpNorm<Eigen::Infinity>() > feas_tol)
      ok = false;
    for (Eigen::Index i = 0; ok && i < mi; ++i)
      if (qp.A_in.row(i).dot(z) > qp.b_in(i) + feas_tol) ok = false;
    for (std::size_t j = 0; ok && j < act.size(); ++j)
      if (sol(m + me + static_cast<Eigen::Index>(j)) < -tol) ok = false;
    if (!ok) continue;

    const double obj = 0.5 * z.dot(qp.H * z) + qp.c.dot(z);
    if (best.status != QpStatus::optimal ||
        obj < best_obj - 1e-14 * (1.0 + std::abs(best_obj))) {
      best_obj = obj;
      best.z = z;
      best.eq_duals = sol.segment(m, me);
      best.in_duals = VectorXd::Zero(mi);
      for (std::size_t j = 0; j < act.size(); ++j)
        best.in_duals(act[j]) =
            std::max(0.0, sol(m + me + static_cast<Eigen::Index>(j)));
      best.status = QpStatus::optimal;
      best.kkt_residual =
          kkt_residual(qp, best.z, best.eq_duals, best.in_duals);
    }
  }
  return best;
}

/// Random strictly convex 2-variable QP with a few box/halfspace constraints;
/// used by the self-check battery and the solver test suite.
inline QuadraticProgram random_small_qp(std::uint64_t seed) {
  QuadraticProgram qp;
  auto normal = [&](Eigen::Index i) { return rng::standard_normal(seed, i); };

  MatrixXd L(2, 2);
  L << 1.0 + std::abs(normal(0)), 0.0, 0.5 * normal(1),
      1.0 + std::abs(normal(2));
  qp.H = L * L.transpose();
  qp.c = VectorXd(2);
  qp.c << 3.0 * normal(3), 3.0 * normal(4);

  // Box around the origin plus two random halfspaces through offset points;
  // the box keeps every instance bounded and feasible.
  const double bx = 1.0 + std::abs(normal(5));
  const double by = 1.0 + std::abs(normal(6));
  qp.A_in = MatrixXd(6, 2);
  qp.b_in = VectorXd(6);
  qp.A_in << 1, 0, -1, 0, 0, 1, 0, -1, normal(7), normal(8), normal(9),
      normal(10);
  qp.b_in << bx, bx, by, by, 0.3 * std::abs(normal(11)) + 0.05,
      0.3 * std::abs(normal(12)) + 0.05;

  if ((seed % 5) == 0) {  // occasionally add one equality through the box
    qp.A_eq = MatrixXd(1, 2);
    qp.A_eq << 1.0, 0.7 * normal(13);
    qp.b_eq = VectorXd::Constant(1, 0.2 * normal(14));
  }
  if ((seed % 7) == 3) {  // occasionally contradict the box -> infeasible
    qp.A_in.conservativeResize(7, 2);
    qp.b_in.conservativeResize(7);
    qp.A_in.row(6) << 1.0, 0.0;
    qp.b_in(6) = -bx - 1.0;
  }
  return qp;
}

}  // namespace ivdeepc
