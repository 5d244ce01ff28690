#pragma once

// Receding-horizon controllers over recorded data: nominal DeePC (decision
// variable g over data columns), the instrumental-variable / subspace /
// random-averaging variants (condensed to a predictor-gain QP over the
// future inputs), and the closed-loop runner implementing the
// excite-then-control protocol.
//
// Per step: the newest measurement is pushed into the past window, the
// variant's QP is assembled and solved, the first input block is applied
// (defensively clamped to the box and rate bounds so constraint compliance
// is exact), and the buffers advance.

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lti_sim.hpp"
#include "predictor.hpp"
#include "qp_solver.hpp"

namespace ivdeepc {

enum class Variant { nominal, iv, spc, random_avg };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::nominal: return "nominal";
    case Variant::iv: return "iv";
    case Variant::spc: return "spc";
    case Variant::random_avg: return "random_avg";
  }
  return "?";
}

struct ControllerConfig {
  Eigen::Index p = 20;     ///< past-window length
  Eigen::Index f = 20;     ///< prediction horizon
  Eigen::Index Nbar = 500; ///< data-matrix width
  double q_weight = 1.0;   ///< output weight when Q is not given explicitly
  double r_weight = 1e-4;  ///< input weight when R is not given explicitly
  MatrixXd Q;              ///< optional explicit l*f x l*f output weight
  MatrixXd R;              ///< optional explicit r*f x r*f input weight
  double lambda_g = 1e-6;  ///< ||g||^2 weight, nominal variant only
  double ridge_rel = 1e-8; ///< relative ridge for the compressed solves
  double u_max = 15.0;     ///< |u| bound
  double du_max = 3.75;    ///< |u_{k+1} - u_k| bound
  Variant variant = Variant::iv;
  std::uint64_t seed = 0;  ///< random-averaging instrument seed
  bool iv_raw_form = false;  ///< keep g-hat as a decision variable
                             ///< (equivalence audits; condensed otherwise)

  MatrixXd Qmat(Eigen::Index lf) const {
    if (Q.size() > 0) {
      if (Q.rows() != lf || Q.cols() != lf)
        throw std::invalid_argument("config: Q has wrong dimensions");
      return Q;
    }
    return q_weight * MatrixXd::Identity(lf, lf);
  }
  MatrixXd Rmat(Eigen::Index rf) const {
    if (R.size() > 0) {
      if (R.rows() != rf || R.cols() != rf)
        throw std::invalid_argument("config: R has wrong dimensions");
      return R;
    }
    return r_weight * MatrixXd::Identity(rf, rf);
  }
};

/// Rolling past window plus the previously applied input. Buffers hold
/// exactly p samples each, oldest first.
struct ControllerState {
  VectorXd past_u;  ///< r*p
  VectorXd past_y;  ///< l*p
  VectorXd u_prev;  ///< r
  Eigen::Index r = 1, l = 1;

  void push_u(const VectorXd& u) {
    past_u.head(past_u.size() - r) = past_u.tail(past_u.size() - r).eval();
    past_u.tail(r) = u;
  }
  void push_y(const VectorXd& y) {
    past_y.head(past_y.size() - l) = past_y.tail(past_y.size() - l).eval();
    past_y.tail(l) = y;
  }
  VectorXd window() const {
    VectorXd w(past_u.size() + past_y.size());
    w << past_u, past_y;
    return w;
  }
};

namespace detail {

/// Box and rate rows over the future-input block of a decision vector:
/// |u_i| <= u_max, |u_0 - u_prev| <= du_max, |u_i - u_{i-1}| <= du_max.
/// `offset` locates the input block inside the decision vector of width m.
inline void input_constraint_rows(const ControllerConfig& cfg, Eigen::Index r,
                                  Eigen::Index m, Eigen::Index offset,
                                  const VectorXd& u_prev, MatrixXd& A_in,
                                  VectorXd& b_in) {
  const Eigen::Index f = cfg.f;
  const Eigen::Index rows = 2 * r * f + 2 * r * f;  // box + rate
  A_in = MatrixXd::Zero(rows, m);
  b_in = VectorXd::Zero(rows);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < f; ++i)
    for (Eigen::Index ch = 0; ch < r; ++ch) {
      A_in(row, offset + i * r + ch) = 1.0;
      b_in(row++) = cfg.u_max;
      A_in(row, offset + i * r + ch) = -1.0;
      b_in(row++) = cfg.u_max;
    }
  for (Eigen::Index i = 0; i < f; ++i)
    for (Eigen::Index ch = 0; ch < r; ++ch) {
      A_in(row, offset + i * r + ch) = 1.0;
      if (i > 0) A_in(row, offset + (i - 1) * r + ch) = -1.0;
      b_in(row++) = cfg.du_max + (i == 0 ? u_prev(ch) : 0.0);
      A_in(row, offset + i * r + ch) = -1.0;
      if (i > 0) A_in(row, offset + (i - 1) * r + ch) = 1.0;
      b_in(row++) = cfg.du_max - (i == 0 ? u_prev(ch) : 0.0);
    }
}

}  // namespace detail

/// Nominal DeePC quadratic program. Decision vector [g; u_fut]; the future
/// outputs are eliminated through Y_fut = Y_f g. Equalities pin the past
/// window and couple U_f g = u_fut; cost is tracking + input effort +
/// lambda_g ||g||^2.
inline QuadraticProgram assemble_nominal(const ControllerConfig& cfg,
                                         const DataMatrices& dm,
                                         const ControllerState& state,
                                         const VectorXd& reference) {
  if (!dm.persistency_feasible())
    throw std::invalid_argument(
        "assemble_nominal: Nbar below the persistency requirement");
  const Eigen::Index r = dm.r(), l = dm.l();
  const Eigen::Index nu = r * cfg.f, ng = dm.Nbar;
  const Eigen::Index m = ng + nu;
  if (reference.size() != l * cfg.f)
    throw std::invalid_argument("assemble_nominal: reference length");
  const MatrixXd Q = cfg.Qmat(l * cfg.f);
  const MatrixXd R = cfg.Rmat(nu);

  QuadraticProgram qp;
  qp.H = MatrixXd::Zero(m, m);
  qp.H.topLeftCorner(ng, ng) =
      2.0 * (dm.Y_f.transpose() * Q * dm.Y_f +
             cfg.lambda_g * MatrixXd::Identity(ng, ng));
  qp.H.bottomRightCorner(nu, nu) = 2.0 * R;
  qp.c = VectorXd::Zero(m);
  qp.c.head(ng) = -2.0 * dm.Y_f.transpose() * Q * reference;

  const Eigen::Index npast = (r + l) * cfg.p;
  qp.A_eq = MatrixXd::Zero(npast + nu, m);
  qp.A_eq.topLeftCorner(r * cfg.p, ng) = dm.U_p;
  qp.A_eq.block(r * cfg.p, 0, l * cfg.p, ng) = dm.Y_p;
  qp.A_eq.bottomLeftCorner(nu, ng) = dm.U_f;
  qp.A_eq.bottomRightCorner(nu, nu) = -MatrixXd::Identity(nu, nu);
  qp.b_eq = VectorXd::Zero(npast + nu);
  qp.b_eq.head(npast) = state.window();

  detail::input_constraint_rows(cfg, r, m, ng, state.u_prev, qp.A_in, qp.b_in);
  return qp;
}

/// Condensed QP over the future inputs only, using predictor gains P:
/// predicted outputs are P_past * window + P_fut * u_fut.
inline QuadraticProgram assemble_condensed(const ControllerConfig& cfg,
                                           const PredictorModel& model,
                                           const ControllerState& state,
                                           const VectorXd& reference) {
  if (!model.has_gains)
    throw std::invalid_argument("assemble_condensed: model carries no gains");
  const Eigen::Index nu = model.r * cfg.f;
  const MatrixXd Q = cfg.Qmat(model.l * cfg.f);
  const MatrixXd R = cfg.Rmat(nu);
  const MatrixXd Pf = model.P_fut();
  const VectorXd bias = model.P_past() * state.window() - reference;

  QuadraticProgram qp;
  qp.H = 2.0 * (Pf.transpose() * Q * Pf + R);
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();
  qp.c = 2.0 * Pf.transpose() * Q * bias;
  detail::input_constraint_rows(cfg, model.r, nu, 0, state.u_prev, qp.A_in,
                                qp.b_in);
  return qp;
}

/// Raw compressed-variable QP: decision vector [g_hat; u_fut] with the
/// compressed characteristic equation W g_hat = [window; u_fut] kept as
/// equality rows. The g-hat cost block 2 Yc' Q Yc is rank deficient (rank
/// l*f at most), so a small relative ridge makes the Hessian genuinely
/// positive definite for the solver's factorization; g_hat is pinned by the
/// equalities whenever W is invertible, and at this level the ridge moves
/// the input solution by less than the solve certificate tolerance.
inline QuadraticProgram assemble_raw(const ControllerConfig& cfg,
                                     const PredictorModel& model,
                                     const ControllerState& state,
                                     const VectorXd& reference) {
  const Eigen::Index q = model.W.cols();
  const Eigen::Index nu = model.r * cfg.f;
  const Eigen::Index m = q + nu;
  const MatrixXd Q = cfg.Qmat(model.l * cfg.f);
  const MatrixXd R = cfg.Rmat(nu);

  QuadraticProgram qp;
  qp.H = MatrixXd::Zero(m, m);
  MatrixXd Hg = 2.0 * model.Yc.transpose() * Q * model.Yc;
  Hg += (1e-8 * Hg.trace() / static_cast<double>(q) + 1e-300) *
        MatrixXd::Identity(q, q);
  qp.H.topLeftCorner(q, q) = 0.5 * (Hg + Hg.transpose());
  qp.H.bottomRightCorner(nu, nu) = 2.0 * R;
  qp.c = VectorXd::Zero(m);
  qp.c.head(q) = -2.0 * model.Yc.transpose() * Q * reference;

  const Eigen::Index npast = model.past_cols();
  qp.A_eq = MatrixXd::Zero(npast + nu, m);
  qp.A_eq.leftCols(q) = model.W;
  qp.A_eq.bottomRightCorner(nu, nu) = -MatrixXd::Identity(nu, nu);
  qp.b_eq = VectorXd::Zero(npast + nu);
  qp.b_eq.head(npast) = state.window();

  detail::input_constraint_rows(cfg, model.r, m, q, state.u_prev, qp.A_in,
                                qp.b_in);
  return qp;
}

struct StepResult {
  VectorXd u;  ///< applied input (clamped)
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// One receding-horizon step. Pushes the newest measurement, assembles and
/// solves the variant's QP, applies (and defensively clamps) the first
/// input block, and advances the buffers.
/// For the nominal variant pass the data matrices; otherwise the model.
inline StepResult step(const ControllerConfig& cfg, ControllerState& state,
                       const DataMatrices* dm, const PredictorModel* model,
                       const VectorXd& ref_window,
                       const VectorXd& measurement) {
  state.push_y(measurement);

  QuadraticProgram qp;
  Eigen::Index u_offset = 0;
  std::optional<VectorXd> z0;
  if (cfg.variant == Variant::nominal) {
    if (dm == nullptr)
      throw std::invalid_argument("step: nominal variant needs data matrices");
    qp = assemble_nominal(cfg, *dm, state, ref_window);
    u_offset = dm->Nbar;
  } else if (cfg.iv_raw_form) {
    if (model == nullptr)
      throw std::invalid_argument("step: variant needs a predictor model");
    qp = assemble_raw(cfg, *model, state, ref_window);
    u_offset = model->W.cols();
    // Feasible start: hold the clamped previous input and back-solve the
    // compressed equalities for g_hat, so no slack phase is needed on the
    // badly mixed row scales of [W | -I].
    VectorXd u0(state.r * cfg.f);
    for (Eigen::Index i = 0; i < cfg.f; ++i)
      for (Eigen::Index ch = 0; ch < state.r; ++ch)
        u0(i * state.r + ch) =
            std::clamp(state.u_prev(ch), -cfg.u_max, cfg.u_max);
    VectorXd rhs(model->W.rows());
    rhs << state.window(), u0;
    Eigen::ColPivHouseholderQR<MatrixXd> wqr(model->W);
    VectorXd ghat = wqr.solve(rhs);
    ghat += wqr.solve(rhs - model->W * ghat);
    VectorXd zs(u_offset + u0.size());
    zs << ghat, u0;
    z0 = std::move(zs);
  } else {
    if (model == nullptr)
      throw std::invalid_argument("step: variant needs a predictor model");
    qp = assemble_condensed(cfg, *model, state, ref_window);
    // Constant held input is feasible for the box and rate rows.
    VectorXd u0(qp.vars());
    for (Eigen::Index i = 0; i < cfg.f; ++i)
      for (Eigen::Index ch = 0; ch < state.r; ++ch)
        u0(i * state.r + ch) =
            std::clamp(state.u_prev(ch), -cfg.u_max, cfg.u_max);
    z0 = u0;
  }

  const QpSolution sol = solve(qp, 1e-8, 0, z0);
  if (sol.status == QpStatus::infeasible)
    throw std::runtime_error("step: QP reported infeasible constraints");

  StepResult res;
  res.status = sol.status;
  res.iterations = sol.iterations;
  res.kkt_residual = sol.kkt_residual;
  res.u = sol.z.segment(u_offset, state.r);
  // Exact constraint compliance regardless of solver tolerance.
  for (Eigen::Index ch = 0; ch < state.r; ++ch) {
    double v = std::clamp(res.u(ch), -cfg.u_max, cfg.u_max);
    v = std::clamp(v, state.u_prev(ch) - cfg.du_max,
                   state.u_prev(ch) + cfg.du_max);
    res.u(ch) = v;
  }

  state.push_u(res.u);
  state.u_prev = res.u;
  return res;
}

struct RunDiagnostics {
  int n_optimal = 0;
  int n_max_iter = 0;
  long total_iterations = 0;
  double max_kkt_residual = 0.0;   ///< over all steps, any exit status
  double max_certified_kkt = 0.0;  ///< over steps that reported optimal
  double solve_ms = 0.0;
};

struct RunResult {
  Trajectory traj;      ///< full excitation + control record
  MatrixXd applied;     ///< r x T_control applied inputs
  RunDiagnostics diag;
  Eigen::Index T_excitation = 0;
};

/// Full protocol: excite the plant open-loop with the provided inputs for
/// T_excitation samples, freeze the data matrices from the last
/// Nbar + p + f - 1 excitation samples, then run the receding-horizon
/// controller for T_control steps. `reference` must extend f - 1 samples
/// past T_control (horizon preview); `innovations` must cover both phases.
inline RunResult run_closed_loop(const SystemRealization& sys,
                                 const ControllerConfig& cfg,
                                 const MatrixXd& u_excitation,
                                 const VectorXd& reference,
                                 const MatrixXd& innovations,
                                 Eigen::Index T_control) {
  sys.validate();
  const Eigen::Index r = sys.r(), l = sys.l();
  const Eigen::Index T_exc = u_excitation.cols();
  const Eigen::Index T_total = T_exc + T_control;
  const Eigen::Index N = cfg.Nbar + cfg.p + cfg.f - 1;
  if (innovations.cols() < T_total)
    throw std::invalid_argument("run_closed_loop: innovations too short");
  if (reference.size() < T_control + cfg.f - 1)
    throw std::invalid_argument(
        "run_closed_loop: reference must cover the final horizon");
  if (T_exc < N || T_exc < cfg.p + 1)
    throw std::invalid_argument(
        "run_closed_loop: excitation shorter than the data window");

  MatrixXd u_hist(r, T_total), y_hist(l, T_total);
  VectorXd x = VectorXd::Zero(sys.n());
  for (Eigen::Index k = 0; k < T_exc; ++k) {
    u_hist.col(k) = u_excitation.col(k);
    y_hist.col(k) = sys.C * x + sys.D * u_hist.col(k) + innovations.col(k);
    x = sys.A * x + sys.B * u_hist.col(k) + sys.K * innovations.col(k);
  }

  const Trajectory exc{u_hist.leftCols(T_exc), y_hist.leftCols(T_exc),
                       innovations.leftCols(T_exc)};
  const DataMatrices dm =
      build_data_matrices(exc, T_exc - N, cfg.p, cfg.f, cfg.Nbar);

  PredictorModel model;
  switch (cfg.variant) {
    case Variant::iv:
      model = compress(dm, iv_instrument(dm), cfg.ridge_rel);
      break;
    case Variant::spc:
      model = spc_fit(dm, cfg.ridge_rel);
      break;
    case Variant::random_avg:
      model = compress(dm, random_instrument(dm.q(), dm.Nbar, cfg.seed),
                       cfg.ridge_rel);
      break;
    case Variant::nominal:
      break;
  }

  ControllerState state;
  state.r = r;
  state.l = l;
  state.past_u.resize(r * cfg.p);
  state.past_y.resize(l * cfg.p);
  for (Eigen::Index j = 0; j < cfg.p; ++j) {
    state.past_u.segment(j * r, r) = u_hist.col(T_exc - cfg.p + j);
    state.past_y.segment(j * l, l) = y_hist.col(T_exc - cfg.p - 1 + j);
  }
  state.u_prev = u_hist.col(T_exc - 1);

  RunResult out;
  out.applied.resize(r, T_control);
  out.T_excitation = T_exc;
  const auto t0 = std::chrono::steady_clock::now();
  for (Eigen::Index k = 0; k < T_control; ++k) {
    const Eigen::Index t = T_exc + k;
    const VectorXd ref_window = reference.segment(k, cfg.f);
    const VectorXd measurement = y_hist.col(t - 1);
    const StepResult sr =
        step(cfg, state, cfg.variant == Variant::nominal ? &dm : nullptr,
             cfg.variant == Variant::nominal ? nullptr : &model, ref_window,
             measurement);
    u_hist.col(t) = sr.u;
    y_hist.col(t) = sys.C * x + sys.D * sr.u + innovations.col(t);
    x = sys.A * x + sys.B * sr.u + sys.K * innovations.col(t);
    out.applied.col(k) = sr.u;
    out.diag.total_iterations += sr.iterations;
    out.diag.max_kkt_residual =
        std::max(out.diag.max_kkt_residual, sr.kkt_residual);
    if (sr.status == QpStatus::optimal) {
      ++out.diag.n_optimal;
      out.diag.max_certified_kkt =
          std::max(out.diag.max_certified_kkt, sr.kkt_residual);
    } else {
      ++out.diag.n_max_iter;
    }
  }
  out.diag.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                t0)
          .count();
  out.traj = {std::move(u_hist), std::move(y_hist),
              innovations.leftCols(T_total)};
  return out;
}

}  // namespace ivdeepc
