#pragma once

// Data matrices, instrumental-variable compression, the subspace
// least-squares predictor, and the executable DeePC/SPC equivalence check.
//
// The characteristic equation picks a combination g of recorded trajectory
// columns matching a past window and a future input; multiplying both sides
// by an instrument Z^T/Nbar compresses the system to q equations whose noise
// contribution averages out as Nbar grows. Solving the compressed system for
// its coefficient matrix directly yields the subspace predictor; the two
// views are algebraically identical, which assert_deepc_spc_equivalence
// verifies numerically.

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>

#include "hankel.hpp"
#include "lti_sim.hpp"
#include "rng.hpp"

namespace ivdeepc {

/// The four block-Hankel data matrices sharing width Nbar. Past blocks start
/// at trajectory index i, future blocks at i + p.
struct DataMatrices {
  MatrixXd U_p;  ///< r*p x Nbar
  MatrixXd Y_p;  ///< l*p x Nbar
  MatrixXd U_f;  ///< r*f x Nbar
  MatrixXd Y_f;  ///< l*f x Nbar
  Eigen::Index p = 0;
  Eigen::Index f = 0;
  Eigen::Index Nbar = 0;

  Eigen::Index r() const { return U_p.rows() / p; }
  Eigen::Index l() const { return Y_p.rows() / p; }
  /// Rows of the stacked data matrix [U_p; Y_p; U_f].
  Eigen::Index q() const { return U_p.rows() + Y_p.rows() + U_f.rows(); }
  /// Column width needed to parameterize every length-f continuation.
  bool persistency_feasible() const { return Nbar >= q(); }

  /// Row-stack [U_p; Y_p; U_f] shared by several constructions.
  MatrixXd stacked_past_future_inputs() const {
    MatrixXd Z(q(), Nbar);
    Z << U_p, Y_p, U_f;
    return Z;
  }
};

/// How the compression matrix Z is chosen.
enum class InstrumentKind {
  po_moesp,          ///< Z = [U_p; Y_p; U_f], correlated with data, not noise
  random_averaging,  ///< Z i.i.d. standard normal (baseline)
  identity           ///< Z = I (no compression; nominal DeePC recovered)
};

/// Compression matrix with provenance tag.
struct Instrument {
  MatrixXd Z;  ///< q x Nbar
  InstrumentKind kind;
  Eigen::Index q() const { return Z.rows(); }
};

/// Compressed data plus (optionally) the explicit predictor gains.
struct PredictorModel {
  MatrixXd W;       ///< ((r+l)p + r*f) x q, equals [U_p;Y_p;U_f] Z^T / Nbar
  MatrixXd Yc;      ///< l*f x q, equals Y_f Z^T / Nbar
  MatrixXd P;       ///< l*f x ((r+l)p + r*f) gains [P_past | P_fut]
  bool has_gains = false;
  double ridge = 0.0;  ///< relative ridge used when computing P
  Eigen::Index p = 0, f = 0, r = 0, l = 0;

  Eigen::Index past_cols() const { return (r + l) * p; }
  MatrixXd P_past() const { return P.leftCols(past_cols()); }
  MatrixXd P_fut() const { return P.rightCols(r * f); }
};

/// Slice a trajectory into the four data matrices; consumes
/// Nbar + p + f - 1 samples starting at index i.
inline DataMatrices build_data_matrices(const Trajectory& traj, Eigen::Index i,
                                        Eigen::Index p, Eigen::Index f,
                                        Eigen::Index Nbar) {
  if (p < 1 || f < 1 || Nbar < 1)
    throw std::invalid_argument("build_data_matrices: bad window sizes");
  if (i < 0 || i + p + f + Nbar - 2 >= traj.T())
    throw std::invalid_argument("build_data_matrices: insufficient data");
  const Eigen::Index ip = i + p;
  return {block_hankel(traj.u, i, p, Nbar).data,
          block_hankel(traj.y, i, p, Nbar).data,
          block_hankel(traj.u, ip, f, Nbar).data,
          block_hankel(traj.y, ip, f, Nbar).data,
          p, f, Nbar};
}

/// The data-built instrument: Z = [U_p; Y_p; U_f] (a PO-MOESP variant).
inline Instrument iv_instrument(const DataMatrices& dm) {
  return {dm.stacked_past_future_inputs(), InstrumentKind::po_moesp};
}

/// Random-averaging baseline: q x Nbar i.i.d. standard normal entries.
inline Instrument random_instrument(Eigen::Index q, Eigen::Index Nbar,
                                    std::uint64_t seed) {
  if (q < 1 || Nbar < 1)
    throw std::invalid_argument("random_instrument: bad dimensions");
  MatrixXd Z(q, Nbar);
  std::uint64_t idx = 0;
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = 0; b < Nbar; ++b)
      Z(a, b) = rng::standard_normal(seed, idx++);
  return {std::move(Z), InstrumentKind::random_averaging};
}

/// Identity instrument (no compression).
inline Instrument identity_instrument(Eigen::Index Nbar) {
  return {MatrixXd::Identity(Nbar, Nbar), InstrumentKind::identity};
}

/// Which factorization backs a regularized Gram solve. Two routes exist so
/// tests can pin numerical agreement between independent paths.
enum class SolveRoute { llt, qr };

/// Solve (G + eps_abs*I) X = Rhs for symmetric PSD G. The system is Jacobi-
/// equilibrated before factorization and polished with iterative refinement
/// whose residuals are accumulated in extended precision, so the forward
/// error lands near roundoff instead of cond*eps and independent routes
/// agree to ~1e-13 even for Grams with condition numbers around 1e10.
/// Throws std::runtime_error when the regularized matrix is numerically
/// singular (e.g. eps_abs = 0 on rank-deficient noiseless data).
inline MatrixXd solve_gram_ridge(const MatrixXd& G, const MatrixXd& Rhs,
                                 double eps_abs,
                                 SolveRoute route = SolveRoute::llt) {
  if (G.rows() != G.cols() || G.rows() != Rhs.rows())
    throw std::invalid_argument("solve_gram_ridge: dimension mismatch");
  const Eigen::Index q = G.rows();
  MatrixXd M = G + eps_abs * MatrixXd::Identity(q, q);

  VectorXd scale(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    if (!(M(i, i) > 0.0))
      throw std::runtime_error("solve_gram_ridge: singular compressed matrix");
    scale(i) = 1.0 / std::sqrt(M(i, i));
  }
  const MatrixXd Ms = scale.asDiagonal() * M * scale.asDiagonal();
  const MatrixXd Rs = scale.asDiagonal() * Rhs;

  using MatrixXl = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const MatrixXl Ml = Ms.cast<long double>();
  const MatrixXl Rl = Rs.cast<long double>();
  const auto refine = [&](MatrixXd& Xs, const auto& solve_step) {
    for (int it = 0; it < 2; ++it) {
      const MatrixXd resid =
          (Rl - Ml * Xs.cast<long double>()).cast<double>();
      Xs += solve_step(resid);
    }
  };

  MatrixXd Xs;
  if (route == SolveRoute::llt) {
    Eigen::LLT<MatrixXd> llt(Ms);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("solve_gram_ridge: singular compressed matrix");
    Xs = llt.solve(Rs);
    refine(Xs, [&](const MatrixXd& r) { return llt.solve(r); });
  } else {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Ms);
    if (qr.rank() < q)
      throw std::runtime_error("solve_gram_ridge: singular compressed matrix");
    Xs = qr.solve(Rs);
    refine(Xs, [&](const MatrixXd& r) { return qr.solve(r); });
  }
  return scale.asDiagonal() * Xs;
}

/// Absolute ridge for a Gram matrix: eps_rel * trace(G) / rows(G).
inline double ridge_from_relative(const MatrixXd& G, double eps_rel) {
  return eps_rel * G.trace() / static_cast<double>(G.rows());
}

/// Compress the characteristic equation with instrument z and compute the
/// predictor gains.
///
/// W and Yc carry an explicit 1/Nbar scaling so sample-average limit
/// statements are testable at face value; the gains are invariant to that
/// scaling because the ridge is relative.
///
/// Gains: with the data-built (symmetric Gram) instrument, P solves the
/// ridge-regularized normal system P (Z Z^T + eps I) = Y_f Z^T directly.
/// For non-symmetric compressions (random averaging) and for the identity
/// instrument, P is the Tikhonov least-squares solution
/// P = Yc W^T (W W^T + eps I)^{-1}.
inline PredictorModel compress(const DataMatrices& dm, const Instrument& z,
                               double eps_rel) {
  if (z.Z.cols() != dm.Nbar)
    throw std::invalid_argument("compress: instrument width mismatch");
  if (eps_rel < 0.0) throw std::invalid_argument("compress: negative ridge");
  const double inv_n = 1.0 / static_cast<double>(dm.Nbar);

  PredictorModel model;
  model.p = dm.p;
  model.f = dm.f;
  model.r = dm.r();
  model.l = dm.l();
  model.ridge = eps_rel;
  model.W = dm.stacked_past_future_inputs() * z.Z.transpose() * inv_n;
  model.Yc = dm.Y_f * z.Z.transpose() * inv_n;

  if (z.kind == InstrumentKind::po_moesp) {
    // W is Z Z^T / Nbar, symmetric PSD: ridge the Gram itself.
    const MatrixXd Wsym = 0.5 * (model.W + model.W.transpose());
    const double eps = ridge_from_relative(Wsym, eps_rel);
    model.P =
        solve_gram_ridge(Wsym, model.Yc.transpose(), eps).transpose();
  } else {
    const MatrixXd G = model.W * model.W.transpose();
    const double eps = ridge_from_relative(G, eps_rel);
    model.P =
        solve_gram_ridge(G, model.W * model.Yc.transpose(), eps).transpose();
  }
  model.has_gains = true;
  return model;
}

/// Subspace-predictor least squares: P = Y_f Z^T (Z Z^T + eps I)^{-1} with
/// Z = [U_p; Y_p; U_f], split as [past-window gains | future-input gains].
inline PredictorModel spc_fit(const DataMatrices& dm, double eps_rel,
                              SolveRoute route = SolveRoute::llt) {
  if (eps_rel < 0.0) throw std::invalid_argument("spc_fit: negative ridge");
  const MatrixXd Z = dm.stacked_past_future_inputs();
  const MatrixXd G = Z * Z.transpose();
  const double eps = ridge_from_relative(G, eps_rel);

  PredictorModel model;
  model.p = dm.p;
  model.f = dm.f;
  model.r = dm.r();
  model.l = dm.l();
  model.ridge = eps_rel;
  const double inv_n = 1.0 / static_cast<double>(dm.Nbar);
  model.W = G * inv_n;
  model.Yc = dm.Y_f * Z.transpose() * inv_n;
  model.P =
      solve_gram_ridge(G, Z * dm.Y_f.transpose(), eps, route).transpose();
  model.has_gains = true;
  return model;
}

/// Predicted future outputs P * [u_past; y_past; u_fut].
inline VectorXd predict(const PredictorModel& model, const VectorXd& u_past,
                        const VectorXd& y_past, const VectorXd& u_fut) {
  if (!model.has_gains)
    throw std::invalid_argument("predict: model carries no gains");
  if (u_past.size() != model.r * model.p ||
      y_past.size() != model.l * model.p || u_fut.size() != model.r * model.f)
    throw std::invalid_argument("predict: window size mismatch");
  VectorXd w(u_past.size() + y_past.size() + u_fut.size());
  w << u_past, y_past, u_fut;
  return model.P * w;
}

/// Executable form of the DeePC/SPC equivalence: for each test vector w,
/// solve the compressed system (Z Z^T + eps I) g = w explicitly and form
/// Y_f Z^T g (route one), and apply the spc_fit gains P w (route two,
/// independent factorization). Returns the maximum deviation
/// ||y1 - y2||_inf / (1 + ||y1||_inf) over the battery.
inline double assert_deepc_spc_equivalence(const DataMatrices& dm,
                                           double eps_rel,
                                           const MatrixXd& test_vectors) {
  if (test_vectors.rows() != dm.q())
    throw std::invalid_argument("equivalence: test vector length != q");
  const MatrixXd Z = dm.stacked_past_future_inputs();
  const MatrixXd G = Z * Z.transpose();
  const double eps = ridge_from_relative(G, eps_rel);
  const MatrixXd YfZt = dm.Y_f * Z.transpose();

  const PredictorModel spc = spc_fit(dm, eps_rel, SolveRoute::qr);

  double worst = 0.0;
  for (Eigen::Index j = 0; j < test_vectors.cols(); ++j) {
    const VectorXd w = test_vectors.col(j);
    const VectorXd g = solve_gram_ridge(G, w, eps, SolveRoute::llt);
    const VectorXd y1 = YfZt * g;
    const VectorXd y2 = spc.P * w;
    const double dev = (y1 - y2).lpNorm<Eigen::Infinity>() /
                       (1.0 + y1.lpNorm<Eigen::Infinity>());
    worst = std::max(worst, dev);
  }
  return worst;
}

}  // namespace ivdeepc
