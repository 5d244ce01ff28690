#pragma once

// Block-Hankel / block-Toeplitz construction, extended observability and
// controllability matrices, and the data-equation residual oracle.
//
// The data equation ties a window of future outputs to past data, future
// inputs, and future innovations:
//   Yf = Gamma*Kext*[Up; Yp] + H_BD*Uf + H_KI*Ef + Gamma*At^p*Xi,
// where the last term is the finite-past truncation error. The residual
// oracle evaluates the identity with true system matrices and reports the
// normalized size of everything it cannot explain.

#include <Eigen/Dense>
#include <stdexcept>

#include "lti_sim.hpp"

namespace ivdeepc {

/// Block-Hankel matrix over a d-channel signal: block-row a, column b holds
/// the signal sample at time i + a + b.
struct BlockHankel {
  MatrixXd data;    ///< (d*s) x cols
  Eigen::Index d;   ///< channel count
  Eigen::Index s;   ///< block-row count
  Eigen::Index i;   ///< start index into the source signal
  Eigen::Index cols;
};

/// Which impulse-response chain fills the block-Toeplitz matrix.
enum class ToeplitzKind {
  BD,  ///< diagonal D, sub-diagonals C A^(j-1) B
  KI   ///< diagonal I, sub-diagonals C A^(j-1) K
};

/// Build the s-block-row Hankel matrix of `signal` (d x T) starting at
/// index i with `cols` columns. Consumes cols + s - 1 samples.
inline BlockHankel block_hankel(const MatrixXd& signal, Eigen::Index i,
                                Eigen::Index s, Eigen::Index cols) {
  const Eigen::Index d = signal.rows();
  const Eigen::Index T = signal.cols();
  if (i < 0 || s < 1 || cols < 1)
    throw std::invalid_argument("block_hankel: nonpositive dimensions");
  if (i + s + cols - 2 >= T)
    throw std::invalid_argument("block_hankel: window exceeds signal length");
  MatrixXd H(d * s, cols);
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index b = 0; b < cols; ++b)
      H.block(a * d, b, d, 1) = signal.col(i + a + b);
  return {std::move(H), d, s, i, cols};
}

/// Lower block-triangular Toeplitz matrix of the first f Markov parameters,
/// either of (B, D) or of (K, I).
inline MatrixXd block_toeplitz(const SystemRealization& sys, Eigen::Index f,
                               ToeplitzKind kind) {
  sys.validate();
  if (f < 1) throw std::invalid_argument("block_toeplitz: f must be >= 1");
  const Eigen::Index l = sys.l();
  const Eigen::Index w = kind == ToeplitzKind::BD ? sys.r() : sys.l();
  const MatrixXd& G = kind == ToeplitzKind::BD ? sys.B : sys.K;
  const MatrixXd diag = kind == ToeplitzKind::BD
                            ? sys.D
                            : MatrixXd(MatrixXd::Identity(l, l));

  // Markov parameters: diag, C G, C A G, ..., C A^(f-2) G.
  std::vector<MatrixXd> markov(f);
  markov[0] = diag;
  MatrixXd CAj = sys.C;
  for (Eigen::Index j = 1; j < f; ++j) {
    markov[j] = CAj * G;
    CAj = CAj * sys.A;
  }

  MatrixXd H = MatrixXd::Zero(l * f, w * f);
  for (Eigen::Index row = 0; row < f; ++row)
    for (Eigen::Index col = 0; col <= row; ++col)
      H.block(row * l, col * w, l, w) = markov[row - col];
  return H;
}

/// Extended observability matrix: rows stack C, CA, ..., C A^(f-1).
inline MatrixXd extended_observability(const SystemRealization& sys,
                                       Eigen::Index f) {
  sys.validate();
  if (f < 1)
    throw std::invalid_argument("extended_observability: f must be >= 1");
  MatrixXd G(sys.l() * f, sys.n());
  MatrixXd CAj = sys.C;
  for (Eigen::Index j = 0; j < f; ++j) {
    G.middleRows(j * sys.l(), sys.l()) = CAj;
    CAj = CAj * sys.A;
  }
  return G;
}

/// Extended controllability matrix of the predictor form, mapping a stacked
/// past window [u_past; y_past] (oldest first) to the current state:
///   Kext = [At^(p-1) Bt, ..., Bt | At^(p-1) K, ..., K],
/// with all Bt-columns first, matching the [U_past; Y_past] stacking.
inline MatrixXd extended_controllability(const PredictorRealization& pred,
                                         Eigen::Index p) {
  if (p < 1)
    throw std::invalid_argument("extended_controllability: p must be >= 1");
  const Eigen::Index n = pred.A_tilde.rows();
  const Eigen::Index r = pred.B_tilde.cols();
  const Eigen::Index l = pred.K.cols();
  MatrixXd Kext(n, (r + l) * p);
  MatrixXd Aj = MatrixXd::Identity(n, n);
  for (Eigen::Index j = 0; j < p; ++j) {
    // j = 0 fills the newest (rightmost) block of each half.
    Kext.middleCols((p - 1 - j) * r, r) = Aj * pred.B_tilde;
    Kext.middleCols(p * r + (p - 1 - j) * l, l) = Aj * pred.K;
    Aj = pred.A_tilde * Aj;
  }
  return Kext;
}

/// Data-equation residual with true system matrices:
///   ||Yf - Gamma*Kext*[Up;Yp] - H_BD*Uf - H_KI*Ef||_F / ||Yf||_F.
/// The trajectory must provide cols + p + f - 1 samples from index i;
/// missing innovations are treated as zero (their term is then unexplained
/// and shows up in the residual).
inline double data_equation_residual(const SystemRealization& sys,
                                     const Trajectory& traj, Eigen::Index i,
                                     Eigen::Index p, Eigen::Index f,
                                     Eigen::Index cols) {
  sys.validate();
  if (p < 1 || f < 1 || cols < 1)
    throw std::invalid_argument("data_equation_residual: bad window sizes");
  if (i < 0 || i + p + f + cols - 2 >= traj.T())
    throw std::invalid_argument("data_equation_residual: insufficient data");

  const Eigen::Index ip = i + p;
  const MatrixXd Up = block_hankel(traj.u, i, p, cols).data;
  const MatrixXd Yp = block_hankel(traj.y, i, p, cols).data;
  const MatrixXd Uf = block_hankel(traj.u, ip, f, cols).data;
  const MatrixXd Yf = block_hankel(traj.y, ip, f, cols).data;

  const PredictorRealization pred = predictor_form(sys);
  const MatrixXd Gamma = extended_observability(sys, f);
  const MatrixXd Kext = extended_controllability(pred, p);
  const MatrixXd Hbd = block_toeplitz(sys, f, ToeplitzKind::BD);
  const MatrixXd Hki = block_toeplitz(sys, f, ToeplitzKind::KI);

  MatrixXd past(Up.rows() + Yp.rows(), cols);
  past << Up, Yp;

  MatrixXd R = Yf - Gamma * Kext * past - Hbd * Uf;
  if (traj.has_innovations()) {
    const MatrixXd Ef = block_hankel(traj.e, ip, f, cols).data;
    R -= Hki * Ef;
  }
  const double scale = Yf.norm();
  if (scale == 0.0) throw std::invalid_argument("Yf is identically zero");
  return R.norm() / scale;
}

}  // namespace ivdeepc
