#pragma once

// Innovation-form LTI simulation, predictor-form conversion, signal
// generation, and the fifth-order benchmark plant.
//
// Model:  x_{k+1} = A x_k + B u_k + K e_k
//         y_k     = C x_k + D u_k + e_k
// Predictor form rewrites the recursion in terms of measured (u, y):
//         x_{k+1} = At x_k + Bt u_k + K y_k,   At = A - K C,  Bt = B - K D,
// so the state transition is governed by At rather than A.

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace ivdeepc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Innovation-form state-space realization (A, B, C, D, K).
struct SystemRealization {
  MatrixXd A;  ///< n x n state transition
  MatrixXd B;  ///< n x r input map
  MatrixXd C;  ///< l x n output map
  MatrixXd D;  ///< l x r feedthrough
  MatrixXd K;  ///< n x l innovation (Kalman) gain

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index r() const { return B.cols(); }
  Eigen::Index l() const { return C.rows(); }

  /// Throws std::invalid_argument unless all dimensions are consistent.
  void validate() const {
    if (A.rows() != A.cols()) throw std::invalid_argument("A must be square");
    if (B.rows() != n()) throw std::invalid_argument("B row count != n");
    if (C.cols() != n()) throw std::invalid_argument("C column count != n");
    if (D.rows() != l() || D.cols() != r())
      throw std::invalid_argument("D must be l x r");
    if (K.rows() != n() || K.cols() != l())
      throw std::invalid_argument("K must be n x l");
  }
};

/// Predictor-form realization (At, Bt, K, C, D) with At = A - KC, Bt = B - KD.
struct PredictorRealization {
  MatrixXd A_tilde;
  MatrixXd B_tilde;
  MatrixXd K;
  MatrixXd C;
  MatrixXd D;
};

/// Synchronized input/output/innovation records over T samples.
/// Channels are rows, time is columns; e may be empty (0 x T) when unknown.
struct Trajectory {
  MatrixXd u;  ///< r x T
  MatrixXd y;  ///< l x T
  MatrixXd e;  ///< l x T, or 0 x 0 when innovations are not recorded

  Eigen::Index T() const { return u.cols(); }
  bool has_innovations() const { return e.size() > 0; }
};

/// Innovation noise description: per-channel variance plus stream seed.
struct NoiseSpec {
  double variance = 0.0;
  std::uint64_t seed = 0;
};

/// Predictor-form conversion: At = A - KC, Bt = B - KD.
inline PredictorRealization predictor_form(const SystemRealization& sys) {
  sys.validate();
  return {sys.A - sys.K * sys.C, sys.B - sys.K * sys.D, sys.K, sys.C, sys.D};
}

/// Simulate the innovation-form recursion from x0 over the length of u.
/// u is r x T, e is l x T (pass a zero matrix for noiseless runs).
inline Trajectory simulate(const SystemRealization& sys, const MatrixXd& u,
                           const MatrixXd& e, const VectorXd& x0) {
  sys.validate();
  const Eigen::Index T = u.cols();
  if (u.rows() != sys.r()) throw std::invalid_argument("u row count != r");
  if (e.rows() != sys.l() || e.cols() != T)
    throw std::invalid_argument("e must be l x T");
  if (x0.size() != sys.n()) throw std::invalid_argument("x0 size != n");

  MatrixXd y(sys.l(), T);
  VectorXd x = x0;
  for (Eigen::Index k = 0; k < T; ++k) {
    y.col(k) = sys.C * x + sys.D * u.col(k) + e.col(k);
    x = sys.A * x + sys.B * u.col(k) + sys.K * e.col(k);
  }
  return {u, y, e};
}

/// Simulate the predictor-form recursion: the state is driven by u and the
/// (self-generated) output, reproducing the innovation-form y exactly.
inline Trajectory simulate_predictor(const PredictorRealization& pred,
                                     const MatrixXd& u, const MatrixXd& e,
                                     const VectorXd& x0) {
  const Eigen::Index T = u.cols();
  if (e.cols() != T) throw std::invalid_argument("u and e lengths differ");
  if (x0.size() != pred.A_tilde.rows())
    throw std::invalid_argument("x0 size != n");

  MatrixXd y(pred.C.rows(), T);
  VectorXd x = x0;
  for (Eigen::Index k = 0; k < T; ++k) {
    y.col(k) = pred.C * x + pred.D * u.col(k) + e.col(k);
    x = pred.A_tilde * x + pred.B_tilde * u.col(k) + pred.K * y.col(k);
  }
  return {u, y, e};
}

/// The fifth-order single-input single-output benchmark plant (an actuated
/// two-plate laboratory setup) with its observer gain; D = 0.
inline SystemRealization benchmark_system() {
  SystemRealization sys;
  sys.A.resize(5, 5);
  sys.A << 4.40, 1, 0, 0, 0,
          -8.09, 0, 1, 0, 0,
           7.83, 0, 0, 1, 0,
          -4.00, 0, 0, 0, 1,
           0.86, 0, 0, 0, 0;
  sys.B.resize(5, 1);
  sys.B << 0.00098, 0.01299, 0.01859, 0.00330, -0.00002;
  sys.C.resize(1, 5);
  sys.C << 1, 0, 0, 0, 0;
  sys.D = MatrixXd::Zero(1, 1);
  sys.K.resize(5, 1);
  sys.K << 2.3, -6.64, 7.515, -4.0146, 0.86336;
  return sys;
}

/// i.i.d. zero-mean Gaussian noise, l x T, reproducible from spec.seed.
inline MatrixXd white_noise(const NoiseSpec& spec, Eigen::Index l,
                            Eigen::Index T) {
  if (spec.variance < 0.0) throw std::invalid_argument("variance < 0");
  if (T <= 0) throw std::invalid_argument("T must be positive");
  MatrixXd out(l, T);
  for (Eigen::Index ch = 0; ch < l; ++ch) {
    const std::uint64_t s =
        rng::derive_seed(spec.seed, static_cast<std::uint64_t>(ch));
    const double scale = std::sqrt(spec.variance);
    for (Eigen::Index k = 0; k < T; ++k)
      out(ch, k) =
          scale * rng::standard_normal(s, static_cast<std::uint64_t>(k));
  }
  return out;
}

/// Square reference wave: offset + amplitude for the first period/2 samples,
/// offset - amplitude for the next, repeating.
inline VectorXd square_wave(double amplitude, double offset,
                            Eigen::Index period, Eigen::Index T) {
  if (period < 2) throw std::invalid_argument("period must be >= 2");
  if (T <= 0) throw std::invalid_argument("T must be positive");
  VectorXd ref(T);
  for (Eigen::Index k = 0; k < T; ++k)
    ref(k) = (k % period) < period / 2 ? offset + amplitude : offset - amplitude;
  return ref;
}

/// Frobenius norm of At^p, the truncation weight of the finite-past
/// approximation: windows of length p forget the initial state at this rate.
inline double decay_norm(const SystemRealization& sys, Eigen::Index p) {
  if (p < 0) throw std::invalid_argument("p must be >= 0");
  const PredictorRealization pred = predictor_form(sys);
  MatrixXd Ap = MatrixXd::Identity(sys.n(), sys.n());
  for (Eigen::Index j = 0; j < p; ++j) Ap = pred.A_tilde * Ap;
  return Ap.norm();
}

}  // namespace ivdeepc
