#include <catch2/catch_amalgamated.hpp>

#include <optional>

#include "ivdeepc/qp_solver.hpp"

using namespace ivdeepc;

namespace {

double objective(const QuadraticProgram& qp, const VectorXd& z) {
  return 0.5 * z.dot(qp.H * z) + qp.c.dot(z);
}

QuadraticProgram box_problem() {
  // min  z'z/2 + c'z  s.t.  z1 <= 1,  z2 <= 5  (first row active at optimum)
  QuadraticProgram qp;
  qp.H = MatrixXd::Identity(2, 2);
  qp.c.resize(2);
  qp.c << -3, -1;
  qp.A_in.resize(2, 2);
  qp.A_in << 1, 0, 0, 1;
  qp.b_in.resize(2);
  qp.b_in << 1, 5;
  return qp;
}

}  // namespace

TEST_CASE("solver reproduces closed-form optima", "[qp]") {
  SECTION("unconstrained quadratic") {
    QuadraticProgram qp;
    qp.H = 2.0 * MatrixXd::Identity(2, 2);
    qp.c.resize(2);
    qp.c << -2, -4;
    const QpSolution sol = solve(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(sol.z(0) == Catch::Approx(1.0).margin(1e-10));
    CHECK(sol.z(1) == Catch::Approx(2.0).margin(1e-10));
    CHECK(sol.kkt_residual <= 1e-8);
  }

  SECTION("one active bound with its multiplier") {
    const QuadraticProgram qp = box_problem();
    const QpSolution sol = solve(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(sol.z(0) == Catch::Approx(1.0).margin(1e-10));
    CHECK(sol.z(1) == Catch::Approx(1.0).margin(1e-10));
    // stationarity on the active coordinate: z1 + c1 + lambda = 0
    CHECK(sol.in_duals(0) == Catch::Approx(2.0).margin(1e-8));
    CHECK(sol.in_duals(1) == Catch::Approx(0.0).margin(1e-10));
  }

  SECTION("single equality with its multiplier") {
    QuadraticProgram qp;
    qp.H = 2.0 * MatrixXd::Identity(2, 2);
    qp.c = VectorXd::Zero(2);
    qp.A_eq.resize(1, 2);
    qp.A_eq << 1, 1;
    qp.b_eq.resize(1);
    qp.b_eq << 2;
    const QpSolution sol = solve(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(sol.z(0) == Catch::Approx(1.0).margin(1e-10));
    CHECK(sol.z(1) == Catch::Approx(1.0).margin(1e-10));
    CHECK(sol.eq_duals(0) == Catch::Approx(-2.0).margin(1e-8));
  }

  SECTION("fully pinned by equalities") {
    QuadraticProgram qp;
    qp.H = MatrixXd::Identity(2, 2);
    qp.c = VectorXd::Zero(2);
    qp.A_eq = MatrixXd::Identity(2, 2);
    qp.b_eq.resize(2);
    qp.b_eq << 3, 4;
    const QpSolution sol = solve(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK((sol.z - qp.b_eq).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(sol.eq_duals(0) == Catch::Approx(-3.0).margin(1e-8));
    CHECK(sol.eq_duals(1) == Catch::Approx(-4.0).margin(1e-8));
  }

  SECTION("duplicated active rows still certify") {
    // Two identical bounds: the multiplier mass can sit on either copy.
    QuadraticProgram qp;
    qp.H = MatrixXd::Identity(1, 1);
    qp.c.resize(1);
    qp.c << -3;
    qp.A_in.resize(2, 1);
    qp.A_in << 1, 1;
    qp.b_in.resize(2);
    qp.b_in << 1, 1;
    const QpSolution sol = solve(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(sol.z(0) == Catch::Approx(1.0).margin(1e-10));
    CHECK(sol.in_duals.sum() == Catch::Approx(2.0).margin(1e-8));
    CHECK(sol.in_duals.minCoeff() >= -1e-12);
    CHECK(sol.kkt_residual <= 1e-8);
  }
}

TEST_CASE("kkt_residual flags each violated condition", "[qp]") {
  const QuadraticProgram qp = box_problem();
  VectorXd z(2), lam(2);
  z << 1, 1;
  lam << 2, 0;
  CHECK(kkt_residual(qp, z, VectorXd(), lam) < 1e-14);

  VectorXd zbad = z;
  zbad(1) = 2.0;  // breaks stationarity on the free coordinate
  CHECK(kkt_residual(qp, zbad, VectorXd(), lam) > 1e-2);

  zbad = z;
  zbad(0) = 1.5;  // violates the bound
  CHECK(kkt_residual(qp, zbad, VectorXd(), lam) > 1e-2);

  VectorXd lneg = lam;
  lneg(1) = -0.5;  // negative multiplier
  CHECK(kkt_residual(qp, z, VectorXd(), lneg) > 1e-2);

  VectorXd lslack = lam;
  lslack(1) = 1.0;  // positive multiplier on a slack constraint
  CHECK(kkt_residual(qp, z, VectorXd(), lslack) > 1e-2);
}

TEST_CASE("solver is deterministic and start-point independent", "[qp]") {
  const QuadraticProgram qp = random_small_qp(12);
  const QpSolution a = solve(qp);
  const QpSolution b = solve(qp);
  REQUIRE(a.status == QpStatus::optimal);
  CHECK((a.z - b.z).norm() == 0.0);
  CHECK(a.iterations == b.iterations);

  // Any feasible warm start must land on the same (unique) minimizer.
  const QpSolution c =
      solve(qp, 1e-8, 0, std::optional<VectorXd>(VectorXd::Zero(qp.vars())));
  REQUIRE(c.status == QpStatus::optimal);
  CHECK((a.z - c.z).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("certificate and solution are scale invariant", "[qp]") {
  QuadraticProgram qp = random_small_qp(12);
  const QpSolution base = solve(qp);
  REQUIRE(base.status == QpStatus::optimal);

  QuadraticProgram scaled = qp;
  scaled.H *= 7.0;
  scaled.c *= 7.0;  // same minimizer, rescaled duals
  scaled.A_in.row(0) *= 1000.0;
  scaled.b_in(0) *= 1000.0;  // same feasible set
  const QpSolution s = solve(scaled);
  REQUIRE(s.status == QpStatus::optimal);
  CHECK((base.z - s.z).lpNorm<Eigen::Infinity>() <
        1e-7 * (1.0 + base.z.lpNorm<Eigen::Infinity>()));
  CHECK(s.kkt_residual <= 1e-8);
}

TEST_CASE("phase one finds starts and detects contradictions", "[qp]") {
  SECTION("interior start required") {
    // Feasible set sits away from the origin, forcing the slack phase.
    QuadraticProgram qp;
    qp.H = MatrixXd::Identity(2, 2);
    qp.c = VectorXd::Zero(2);
    qp.A_in.resize(2, 2);
    qp.A_in << -1, 0, 0, -1;
    qp.b_in.resize(2);
    qp.b_in << -1, -2;  // z1 >= 1, z2 >= 2
    const QpSolution sol = solve(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(sol.z(0) == Catch::Approx(1.0).margin(1e-8));
    CHECK(sol.z(1) == Catch::Approx(2.0).margin(1e-8));
  }

  SECTION("contradictory bounds") {
    QuadraticProgram qp;
    qp.H = MatrixXd::Identity(1, 1);
    qp.c = VectorXd::Zero(1);
    qp.A_in.resize(2, 1);
    qp.A_in << 1, -1;
    qp.b_in.resize(2);
    qp.b_in << -1, -2;  // z <= -1 and z >= 2
    CHECK(solve(qp).status == QpStatus::infeasible);
  }

  SECTION("inconsistent equalities") {
    QuadraticProgram qp;
    qp.H = MatrixXd::Identity(2, 2);
    qp.c = VectorXd::Zero(2);
    qp.A_eq.resize(2, 2);
    qp.A_eq << 1, 0, 1, 0;
    qp.b_eq.resize(2);
    qp.b_eq << 0, 1;
    CHECK(solve(qp).status == QpStatus::infeasible);
  }

  SECTION("iteration cap reports honestly") {
    // The first blocking row is not part of the optimal active set, so one
    // iteration cannot produce a certifiable point.
    QuadraticProgram qp;
    qp.H = MatrixXd::Identity(2, 2);
    qp.c.resize(2);
    qp.c << -10, 0;
    qp.A_in.resize(2, 2);
    qp.A_in << 1, 1, 1, -1;
    qp.b_in.resize(2);
    qp.b_in << 1, 0.8;
    const QpSolution full = solve(qp);
    REQUIRE(full.status == QpStatus::optimal);
    CHECK(full.in_duals.minCoeff() > 1.0);  // both rows end up active
    const QpSolution sol = solve(qp, 1e-8, 1);
    CHECK(sol.status == QpStatus::max_iter);
    CHECK(sol.kkt_residual > 1e-8);
  }
}

TEST_CASE("malformed problems are rejected", "[qp]") {
  QuadraticProgram qp = box_problem();
  CHECK_THROWS_AS(solve(qp, -1.0), std::invalid_argument);

  QuadraticProgram bad = qp;
  bad.H(0, 1) = 0.5;  // asymmetric
  CHECK_THROWS_AS(solve(bad), std::invalid_argument);

  bad = qp;
  bad.H = MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(solve(bad), std::invalid_argument);

  bad = qp;
  bad.b_in = VectorXd::Zero(3);
  CHECK_THROWS_AS(solve(bad), std::invalid_argument);

  bad = qp;
  bad.A_eq = MatrixXd::Zero(1, 2);
  CHECK_THROWS_AS(solve(bad), std::invalid_argument);  // b_eq missing
}

TEST_CASE("active-set solver matches exhaustive enumeration", "[qp]") {
  int infeasible_seen = 0;
  for (std::uint64_t t = 0; t < 500; ++t) {
    const QuadraticProgram qp = random_small_qp(2000 + t);
    const QpSolution got = solve(qp);
    const QpSolution want = solve_by_enumeration(qp);

    INFO("instance " << t);
    REQUIRE(got.status == want.status);
    if (want.status == QpStatus::optimal) {
      CHECK((got.z - want.z).lpNorm<Eigen::Infinity>() <=
            1e-8 * (1.0 + want.z.lpNorm<Eigen::Infinity>()));
      CHECK(std::abs(objective(qp, got.z) - objective(qp, want.z)) <=
            1e-10 * (1.0 + std::abs(objective(qp, want.z))));
      CHECK(got.kkt_residual <= 1e-8);
      CHECK(got.in_duals.size() == qp.A_in.rows());
      if (got.in_duals.size() > 0) CHECK(got.in_duals.minCoeff() >= -1e-10);
    } else {
      ++infeasible_seen;
    }
  }
  CHECK(infeasible_seen > 20);  // the generator plants contradictions
}
