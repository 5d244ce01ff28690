// Command-line interface: scenario runs, figure-reproduction sweeps, the
// self-check battery, and benchmark-system inspection.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "ivdeepc/ivdeepc.hpp"

namespace {

using namespace ivdeepc;

int run_records(ScenarioConfig sc, const std::string& out_dir) {
  const auto records = run_scenario(sc);
  const auto stats = summarize(records);
  emit(records, stats, sc, out_dir);

  int failures = 0;
  for (const auto& r : records)
    if (!r.error.empty()) ++failures;
  std::printf("scenario %s: %zu runs, %d failed; results in %s\n",
              sc.scenario_id.c_str(), records.size(), failures,
              out_dir.c_str());
  for (const auto& s : stats)
    std::printf("  %-12s sweep=%-8g n=%-4d median=%.6g p10=%.6g p90=%.6g\n",
                s.variant.c_str(), s.sweep_value, s.n, s.median, s.p10,
                s.p90);
  return 0;
}

void apply_variant_list(ScenarioConfig& sc, const std::string& csv) {
  if (csv.empty()) return;
  sc.variants.clear();
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) sc.variants.push_back(variant_from_name(tok));
}

struct CheckReporter {
  int failed = 0;
  void check(const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %s (%s)\n", ok ? "PASS" : "FAIL", name.c_str(),
                detail.c_str());
    if (!ok) ++failed;
  }
};

int verify() {
  CheckReporter rep;
  const SystemRealization sys = benchmark_system();

  {  // Data-equation residual: truncation-law behavior on the benchmark.
    const Eigen::Index cols = 400;
    const MatrixXd e0 = MatrixXd::Zero(1, 700);
    const MatrixXd u = white_noise({1.0, 21}, 1, 700);
    const Trajectory noiseless = simulate(sys, u, e0, VectorXd::Zero(5));
    double prev = 1e300;
    bool monotone = true;
    double r80 = 0.0;
    for (Eigen::Index p : {20, 40, 60, 80}) {
      const double res = data_equation_residual(sys, noiseless, 0, p, 20, cols);
      if (res > prev) monotone = false;
      prev = res;
      if (p == 80) r80 = res;
    }
    rep.check("data-equation residual decays with the past window",
              monotone && r80 < 1e-6,
              "residual(p=80) = " + format_double(r80));

    const MatrixXd en = white_noise({0.01, 22}, 1, 700);
    const Trajectory noisy = simulate(sys, u, en, VectorXd::Zero(5));
    const double with_e = data_equation_residual(sys, noisy, 0, 80, 20, cols);
    Trajectory stripped = noisy;
    stripped.e = MatrixXd();
    const double without_e =
        data_equation_residual(sys, stripped, 0, 80, 20, cols);
    rep.check("innovations explain the noisy data equation",
              with_e < 1e-6 && without_e > 100 * with_e,
              "with E = " + format_double(with_e) +
                  ", without E = " + format_double(without_e));
  }

  {  // DeePC <-> SPC equivalence on noisy benchmark data.
    const Eigen::Index T = 700;
    const MatrixXd u = white_noise({1.0, 31}, 1, T);
    const MatrixXd e = white_noise({0.01, 32}, 1, T);
    const Trajectory traj = simulate(sys, u, e, VectorXd::Zero(5));
    const DataMatrices dm = build_data_matrices(traj, 0, 20, 20, 500);
    MatrixXd vecs(dm.q(), 100);
    for (Eigen::Index a = 0; a < vecs.rows(); ++a)
      for (Eigen::Index b = 0; b < vecs.cols(); ++b)
        vecs(a, b) = rng::standard_normal(77, a * 100 + b);
    // 1e-6 relative ridge: large enough that construction rounding
    // (amplified by the Gram condition number, about q/ridge) stays well
    // below the agreement target.
    const double dev = assert_deepc_spc_equivalence(dm, 1e-6, vecs);
    rep.check("explicit-g and subspace-predictor paths coincide", dev < 1e-8,
              "max deviation = " + format_double(dev));
  }

  {  // QP battery against the exhaustive enumeration oracle.
    double worst = 0.0;
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const QuadraticProgram qp = random_small_qp(1000 + trial);
      const QpSolution fast = solve(qp);
      const QpSolution slow = solve_by_enumeration(qp);
      if (fast.status != slow.status) {
        ++mismatches;
        continue;
      }
      if (fast.status == QpStatus::optimal)
        worst = std::max(worst,
                         (fast.z - slow.z).lpNorm<Eigen::Infinity>());
    }
    rep.check("active-set solver agrees with the enumeration oracle",
              mismatches == 0 && worst < 1e-8,
              "status mismatches = " + std::to_string(mismatches) +
                  ", max |z - z_oracle| = " + format_double(worst));
  }

  std::printf(rep.failed == 0 ? "verify: all checks passed\n"
                              : "verify: %d check(s) FAILED\n",
              rep.failed);
  return rep.failed == 0 ? 0 : 1;
}

int print_system() {
  const SystemRealization sys = benchmark_system();
  const Eigen::IOFormat fmt(Eigen::FullPrecision, 0, "  ", "\n", "  [", "]");
  std::cout << "Benchmark system (n=5, r=1, l=1)\n";
  std::cout << "A =\n" << sys.A.format(fmt) << "\n";
  std::cout << "B =\n" << sys.B.format(fmt) << "\n";
  std::cout << "C =\n" << sys.C.format(fmt) << "\n";
  std::cout << "D =\n" << sys.D.format(fmt) << "\n";
  std::cout << "K =\n" << sys.K.format(fmt) << "\n";
  const PredictorRealization pred = predictor_form(sys);
  std::cout << "A - KC =\n" << pred.A_tilde.format(fmt) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-enabled predictive control with instrumental variables"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "results", figure, variants_csv;
  int realizations = -1;

  auto* run_cmd = app.add_subcommand("run", "Run a scenario config file");
  run_cmd->add_option("--config", config_path, "JSON scenario config")
      ->required();
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--realizations", realizations,
                      "Override realization count");
  run_cmd->add_option("--variants", variants_csv,
                      "Comma-separated variant list "
                      "(iv,random_avg,nominal,spc)");

  auto* sweep_cmd =
      app.add_subcommand("sweep", "Run a preloaded figure-reproduction config");
  sweep_cmd->add_option("--figure", figure, "One of 2, 4a, 4b, 4c")
      ->required();
  sweep_cmd->add_option("--out", out_dir, "Output directory");
  sweep_cmd->add_option("--realizations", realizations,
                        "Override realization count (default 20; use 100 "
                        "for the full study)");

  auto* verify_cmd = app.add_subcommand(
      "verify", "Run the invariant/equivalence self-check battery");
  auto* print_cmd =
      app.add_subcommand("print-system", "Dump the benchmark system matrices");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      ScenarioConfig sc = load_config(config_path);
      if (realizations > 0) sc.n_realizations = realizations;
      apply_variant_list(sc, variants_csv);
      return run_records(sc, out_dir);
    }
    if (sweep_cmd->parsed()) {
      ScenarioConfig sc = figure_config(figure);
      if (realizations > 0) sc.n_realizations = realizations;
      return run_records(sc, out_dir);
    }
    if (verify_cmd->parsed()) return verify();
    if (print_cmd->parsed()) return print_system();
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
