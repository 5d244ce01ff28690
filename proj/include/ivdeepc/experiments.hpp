#pragma once

// Scenario configuration, Monte-Carlo batch running, summary statistics,
// and CSV/JSON emission. A scenario fixes the plant protocol (excitation
// length, square-wave reference, noise variance) and fans out over
// sweep value x realization x variant; every run is reproducible from the
// base seed alone.
//
// Seeding: realization j uses seed base_seed + j. Noise, excitation-input,
// and random-instrument streams are derived from that seed with fixed tags,
// so all variants of one realization share the same plant noise (paired
// comparisons) while the streams stay mutually independent.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "controller.hpp"
#include "lti_sim.hpp"

namespace ivdeepc {

inline constexpr const char* kLibraryVersion = "1.0.0";

enum class SweepAxis { none, data_window, noise_variance, horizon };

inline const char* sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::none: return "none";
    case SweepAxis::data_window: return "data_window";
    case SweepAxis::noise_variance: return "noise_variance";
    case SweepAxis::horizon: return "horizon";
  }
  return "?";
}

struct ScenarioConfig {
  std::string scenario_id = "default";
  ControllerConfig ctrl;
  double noise_variance = 0.01;
  double wave_amplitude = 50.0;
  double wave_offset = 50.0;
  Eigen::Index wave_period = 400;
  Eigen::Index T_excitation = 1200;
  Eigen::Index T_control = 800;
  int n_realizations = 20;
  std::uint64_t base_seed = 1;
  SweepAxis sweep_axis = SweepAxis::none;
  std::vector<double> sweep_values;  ///< ignored when sweep_axis == none
  std::vector<Variant> variants = {Variant::iv, Variant::random_avg};
  /// horizon sweeps set Nbar = factor * f (data width scales with horizon)
  Eigen::Index horizon_nbar_factor = 6;
  /// lambda_g for the nominal variant; NaN selects 10 * noise variance
  /// (falling back to the controller default on noiseless runs)
  double lambda_g = std::numeric_limits<double>::quiet_NaN();

  void validate() const {
    if (n_realizations < 1)
      throw std::invalid_argument("scenario: n_realizations < 1");
    if (sweep_axis != SweepAxis::none && sweep_values.empty())
      throw std::invalid_argument("scenario: sweep value list is empty");
    if (variants.empty())
      throw std::invalid_argument("scenario: no variants selected");
    if (noise_variance < 0)
      throw std::invalid_argument("scenario: negative noise variance");
  }
};

struct RunRecord {
  std::string scenario;
  std::string variant;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;  ///< realization seed (base_seed + index)
  double metric = std::numeric_limits<double>::quiet_NaN();
  double solve_ms = 0.0;
  std::string error;  ///< empty on success
};

struct SummaryRow {
  std::string scenario;
  std::string variant;
  double sweep_value = 0.0;
  int n = 0;
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};

/// Normalized tracking error: mean squared tracking error divided by the
/// Euclidean norm of the reference over the same window.
inline double tracking_metric(const MatrixXd& y, const MatrixXd& ref) {
  if (y.rows() != ref.rows() || y.cols() != ref.cols())
    throw std::invalid_argument("tracking_metric: shape mismatch");
  if (y.cols() == 0) throw std::invalid_argument("tracking_metric: empty");
  const double refnorm = ref.norm();
  if (refnorm == 0.0)
    throw std::invalid_argument("tracking_metric: zero reference norm");
  const double mse =
      (y - ref).squaredNorm() / static_cast<double>(y.cols());
  return mse / refnorm;
}

// Stream-separation tags fed to rng::derive_seed so the noise, excitation,
// and instrument draws of one realization never share a counter sequence.
inline constexpr std::uint64_t kNoiseTag = 0xA1;
inline constexpr std::uint64_t kExcitationTag = 0xB2;
inline constexpr std::uint64_t kInstrumentTag = 0xC3;

namespace detail {

/// Resolve the controller config for one (sweep value, variant) cell.
inline ControllerConfig resolve_ctrl(const ScenarioConfig& sc, double value,
                                     Variant variant, double noise_var,
                                     std::uint64_t instrument_seed) {
  ControllerConfig c = sc.ctrl;
  c.variant = variant;
  c.seed = instrument_seed;
  if (sc.sweep_axis == SweepAxis::data_window)
    c.Nbar = static_cast<Eigen::Index>(value);
  else if (sc.sweep_axis == SweepAxis::horizon) {
    c.p = c.f = static_cast<Eigen::Index>(value);
    c.Nbar = sc.horizon_nbar_factor * c.f;
  }
  if (variant == Variant::nominal) {
    if (!std::isnan(sc.lambda_g))
      c.lambda_g = sc.lambda_g;
    else if (noise_var > 0)
      c.lambda_g = 10.0 * noise_var;
  }
  return c;
}

}  // namespace detail

/// Execute one closed-loop run for realization `j` of the given cell.
/// All variants of realization j share the noise and excitation streams.
inline RunRecord run_single(const ScenarioConfig& sc, double sweep_value,
                            Variant variant, int j) {
  const std::uint64_t rseed = sc.base_seed + static_cast<std::uint64_t>(j);
  const double noise_var = sc.sweep_axis == SweepAxis::noise_variance
                               ? sweep_value
                               : sc.noise_variance;
  RunRecord rec;
  rec.scenario = sc.scenario_id;
  rec.variant = variant_name(variant);
  rec.sweep_value = sweep_value;
  rec.seed = rseed;
  try {
    const SystemRealization sys = benchmark_system();
    const ControllerConfig cfg = detail::resolve_ctrl(
        sc, sweep_value, variant, noise_var,
        rng::derive_seed(rseed, kInstrumentTag));
    const MatrixXd innov =
        white_noise({noise_var, rng::derive_seed(rseed, kNoiseTag)},
                    sys.l(), sc.T_excitation + sc.T_control);
    const MatrixXd u_exc = white_noise(
        {1.0, rng::derive_seed(rseed, kExcitationTag)}, sys.r(),
        sc.T_excitation);
    const VectorXd ref = square_wave(sc.wave_amplitude, sc.wave_offset,
                                     sc.wave_period, sc.T_control + cfg.f);
    const RunResult res =
        run_closed_loop(sys, cfg, u_exc, ref, innov, sc.T_control);
    rec.metric = tracking_metric(
        res.traj.y.rightCols(sc.T_control),
        ref.head(sc.T_control).transpose());
    rec.solve_ms = res.diag.solve_ms;
  } catch (const std::exception& ex) {
    rec.error = ex.what();
  }
  return rec;
}

/// Run the full batch: sweep value x realization x variant, fanned out to a
/// worker pool; the record order is deterministic (jobs are indexed up
/// front) and per-run failures are recorded, not fatal.
inline std::vector<RunRecord> run_scenario(const ScenarioConfig& sc) {
  sc.validate();
  const std::vector<double> values =
      sc.sweep_axis == SweepAxis::none ? std::vector<double>{0.0}
                                       : sc.sweep_values;

  struct Job {
    double value;
    Variant variant;
    int realization;
  };
  std::vector<Job> jobs;
  for (double v : values)
    for (int j = 0; j < sc.n_realizations; ++j)
      for (Variant var : sc.variants) jobs.push_back({v, var, j});

  std::vector<RunRecord> records(jobs.size());
  const unsigned workers = std::max(
      1u, std::min(std::thread::hardware_concurrency(),
                   static_cast<unsigned>(jobs.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < jobs.size();
         i = next.fetch_add(1))
      records[i] =
          run_single(sc, jobs[i].value, jobs[i].variant, jobs[i].realization);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return records;
}

/// Linear-interpolation percentile of a sorted sample.
inline double percentile(std::vector<double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile: empty sample");
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Per-(scenario, variant, sweep value) median and 80% band (10th/90th
/// percentiles). Failed runs (NaN metric) are excluded.
inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& recs) {
  std::map<std::tuple<std::string, std::string, double>, std::vector<double>>
      groups;
  for (const auto& r : recs)
    if (r.error.empty() && !std::isnan(r.metric))
      groups[{r.scenario, r.variant, r.sweep_value}].push_back(r.metric);

  std::vector<SummaryRow> rows;
  for (auto& [key, vals] : groups) {
    std::sort(vals.begin(), vals.end());
    SummaryRow row;
    row.scenario = std::get<0>(key);
    row.variant = std::get<1>(key);
    row.sweep_value = std::get<2>(key);
    row.n = static_cast<int>(vals.size());
    row.median = percentile(vals, 0.5);
    row.p10 = percentile(vals, 0.1);
    row.p90 = percentile(vals, 0.9);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Full double precision (17 significant digits), locale-independent.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// RFC-4180 field quoting: quote when the field contains a comma, quote, or
/// newline; embedded quotes are doubled.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline nlohmann::json config_to_json(const ScenarioConfig& sc) {
  nlohmann::json j;
  j["scenario_id"] = sc.scenario_id;
  j["p"] = sc.ctrl.p;
  j["f"] = sc.ctrl.f;
  j["nbar"] = sc.ctrl.Nbar;
  j["q_weight"] = sc.ctrl.q_weight;
  j["r_weight"] = sc.ctrl.r_weight;
  j["ridge_rel"] = sc.ctrl.ridge_rel;
  j["u_max"] = sc.ctrl.u_max;
  j["du_max"] = sc.ctrl.du_max;
  if (std::isnan(sc.lambda_g))
    j["lambda_g"] = "auto";
  else
    j["lambda_g"] = sc.lambda_g;
  j["noise_variance"] = sc.noise_variance;
  j["wave_amplitude"] = sc.wave_amplitude;
  j["wave_offset"] = sc.wave_offset;
  j["wave_period"] = sc.wave_period;
  j["t_excitation"] = sc.T_excitation;
  j["t_control"] = sc.T_control;
  j["n_realizations"] = sc.n_realizations;
  j["base_seed"] = sc.base_seed;
  j["sweep_axis"] = sweep_axis_name(sc.sweep_axis);
  j["sweep_values"] = sc.sweep_values;
  j["horizon_nbar_factor"] = sc.horizon_nbar_factor;
  std::vector<std::string> vs;
  for (Variant v : sc.variants) vs.emplace_back(variant_name(v));
  j["variants"] = vs;
  return j;
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "nominal") return Variant::nominal;
  if (s == "iv") return Variant::iv;
  if (s == "spc") return Variant::spc;
  if (s == "random_avg") return Variant::random_avg;
  throw std::invalid_argument("unknown variant: " + s);
}

inline SweepAxis sweep_axis_from_name(const std::string& s) {
  if (s == "none") return SweepAxis::none;
  if (s == "data_window") return SweepAxis::data_window;
  if (s == "noise_variance") return SweepAxis::noise_variance;
  if (s == "horizon") return SweepAxis::horizon;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

inline ScenarioConfig config_from_json(const nlohmann::json& in) {
  // Accept either a bare config or a manifest wrapping one under "config".
  const nlohmann::json& j = in.contains("config") ? in.at("config") : in;
  ScenarioConfig sc;
  auto get = [&](const char* key, auto& field) {
    using T = std::decay_t<decltype(field)>;
    if (j.contains(key)) field = j.at(key).get<T>();
  };
  get("scenario_id", sc.scenario_id);
  long long p = sc.ctrl.p, f = sc.ctrl.f, nbar = sc.ctrl.Nbar;
  get("p", p);
  get("f", f);
  get("nbar", nbar);
  sc.ctrl.p = p;
  sc.ctrl.f = f;
  sc.ctrl.Nbar = nbar;
  get("q_weight", sc.ctrl.q_weight);
  get("r_weight", sc.ctrl.r_weight);
  get("ridge_rel", sc.ctrl.ridge_rel);
  get("u_max", sc.ctrl.u_max);
  get("du_max", sc.ctrl.du_max);
  if (j.contains("lambda_g") && j.at("lambda_g").is_number())
    sc.lambda_g = j.at("lambda_g").get<double>();
  get("noise_variance", sc.noise_variance);
  get("wave_amplitude", sc.wave_amplitude);
  get("wave_offset", sc.wave_offset);
  long long period = sc.wave_period, texc = sc.T_excitation,
            tctl = sc.T_control, hfac = sc.horizon_nbar_factor;
  get("wave_period", period);
  get("t_excitation", texc);
  get("t_control", tctl);
  get("horizon_nbar_factor", hfac);
  sc.wave_period = period;
  sc.T_excitation = texc;
  sc.T_control = tctl;
  sc.horizon_nbar_factor = hfac;
  get("n_realizations", sc.n_realizations);
  get("base_seed", sc.base_seed);
  if (j.contains("sweep_axis"))
    sc.sweep_axis = sweep_axis_from_name(j.at("sweep_axis").get<std::string>());
  get("sweep_values", sc.sweep_values);
  if (j.contains("variants")) {
    sc.variants.clear();
    for (const auto& v : j.at("variants"))
      sc.variants.push_back(variant_from_name(v.get<std::string>()));
  }
  return sc;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

/// Write runs.csv, summary.csv, and manifest.json into `dir`.
/// The manifest embeds the fully resolved config and the realization seeds;
/// feeding it back through `run --config` reproduces the metrics exactly.
inline void emit(const std::vector<RunRecord>& records,
                 const std::vector<SummaryRow>& stats,
                 const ScenarioConfig& sc, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream out(fs::path(dir) / "runs.csv");
    if (!out) throw std::runtime_error("emit: cannot write runs.csv");
    out << "scenario,variant,sweep_value,seed,metric,solve_ms\n";
    for (const auto& r : records)
      out << csv_field(r.scenario) << ',' << csv_field(r.variant) << ','
          << format_double(r.sweep_value) << ',' << r.seed << ','
          << format_double(r.metric) << ',' << format_double(r.solve_ms)
          << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "summary.csv");
    if (!out) throw std::runtime_error("emit: cannot write summary.csv");
    out << "scenario,variant,sweep_value,n,median,p10,p90\n";
    for (const auto& s : stats)
      out << csv_field(s.scenario) << ',' << csv_field(s.variant) << ','
          << format_double(s.sweep_value) << ',' << s.n << ','
          << format_double(s.median) << ',' << format_double(s.p10) << ','
          << format_double(s.p90) << '\n';
  }
  {
    nlohmann::json manifest;
    manifest["library_version"] = kLibraryVersion;
    manifest["config"] = config_to_json(sc);
    std::vector<std::uint64_t> seeds;
    for (int j = 0; j < sc.n_realizations; ++j)
      seeds.push_back(sc.base_seed + static_cast<std::uint64_t>(j));
    manifest["realization_seeds"] = seeds;
    std::vector<std::string> failures;
    for (const auto& r : records)
      if (!r.error.empty())
        failures.push_back(r.variant + "/seed " + std::to_string(r.seed) +
                           ": " + r.error);
    manifest["failed_runs"] = failures;
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw std::runtime_error("emit: cannot write manifest.json");
    out << manifest.dump(2) << '\n';
  }
}

/// Preloaded benchmark-study configs, keyed by figure id.
/// id: "2", "4a", "4b", or "4c".
inline ScenarioConfig figure_config(const std::string& id) {
  ScenarioConfig sc;
  sc.variants = {Variant::iv, Variant::random_avg};
  sc.n_realizations = 20;
  if (id == "2") {
    sc.scenario_id = "fig2";
    sc.noise_variance = 0.01;  // 0.1^2
    sc.ctrl.Nbar = 500;
    sc.sweep_axis = SweepAxis::none;
  } else if (id == "4a") {
    sc.scenario_id = "fig4a";
    sc.noise_variance = 0.25;  // 0.5^2
    sc.sweep_axis = SweepAxis::data_window;
    sc.sweep_values = {60, 125, 250, 500};
  } else if (id == "4b") {
    sc.scenario_id = "fig4b";
    sc.ctrl.Nbar = 200;
    sc.sweep_axis = SweepAxis::noise_variance;
    sc.sweep_values = {0.01, 0.04, 0.09, 0.16, 0.25};  // 0.1^2 .. 0.5^2
  } else if (id == "4c") {
    sc.scenario_id = "fig4c";
    sc.noise_variance = 0.25;
    sc.sweep_axis = SweepAxis::horizon;
    sc.sweep_values = {10, 20, 30, 40};
    sc.horizon_nbar_factor = 6;
  } else {
    throw std::invalid_argument("unknown figure id: " + id);
  }
  return sc;
}

}  // namespace ivdeepc
