#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "poisbound/certificate.hpp"
#include "poisbound/errors.hpp"
#include "poisbound/markov_model.hpp"
#include "poisbound/poisson_bounds.hpp"

namespace poisbound {

// ---------------------------------------------------------------------------
// Gap metrics

struct GapRow {
  State x;
  std::optional<double> rel;       // |upper - lower| / |exact|, exact != 0
  std::optional<double> appr_rel;  // |upper - lower| / |upper|, upper != 0
  double abs = 0.0;                // |upper - lower|
};

struct GapReport {
  std::vector<GapRow> rows;  // one per row of the table
  // Suprema over the designated set D.
  std::optional<double> sup_rel;
  std::optional<double> sup_appr_rel;
  double sup_abs = 0.0;
};

GapRow gap_row(const BoundRow& row);

// D must be a subset of A - {z}. Throws MissingExact when `need_rel` is set
// and some state of D has no exact value.
GapReport gap_metrics(const BoundTable& table, const StateSet& D, bool need_rel = false);

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
  bool timestamp = true;
};

// Columns: state,lower,upper,approx[,exact,rel_gap],appr_rel_gap,abs_gap. The
// exact/rel_gap pair is present iff every row carries an exact value.
// Undefined gaps are written as empty fields; numbers use shortest round-trip form.
std::string write_bounds_csv(const BoundTable& table, const CsvOptions& options = {});
// Recovers state, lower, upper, approx and exact.
std::vector<BoundRow> parse_bounds_csv(const std::string& text);

std::string format_double(double value);
double parse_double(const std::string& text);

// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// ---------------------------------------------------------------------------
// Configuration

// Lyapunov certificate as configured: v and K shared by the reward and unit
// conditions; c per condition (computed on K when absent). For jump processes
// the certificate is stated in continuous time and embedded on use.
struct CertificateSpec {
  std::vector<double> v_coeffs;
  StateSet K;
  std::optional<double> c_reward;
  std::optional<double> c_unit;
  std::optional<StateSet> check;
};

struct SweepSpec {
  std::vector<double> schedule{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
  double scale = 0.0;  // A_t = {x : x_i <= ceil(scale * t)}
};

struct OracleSpec {
  std::optional<std::vector<int>> box;
  long paths = 0;
  std::uint64_t seed = 42;
  std::optional<StateSet> mc_states;  // Monte Carlo start states
};

struct RunConfig {
  nlohmann::json raw;
  ModelHandle model;
  CertificateSpec certificate;
  State z;
  StateSet A;  // empty when only a sweep is configured
  std::optional<StateSet> D;
  std::optional<SweepSpec> sweep;
  bool use_exact = true;
  OracleSpec oracle;
};

RunConfig parse_config(const nlohmann::json& config);
RunConfig load_config(const std::filesystem::path& path);

// Parses {"rect": [..]}, {"interval": [lo, hi]}, {"list": [[..], ..]} or
// {"halfspace": {"coeffs": [..], "rhs": r}}.
StateSet parse_state_set(const nlohmann::json& j, int dim, const std::string& where);

// Certificates in the units of the chain the bounds run on.
struct ChainCertificates {
  LyapunovCertificate reward;
  LyapunovCertificate unit;
  bool c_reward_computed = false;
  bool c_unit_computed = false;
};

ChainCertificates build_certificates(const RunConfig& config);

// Closed-form solution of Poisson's equation (g* or h*) and the long-run
// average, for the models where one is known.
std::optional<StateFn> closed_form_solution(const ModelHandle& model);
std::optional<double> closed_form_average(const ModelHandle& model);

// ---------------------------------------------------------------------------
// Runs

struct RunOptions {
  bool rigorous = false;
  bool timestamp = true;
};

struct CertificateCheck {
  DriftReport reward;
  DriftReport unit;
  bool passed() const { return reward.passed && unit.passed; }
};

CertificateCheck verify_certificates(const RunConfig& config, const ChainCertificates& certs,
                                     const StateSet& check_set);

struct RunResult {
  BoundTable table;
  GapReport gaps;
  nlohmann::json manifest;
};

// Bounds over A with gap metrics over D (default A - {z}). Throws
// CertificateFailure when the drift inequality fails on A.
RunResult run_single(const RunConfig& config, const RunOptions& options = {});
RunResult run_on(const RunConfig& config, const StateSet& A, const RunOptions& options);

struct SweepStep {
  double t = 0.0;
  std::size_t n_states = 0;
  double gate = 0.0;
  std::string status = "ok";
  std::optional<double> sup_rel;
  std::optional<double> sup_appr_rel;
  std::optional<double> sup_abs;
  // kappa lower bounds on D did not decrease since the previous good step.
  bool lower_monotone = true;
  double wall_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepStep> steps;
  nlohmann::json manifest;
};

SweepResult run_sweep(const RunConfig& config, const RunOptions& options = {});
std::string write_sweep_csv(const SweepResult& sweep, const CsvOptions& options = {});

// Writes bounds.csv, manifest.json and plot.gp into `dir`.
void write_run(const RunResult& result, const std::filesystem::path& dir, const RunOptions& options);
void write_sweep(const SweepResult& result, const std::filesystem::path& dir, const RunOptions& options);

struct OracleRun {
  std::string csv;
  nlohmann::json manifest;
};

// Exact solution on a clipped box (default: four times the corner of A) and,
// when paths > 0, Monte Carlo estimates of E_x sum_{j < tau(z)} r for x in A.
OracleRun run_oracle(const RunConfig& config, const RunOptions& options = {});

// Exit codes of the CLI.
int exit_code_for(ErrorCode code);

}  // namespace poisbound
