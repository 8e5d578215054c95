#pragma once

#include <optional>
#include <span>
#include <string>

#include "poisbound/markov_model.hpp"
#include "poisbound/state.hpp"

namespace poisbound {

// Witness for the drift condition
//   (Pv)(x) <= v(x) - q(x) + c * 1{x in K}   for all x,
// which yields E_x sum_{j < T_K} q(X_j) <= v(x) off K.
struct LyapunovCertificate {
  StateFn v;
  StateFn q;
  StateSet K;
  double c = 0.0;
};

struct DriftReport {
  bool passed = true;
  // max over the check set of (Pv)(x) - v(x) + q(x) - c 1{x in K}; positive means failure.
  double max_violation = 0.0;
  std::optional<State> worst_state;
  std::size_t states_checked = 0;
  std::size_t violations = 0;
  // Where the inequality was not machine-checked; it is attested by the user.
  std::string unverified_region = "complement of the check set";
};

// (Pv)(x) - v(x) + q(x), the drift excess at x before the c 1{x in K} credit.
double drift_excess(const DtmcModel& model, const StateFn& v, const StateFn& q, const State& x);

DriftReport verify_drift(const DtmcModel& model, const LyapunovCertificate& cert,
                         std::span<const State> check_set, double tolerance = 0.0);

// {x in envelope : (Pv)(x) - v(x) + q(x) > 0}, plus z when supplied.
StateSet suggest_K(const DtmcModel& model, const StateFn& v, const StateFn& q, std::span<const State> envelope,
                   std::optional<State> z = std::nullopt);

// Smallest c >= 0 making the inequality hold on K.
double minimal_c(const DtmcModel& model, const StateFn& v, const StateFn& q, const StateSet& K);

// Continuous-time certificate (Qv)(x) <= -q(x) + c 1{x in K} rewritten for the
// jump chain: (Rv)(x) <= v(x) - q(x)/lambda(x) + (c / min_K lambda) 1{x in K}.
LyapunovCertificate embed_certificate(std::shared_ptr<const EmbeddedChain> chain,
                                      const LyapunovCertificate& continuous);

// v(x) = sum_i coeffs[i] * x_i^2.
StateFn quadratic_form(std::vector<double> coeffs);

// {x : sum_i coeffs[i] x_i <= rhs} intersected with the box {0..upper}.
StateSet halfspace_set(const std::vector<double>& coeffs, double rhs, const std::vector<int>& upper);

}  // namespace poisbound
