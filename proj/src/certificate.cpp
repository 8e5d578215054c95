#include "poisbound/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "poisbound/errors.hpp"

namespace poisbound {

double drift_excess(const DtmcModel& model, const StateFn& v, const StateFn& q, const State& x) {
  double pv = 0.0;
  for (const auto& t : model.row(x)) pv += t.weight * v(t.to);
  return pv - v(x) + q(x);
}

DriftReport verify_drift(const DtmcModel& model, const LyapunovCertificate& cert,
                         std::span<const State> check_set, double tolerance) {
  DriftReport report;
  report.max_violation = -std::numeric_limits<double>::infinity();
  for (const State& x : check_set) {
    const double vx = cert.v(x);
    const double qx = cert.q(x);
    double excess = drift_excess(model, cert.v, cert.q, x);
    if (cert.K.contains(x)) excess -= cert.c;
    if (!(vx >= 0.0) || !(qx >= 0.0)) excess = std::numeric_limits<double>::infinity();
    ++report.states_checked;
    if (excess > report.max_violation) {
      report.max_violation = excess;
      report.worst_state = x;
    }
    if (excess > tolerance) ++report.violations;
  }
  report.passed = report.violations == 0;
  if (report.states_checked == 0) report.max_violation = 0.0;
  return report;
}

StateSet suggest_K(const DtmcModel& model, const StateFn& v, const StateFn& q, std::span<const State> envelope,
                   std::optional<State> z) {
  std::vector<State> out;
  for (const State& x : envelope)
    if (drift_excess(model, v, q, x) > 0.0) out.push_back(x);
  if (z) out.push_back(*z);
  return StateSet(std::move(out));
}

double minimal_c(const DtmcModel& model, const StateFn& v, const StateFn& q, const StateSet& K) {
  double c = 0.0;
  for (const State& x : K) c = std::max(c, drift_excess(model, v, q, x));
  return c;
}

LyapunovCertificate embed_certificate(std::shared_ptr<const EmbeddedChain> chain,
                                      const LyapunovCertificate& continuous) {
  double min_rate = std::numeric_limits<double>::infinity();
  for (const State& x : continuous.K) min_rate = std::min(min_rate, chain->holding_rate(x));
  LyapunovCertificate out;
  out.v = continuous.v;
  out.K = continuous.K;
  out.c = continuous.K.empty() ? 0.0 : continuous.c / min_rate;
  out.q = [chain, q = continuous.q](const State& x) { return q(x) / chain->holding_rate(x); };
  return out;
}

StateFn quadratic_form(std::vector<double> coeffs) {
  for (double a : coeffs)
    if (!(a >= 0.0)) throw InvalidParam("quadratic Lyapunov coefficients must be nonnegative");
  return [coeffs = std::move(coeffs)](const State& x) {
    double v = 0.0;
    for (int i = 0; i < x.dim && i < static_cast<int>(coeffs.size()); ++i)
      v += coeffs[static_cast<std::size_t>(i)] * static_cast<double>(x[i]) * static_cast<double>(x[i]);
    return v;
  };
}

StateSet halfspace_set(const std::vector<double>& coeffs, double rhs, const std::vector<int>& upper) {
  if (coeffs.size() != upper.size()) throw InvalidParam("halfspace dimension mismatch");
  return StateSet::filter(upper, [&](const State& x) {
    double s = 0.0;
    for (int i = 0; i < x.dim; ++i) s += coeffs[static_cast<std::size_t>(i)] * x[i];
    return s <= rhs;
  });
}

}  // namespace poisbound
