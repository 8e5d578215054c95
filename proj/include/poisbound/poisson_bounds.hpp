#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poisbound/hitting_bounds.hpp"

namespace poisbound {

struct ZBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Bounds on E_z sum_{j < tau(z)} q(X_j) from the bounds on A - {z}: one step
// out of z, with states of A^c charged v(y) + ||kappa~||_{K~}.
ZBounds z_state_bounds(const BlockSystem& sys, const Vector& lower, const std::optional<Vector>& upper,
                       double q_at_z);

// Interval for the long-run average (alpha in discrete time; delta for a jump
// process run on its embedded chain with q in {s', e'}).
struct AverageRewardBounds {
  double lower = 0.0;
  double upper = 0.0;
};

AverageRewardBounds alpha_bounds(const ZBounds& reward, const ZBounds& unit);

struct BoundRow {
  State x;
  double lower = 0.0;
  double upper = 0.0;
  double approx = 0.0;
  std::optional<double> exact;
  // Hitting-reward bounds behind the row (at z: the one-step z bounds).
  double kappa_reward_lower = 0.0;
  double kappa_reward_upper = 0.0;
  double kappa_unit_lower = 0.0;
  double kappa_unit_upper = 0.0;
};

struct BoundTable {
  std::vector<BoundRow> rows;  // every state of A in encoder order; z included
  std::string model;
  State z;
  AverageRewardBounds alpha;
  double gate_reward = 0.0;
  double gate_unit = 0.0;
  double max_inner_residual = 0.0;
  double max_outer_residual = 0.0;
  double partition_defect = 0.0;
  long clamped = 0;
  long iterations = 0;

  const BoundRow* find(const State& x) const;
};

struct PoissonOptions {
  SolveMode lower_mode = SolveMode::kDirect;
  // Replaces the regenerative interval for alpha when supplied.
  std::optional<AverageRewardBounds> alpha_override;
  AssembleOptions assemble;
};

// Two-sided bounds on g*(x) = E_x sum_{j < tau(z)} (r(X_j) - alpha) over A,
// with r = cert_r.q and the unit function taken from cert_e.q. The point
// approximation kappa_(x,r) - (kappa_(z,r)/kappa_(z,e)) kappa_(x,e) is built
// from lower-bound ingredients only and is not guaranteed to lie inside.
BoundTable g_bounds(const DtmcModel& model, const LyapunovCertificate& cert_r, const LyapunovCertificate& cert_e,
                    const Partition& part, const PoissonOptions& options = {});

// Jump-process version on the embedded chain with s' = s/lambda and
// e' = 1/lambda; certificates are in embedded units (see embed_certificate).
BoundTable h_bounds(const EmbeddedChain& chain, const LyapunovCertificate& cert_s, const LyapunovCertificate& cert_e,
                    const Partition& part, const PoissonOptions& options = {});

// r = r+ - r- with both parts nonnegative.
std::pair<StateFn, StateFn> split_signed_reward(StateFn r);

// Interval arithmetic on the tables of r+ and r-: lower+ - upper-, upper+ - lower-.
BoundTable combine_signed(const BoundTable& positive, const BoundTable& negative);

// g_bounds for a reward of either sign; certificates supply v for r+ and r-.
BoundTable g_bounds_signed(const DtmcModel& model, const StateFn& r, const LyapunovCertificate& cert_pos,
                           const LyapunovCertificate& cert_neg, const LyapunovCertificate& cert_e,
                           const Partition& part, const PoissonOptions& options = {});

}  // namespace poisbound
