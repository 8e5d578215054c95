#include "poisbound/poisson_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "poisbound/errors.hpp"

namespace poisbound {

namespace {

double ktilde_norm(const Vector& v, std::size_t nk) {
  return nk == 0 ? 0.0 : v.head(static_cast<Eigen::Index>(nk)).lpNorm<Eigen::Infinity>();
}

double z_row_dot(const BlockSystem& sys, const Vector& values) {
  const auto nk = static_cast<Eigen::Index>(sys.partition().n_ktilde());
  const auto na = static_cast<Eigen::Index>(sys.partition().n_aprime());
  return sys.pz1().dot(values.head(nk)) + sys.pz2().dot(values.tail(na));
}

}  // namespace

const BoundRow* BoundTable::find(const State& x) const {
  auto it = std::lower_bound(rows.begin(), rows.end(), x, [](const BoundRow& r, const State& s) { return r.x < s; });
  return it != rows.end() && it->x == x ? &*it : nullptr;
}

ZBounds z_state_bounds(const BlockSystem& sys, const Vector& lower, const std::optional<Vector>& upper,
                       double q_at_z) {
  ZBounds out;
  out.lower = q_at_z + z_row_dot(sys, lower);
  if (upper) {
    const double norm = ktilde_norm(*upper, sys.partition().n_ktilde());
    out.upper = q_at_z + z_row_dot(sys, *upper) + sys.tails().tz + sys.mz() * norm;
  } else {
    out.upper = std::numeric_limits<double>::infinity();
  }
  return out;
}

AverageRewardBounds alpha_bounds(const ZBounds& reward, const ZBounds& unit) {
  if (!(unit.lower > 0.0)) throw DegenerateDenominator("lower bound on the mean cycle length is not positive");
  return {reward.lower / unit.upper, reward.upper / unit.lower};
}

BoundTable g_bounds(const DtmcModel& model, const LyapunovCertificate& cert_r, const LyapunovCertificate& cert_e,
                    const Partition& part, const PoissonOptions& options) {
  HittingEngine engine_r(assemble(model, cert_r.v, part, options.assemble), options.lower_mode);
  if (!engine_r.gate_passed())
    throw TruncationTooSmall("gate ||(I-G)^{-1} xi|| = " + std::to_string(engine_r.gate()) + " is not below 1; enlarge A");
  HittingEngine engine_e = engine_r.with_tails(model, cert_e.v);

  const QValues qr = restrict_to(part, cert_r.q);
  const QValues qe = restrict_to(part, cert_e.q);
  const HittingBoundResult r = engine_r.bounds(qr);
  const HittingBoundResult e = engine_e.bounds(qe);
  const ZBounds zr = z_state_bounds(engine_r.system(), r.lower, r.upper, qr.at_z);
  const ZBounds ze = z_state_bounds(engine_e.system(), e.lower, e.upper, qe.at_z);

  BoundTable table;
  table.model = model.name();
  table.z = part.z();
  table.alpha = options.alpha_override ? *options.alpha_override : alpha_bounds(zr, ze);
  table.gate_reward = r.gate;
  table.gate_unit = e.gate;
  table.max_inner_residual = std::max(r.diag.inner.max_residual, e.diag.inner.max_residual);
  table.max_outer_residual = std::max(r.diag.outer_residual, e.diag.outer_residual);
  table.partition_defect = engine_r.partition_defect();
  table.clamped = r.diag.inner.clamped + e.diag.inner.clamped;
  table.iterations = r.diag.inner.iterations + e.diag.inner.iterations;

  if (!(ze.lower > 0.0)) throw DegenerateDenominator("kappa_(z,e) is not positive");
  const double ratio = zr.lower / ze.lower;
  const double a_lo = table.alpha.lower;
  const double a_hi = table.alpha.upper;
  table.rows.reserve(part.A().size());
  for (const State& x : part.A()) {
    BoundRow row;
    row.x = x;
    const long i = part.solve_index(x);
    if (i >= 0) {
      const double lr = r.lower[i], ur = (*r.upper)[i];
      const double le = e.lower[i], ue = (*e.upper)[i];
      row.lower = lr - a_hi * ue;
      row.upper = ur - a_lo * le;
      row.approx = lr - ratio * le;
      row.kappa_reward_lower = lr;
      row.kappa_reward_upper = ur;
      row.kappa_unit_lower = le;
      row.kappa_unit_upper = ue;
    } else {
      row.kappa_reward_lower = zr.lower;
      row.kappa_reward_upper = zr.upper;
      row.kappa_unit_lower = ze.lower;
      row.kappa_unit_upper = ze.upper;
    }
    table.rows.push_back(row);
  }
  return table;
}

BoundTable h_bounds(const EmbeddedChain& chain, const LyapunovCertificate& cert_s, const LyapunovCertificate& cert_e,
                    const Partition& part, const PoissonOptions& options) {
  return g_bounds(chain, cert_s, cert_e, part, options);
}

std::pair<StateFn, StateFn> split_signed_reward(StateFn r) {
  StateFn pos = [r](const State& x) { return std::max(r(x), 0.0); };
  StateFn neg = [r](const State& x) { return std::max(-r(x), 0.0); };
  return {pos, neg};
}

BoundTable combine_signed(const BoundTable& positive, const BoundTable& negative) {
  if (positive.rows.size() != negative.rows.size()) throw InvalidParam("combine_signed: tables differ in size");
  BoundTable out = positive;
  out.alpha = {positive.alpha.lower - negative.alpha.upper, positive.alpha.upper - negative.alpha.lower};
  out.gate_reward = std::max(positive.gate_reward, negative.gate_reward);
  out.max_inner_residual = std::max(positive.max_inner_residual, negative.max_inner_residual);
  out.max_outer_residual = std::max(positive.max_outer_residual, negative.max_outer_residual);
  out.partition_defect = std::max(positive.partition_defect, negative.partition_defect);
  out.clamped += negative.clamped;
  out.iterations += negative.iterations;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const BoundRow& p = positive.rows[i];
    const BoundRow& n = negative.rows[i];
    if (p.x != n.x) throw InvalidParam("combine_signed: state order differs");
    out.rows[i].lower = p.lower - n.upper;
    out.rows[i].upper = p.upper - n.lower;
    out.rows[i].approx = p.approx - n.approx;
    out.rows[i].exact.reset();
  }
  return out;
}

BoundTable g_bounds_signed(const DtmcModel& model, const StateFn& r, const LyapunovCertificate& cert_pos,
                           const LyapunovCertificate& cert_neg, const LyapunovCertificate& cert_e,
                           const Partition& part, const PoissonOptions& options) {
  auto [pos, neg] = split_signed_reward(r);
  LyapunovCertificate cp = cert_pos;
  cp.q = pos;
  LyapunovCertificate cn = cert_neg;
  cn.q = neg;
  PoissonOptions opts = options;
  opts.alpha_override.reset();
  return combine_signed(g_bounds(model, cp, cert_e, part, opts), g_bounds(model, cn, cert_e, part, opts));
}

}  // namespace poisbound
