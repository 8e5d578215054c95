#include "poisbound/hitting_bounds.hpp"

#include <cmath>

#include "poisbound/errors.hpp"

namespace poisbound {

namespace {

Eigen::Index nk_of(const BlockSystem& sys) { return static_cast<Eigen::Index>(sys.partition().n_ktilde()); }
Eigen::Index na_of(const BlockSystem& sys) { return static_cast<Eigen::Index>(sys.partition().n_aprime()); }

double max_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

Vector concat(const Vector& head, const Vector& tail) {
  Vector out(head.size() + tail.size());
  out << head, tail;
  return out;
}

Vector product(const SparseMatrix& m, const Vector& x, SolveMode mode) {
  return mode == SolveMode::kMonotone ? ordered_product(m, x) : Vector(m * x);
}

Vector product(const Matrix& m, const Vector& x, SolveMode mode) {
  return mode == SolveMode::kMonotone ? ordered_product(m, x) : Vector(m * x);
}

// Excursion functional: u on A' solves (I - P22) u = rhs2, then rhs1 + P12 u on K~.
Vector excursion(const BlockSystem& sys, const Vector& rhs1, const Vector& rhs2, SolveMode mode,
                 SolveDiagnostics* diag) {
  Vector u2 = solve_inner(sys, rhs2, mode, diag);
  Vector u1 = rhs1 + product(sys.p12(), u2, mode);
  return concat(u1, u2);
}

}  // namespace

QValues restrict_to(const Partition& part, const StateFn& q) {
  QValues out;
  auto checked = [&](const State& x) {
    const double v = q(x);
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidParam("q must be finite and nonnegative; q(" + to_string(x) + ") = " + std::to_string(v));
    return v;
  };
  out.at_z = checked(part.z());
  out.solve.resize(static_cast<Eigen::Index>(part.n_solve()));
  for (std::size_t i = 0; i < part.n_solve(); ++i) out.solve[static_cast<Eigen::Index>(i)] = checked(part.solve_state(i));
  return out;
}

TabooProbabilities compute_G(const BlockSystem& sys, SolveMode mode, SolveDiagnostics* diag) {
  const Eigen::Index nk = nk_of(sys);
  const Eigen::Index na = na_of(sys);
  TabooProbabilities t;
  const Matrix p21 = Matrix(sys.p21());
  t.W.resize(na, nk);
  for (Eigen::Index j = 0; j < nk; ++j) t.W.col(j) = solve_inner(sys, p21.col(j), mode, diag);
  t.w_z = solve_inner(sys, sys.p2z(), mode, diag);
  t.G = Matrix(sys.p11());
  for (Eigen::Index j = 0; j < nk; ++j) t.G.col(j) += product(sys.p12(), Vector(t.W.col(j)), mode);
  t.to_z = sys.p1z() + product(sys.p12(), t.w_z, mode);
  return t;
}

Vector compute_k(const BlockSystem& sys, const QValues& q, SolveMode mode, SolveDiagnostics* diag) {
  const Eigen::Index nk = nk_of(sys);
  if (q.solve.size() != nk + na_of(sys)) throw InvalidParam("compute_k: q has wrong length");
  return excursion(sys, q.solve.head(nk), q.solve.tail(na_of(sys)), mode, diag);
}

Vector compute_kprime_upper(const BlockSystem& sys, SolveDiagnostics* diag) {
  return excursion(sys, sys.tails().t1, sys.tails().t2, SolveMode::kDirect, diag);
}

Vector compute_xi(const BlockSystem& sys, SolveDiagnostics* diag) {
  return excursion(sys, sys.m1(), sys.m2(), SolveMode::kDirect, diag);
}

// ---------------------------------------------------------------------------
// HittingEngine

HittingEngine::HittingEngine(BlockSystem sys, SolveMode lower_mode) : sys_(std::move(sys)), lower_mode_(lower_mode) {
  taboo_ = compute_G(sys_, SolveMode::kDirect, &setup_diag_);
  if (lower_mode_ == SolveMode::kMonotone) taboo_monotone_ = compute_G(sys_, SolveMode::kMonotone, &setup_diag_);
  const Eigen::Index nk = nk_of(sys_);
  if (nk > 0) {
    outer_lu_.compute(Matrix::Identity(nk, nk) - taboo_.G);
    if (!(outer_lu_.rcond() > 1e-14)) throw SingularInner("I - G is numerically singular");
  }
  xi_ = compute_xi(sys_, &setup_diag_);
  kprime_ = compute_kprime_upper(sys_, &setup_diag_);
  double residual = 0.0;
  gate_vector_ = solve_outer(xi_.head(nk), &residual);
  gate_ = max_norm(gate_vector_);
}

double HittingEngine::partition_defect() const {
  const Eigen::Index nk = nk_of(sys_);
  if (nk == 0) return 0.0;
  const Vector total = taboo_.to_z + taboo_.G.rowwise().sum() + xi_.head(nk);
  return (total.array() - 1.0).abs().maxCoeff();
}

HittingEngine HittingEngine::with_tails(const DtmcModel& model, const StateFn& v) const {
  HittingEngine out = *this;
  out.sys_ = sys_.with_tails(model, v);
  out.kprime_ = compute_kprime_upper(out.sys_, &out.setup_diag_);
  return out;
}

Vector HittingEngine::solve_outer(const Vector& rhs, double* residual) const {
  if (rhs.size() == 0) return Vector();
  Vector x = outer_lu_.solve(rhs);
  const double res = max_norm(rhs - (x - taboo_.G * x));
  if (residual) *residual = std::max(*residual, res);
  return x;
}

Vector HittingEngine::lower(const QValues& q, HittingDiagnostics* diag) const {
  const Eigen::Index nk = nk_of(sys_);
  HittingDiagnostics local;
  local.inner = setup_diag_;
  Vector k = compute_k(sys_, q, lower_mode_, &local.inner);
  Vector kappa1;
  const TabooProbabilities& t = lower_mode_ == SolveMode::kMonotone ? *taboo_monotone_ : taboo_;
  if (lower_mode_ == SolveMode::kMonotone) {
    kappa1 = monotone_fixed_point([&](const Vector& w) { return ordered_product(t.G, w); }, k.head(nk),
                                  kMonotoneIterationCap, &local.inner.iterations);
  } else {
    kappa1 = solve_outer(k.head(nk), &local.outer_residual);
    for (Eigen::Index i = 0; i < kappa1.size(); ++i) {
      if (kappa1[i] < 0.0) {
        kappa1[i] = 0.0;
        ++local.inner.clamped;
      }
    }
  }
  Vector kappa2 = k.tail(na_of(sys_)) + product(t.W, kappa1, lower_mode_);
  if (diag) *diag = local;
  return concat(kappa1, kappa2);
}

Vector HittingEngine::upper(const QValues& q, HittingDiagnostics* diag) const {
  if (!gate_passed())
    throw TruncationTooSmall("gate ||(I-G)^{-1} xi|| = " + std::to_string(gate_) + " is not below 1; enlarge A");
  const Eigen::Index nk = nk_of(sys_);
  HittingDiagnostics local;
  local.inner = setup_diag_;
  const Vector beta = compute_k(sys_, q, SolveMode::kDirect, &local.inner) + kprime_;
  const Vector a = solve_outer(beta.head(nk), &local.outer_residual);
  const Vector kappa1 = a + gate_vector_ * (max_norm(a) / (1.0 - gate_));
  const Vector kappa2 = beta.tail(na_of(sys_)) + taboo_.W * kappa1 + xi_.tail(na_of(sys_)) * max_norm(kappa1);
  if (diag) *diag = local;
  return concat(kappa1, kappa2);
}

HittingBoundResult HittingEngine::bounds(const QValues& q) const {
  HittingBoundResult r;
  r.gate = gate_;
  r.lower = lower(q, &r.diag);
  if (gate_passed()) {
    HittingDiagnostics up;
    r.upper = upper(q, &up);
    r.diag.inner.merge(up.inner);
    r.diag.outer_residual = std::max(r.diag.outer_residual, up.outer_residual);
  }
  return r;
}

Vector lower_kappa(const BlockSystem& sys, const QValues& q, SolveMode mode) {
  return HittingEngine(sys, mode).lower(q);
}

Vector upper_kappa(const BlockSystem& sys, const QValues& q) { return HittingEngine(sys).upper(q); }

HittingBoundResult hitting_bounds(const BlockSystem& sys, const QValues& q, SolveMode lower_mode) {
  return HittingEngine(sys, lower_mode).bounds(q);
}

HittingBoundResult hitting_bounds(const DtmcModel& model, const LyapunovCertificate& cert, const Partition& part,
                                  const HittingOptions& options) {
  BlockSystem sys = assemble(model, cert.v, part, options.assemble);
  return HittingEngine(std::move(sys), options.lower_mode).bounds(restrict_to(part, cert.q));
}

}  // namespace poisbound
