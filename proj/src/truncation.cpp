#include "poisbound/truncation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseLU>

#include "poisbound/errors.hpp"

namespace poisbound {

namespace detail {

struct BlockData {
  Partition part;
  SparseMatrix p11, p12, p21, p22;
  Vector p1z, p2z, m1, m2;
  Vector pz1, pz2;
  double pzz = 0.0;
  double mz = 0.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double, Eigen::ColMajor>, Eigen::COLAMDOrdering<int>> lu;
  bool empty_inner = false;
  Vector exit_time;

  explicit BlockData(Partition p) : part(std::move(p)) {}
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Partition

Partition::Partition(State z, StateSet K, StateSet A) : z_(z), K_(std::move(K)), A_(std::move(A)) {
  if (!K_.contains(z_)) throw InvalidParam("regeneration state " + to_string(z_) + " must lie in K");
  if (!K_.is_subset_of(A_)) throw InvalidParam("K must be a subset of A");
  slot_.assign(A_.size(), -1);
  for (const State& x : K_)
    if (x != z_) ktilde_.push_back(x);
  for (const State& x : A_)
    if (!K_.contains(x)) aprime_.push_back(x);
  for (std::size_t i = 0; i < ktilde_.size(); ++i) slot_[static_cast<std::size_t>(A_.index_of(ktilde_[i]))] = static_cast<long>(i);
  for (std::size_t i = 0; i < aprime_.size(); ++i)
    slot_[static_cast<std::size_t>(A_.index_of(aprime_[i]))] = static_cast<long>(ktilde_.size() + i);
}

Partition::Region Partition::region(const State& x) const {
  if (x == z_) return Region::kZ;
  const long s = solve_index(x);
  if (s < 0) return Region::kOutside;
  return static_cast<std::size_t>(s) < ktilde_.size() ? Region::kKtilde : Region::kAprime;
}

long Partition::solve_index(const State& x) const {
  const long a = A_.index_of(x);
  return a < 0 ? -1 : slot_[static_cast<std::size_t>(a)];
}

const State& Partition::solve_state(std::size_t i) const {
  return i < ktilde_.size() ? ktilde_[i] : aprime_.at(i - ktilde_.size());
}

// ---------------------------------------------------------------------------
// Products and fixed points

Vector ordered_product(const SparseMatrix& m, const Vector& x) {
  Vector out = Vector::Zero(m.rows());
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    double acc = 0.0;
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) acc += it.value() * x[it.col()];
    out[r] = acc;
  }
  return out;
}

Vector ordered_product(const Matrix& m, const Vector& x) {
  Vector out = Vector::Zero(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) acc += m(r, c) * x[c];
    out[r] = acc;
  }
  return out;
}

Vector monotone_fixed_point(const std::function<Vector(const Vector&)>& apply, const Vector& rhs,
                            long max_iterations, long* iterations) {
  Vector u = Vector::Zero(rhs.size());
  long it = 0;
  while (true) {
    Vector next = apply(u) + rhs;
    ++it;
    if (next == u) break;
    if (!next.allFinite()) throw NoConvergence("monotone iteration diverged");
    if (it >= max_iterations) throw NoConvergence("monotone iteration hit cap of " + std::to_string(max_iterations));
    u.swap(next);
  }
  if (iterations) *iterations += it;
  return u;
}

void SolveDiagnostics::merge(const SolveDiagnostics& other) {
  max_residual = std::max(max_residual, other.max_residual);
  clamped += other.clamped;
  iterations += other.iterations;
  solves += other.solves;
}

// ---------------------------------------------------------------------------
// BlockSystem

const Partition& BlockSystem::partition() const { return data_->part; }
const SparseMatrix& BlockSystem::p11() const { return data_->p11; }
const SparseMatrix& BlockSystem::p12() const { return data_->p12; }
const SparseMatrix& BlockSystem::p21() const { return data_->p21; }
const SparseMatrix& BlockSystem::p22() const { return data_->p22; }
const Vector& BlockSystem::p1z() const { return data_->p1z; }
const Vector& BlockSystem::p2z() const { return data_->p2z; }
const Vector& BlockSystem::m1() const { return data_->m1; }
const Vector& BlockSystem::m2() const { return data_->m2; }
const Vector& BlockSystem::pz1() const { return data_->pz1; }
const Vector& BlockSystem::pz2() const { return data_->pz2; }
double BlockSystem::pzz() const { return data_->pzz; }
double BlockSystem::mz() const { return data_->mz; }
const Vector& BlockSystem::exit_time() const { return data_->exit_time; }

namespace {

constexpr double kRowSumTolerance = 1e-12;

TailTerms compute_tails(const DtmcModel& model, const StateFn& v, const Partition& part,
                        const AssembleOptions& options) {
  TailTerms t;
  const auto nk = static_cast<Eigen::Index>(part.n_ktilde());
  t.t1 = Vector::Zero(nk);
  t.t2 = Vector::Zero(static_cast<Eigen::Index>(part.n_aprime()));
  auto tail_at = [&](const State& x) {
    if (options.tail_hook) return (*options.tail_hook)(x);
    double acc = 0.0;
    for (const auto& tr : model.row(x)) {
      if (part.A().contains(tr.to)) continue;
      const double vy = v(tr.to);
      if (!(vy >= 0.0) || !std::isfinite(vy)) throw InvalidParam("Lyapunov function invalid at " + to_string(tr.to));
      acc += tr.weight * vy;
    }
    return acc;
  };
  for (std::size_t i = 0; i < part.n_solve(); ++i) {
    const double value = tail_at(part.solve_state(i));
    if (!(value >= 0.0)) throw InvalidParam("negative tail term");
    if (i < part.n_ktilde())
      t.t1[static_cast<Eigen::Index>(i)] = value;
    else
      t.t2[static_cast<Eigen::Index>(i - part.n_ktilde())] = value;
  }
  t.tz = tail_at(part.z());
  t.exact = !options.tail_hook.has_value();
  return t;
}

}  // namespace

BlockSystem BlockSystem::with_tails(const DtmcModel& model, const StateFn& v, const AssembleOptions& options) const {
  BlockSystem out = *this;
  out.tails_ = compute_tails(model, v, data_->part, options);
  return out;
}

BlockSystem assemble(const DtmcModel& model, const StateFn& v, const Partition& part, const AssembleOptions& options) {
  auto data = std::make_shared<detail::BlockData>(part);
  const std::size_t nk = part.n_ktilde();
  const std::size_t na = part.n_aprime();
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> t11, t12, t21, t22;
  data->p1z = Vector::Zero(static_cast<Eigen::Index>(nk));
  data->m1 = Vector::Zero(static_cast<Eigen::Index>(nk));
  data->p2z = Vector::Zero(static_cast<Eigen::Index>(na));
  data->m2 = Vector::Zero(static_cast<Eigen::Index>(na));
  data->pz1 = Vector::Zero(static_cast<Eigen::Index>(nk));
  data->pz2 = Vector::Zero(static_cast<Eigen::Index>(na));

  for (const State& x : part.A())
    if (!model.in_space(x)) throw InvalidParam("truncation set contains " + to_string(x) + " outside the state space");

  auto scan_row = [&](const State& x) {
    const Partition::Region from = part.region(x);
    const long si = part.solve_index(x);
    double total = 0.0;
    for (const auto& tr : model.row(x)) {
      total += tr.weight;
      const Partition::Region to = part.region(tr.to);
      const long sj = part.solve_index(tr.to);
      if (from == Partition::Region::kZ) {
        switch (to) {
          case Partition::Region::kZ: data->pzz += tr.weight; break;
          case Partition::Region::kKtilde: data->pz1[sj] += tr.weight; break;
          case Partition::Region::kAprime: data->pz2[sj - static_cast<long>(nk)] += tr.weight; break;
          case Partition::Region::kOutside: data->mz += tr.weight; break;
        }
        continue;
      }
      const bool from_k = from == Partition::Region::kKtilde;
      const long row = from_k ? si : si - static_cast<long>(nk);
      switch (to) {
        case Partition::Region::kZ: (from_k ? data->p1z : data->p2z)[row] += tr.weight; break;
        case Partition::Region::kKtilde: (from_k ? t11 : t21).emplace_back(row, sj, tr.weight); break;
        case Partition::Region::kAprime: (from_k ? t12 : t22).emplace_back(row, sj - static_cast<long>(nk), tr.weight); break;
        case Partition::Region::kOutside: (from_k ? data->m1 : data->m2)[row] += tr.weight; break;
      }
    }
    if (std::abs(total - 1.0) > kRowSumTolerance)
      throw InvalidParam("row of " + to_string(x) + " sums to " + std::to_string(total));
  };
  scan_row(part.z());
  for (std::size_t i = 0; i < part.n_solve(); ++i) scan_row(part.solve_state(i));

  auto build = [](SparseMatrix& m, Eigen::Index rows, Eigen::Index cols, const std::vector<Triplet>& t) {
    m.resize(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
  };
  const auto ek = static_cast<Eigen::Index>(nk);
  const auto ea = static_cast<Eigen::Index>(na);
  build(data->p11, ek, ek, t11);
  build(data->p12, ek, ea, t12);
  build(data->p21, ea, ek, t21);
  build(data->p22, ea, ea, t22);

  data->empty_inner = na == 0;
  if (!data->empty_inner) {
    Eigen::SparseMatrix<double, Eigen::ColMajor> inner(ea, ea);
    inner.setIdentity();
    inner -= Eigen::SparseMatrix<double, Eigen::ColMajor>(data->p22);
    inner.makeCompressed();
    data->lu.compute(inner);
    if (data->lu.info() != Eigen::Success)
      throw SingularInner("factorization of I - P22 failed: " + data->lu.lastErrorMessage());
  }

  BlockSystem sys;
  sys.data_ = data;
  sys.tails_ = compute_tails(model, v, part, options);

  // A finite nonnegative expected exit time certifies spectral radius(P22) < 1.
  Vector exit_time = solve_inner(sys, Vector::Ones(ea));
  if (!exit_time.allFinite()) throw SingularInner("inner exit times are not finite");
  data->exit_time = std::move(exit_time);
  return sys;
}

Vector solve_inner(const BlockSystem& sys, const Vector& rhs, SolveMode mode, SolveDiagnostics* diag) {
  const auto& d = *sys.data_;
  if (rhs.size() != d.p22.rows()) throw InvalidParam("solve_inner: right-hand side has wrong length");
  if (!rhs.allFinite()) throw InvalidParam("solve_inner: right-hand side not finite");
  SolveDiagnostics local;
  local.solves = 1;
  if (d.empty_inner) {
    if (diag) diag->merge(local);
    return rhs;
  }
  const bool nonnegative = (rhs.array() >= 0.0).all();
  auto residual_of = [&](const Vector& u) { return (rhs - (u - d.p22 * u)).lpNorm<Eigen::Infinity>(); };
  const double tol = 1e-10 * (1.0 + rhs.lpNorm<Eigen::Infinity>());

  Vector u;
  if (mode == SolveMode::kMonotone) {
    if (!nonnegative) throw InvalidParam("monotone solve requires a nonnegative right-hand side");
    u = monotone_fixed_point([&](const Vector& w) { return ordered_product(d.p22, w); }, rhs,
                             kMonotoneIterationCap, &local.iterations);
  } else {
    u = d.lu.solve(rhs);
    if (d.lu.info() != Eigen::Success) throw SingularInner("LU solve failed");
    double res = residual_of(u);
    if (!(res <= tol) && u.allFinite()) {
      u += d.lu.solve(Vector(rhs - (u - d.p22 * u)));  // one refinement step
      res = residual_of(u);
    }
    if (!(res <= tol)) {
      if (!nonnegative) throw SingularInner("inner solve residual " + std::to_string(res) + " exceeds tolerance");
      u = monotone_fixed_point([&](const Vector& w) { return ordered_product(d.p22, w); }, rhs,
                               kMonotoneIterationCap, &local.iterations);
    }
    if (nonnegative) {
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u[i] < 0.0) {
          u[i] = 0.0;
          ++local.clamped;
        }
      }
    }
  }
  local.max_residual = residual_of(u);
  if (diag) diag->merge(local);
  return u;
}

}  // namespace poisbound
