#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "poisbound/markov_model.hpp"
#include "poisbound/state.hpp"

namespace poisbound {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// kDirect: sparse LU. kMonotone: u_{k+1} = P22 u_k + rhs from u_0 = 0, run to
// a floating-point fixed point; iterates never exceed the true solution.
enum class SolveMode { kDirect, kMonotone };

// Regeneration state z, finite K with z in K, and finite A with K in A.
// Solve-block ordering: K~ = K - {z} first (encoder order), then A' = A - K.
class Partition {
 public:
  enum class Region { kZ, kKtilde, kAprime, kOutside };

  Partition(State z, StateSet K, StateSet A);

  const State& z() const { return z_; }
  const StateSet& K() const { return K_; }
  const StateSet& A() const { return A_; }
  const std::vector<State>& ktilde() const { return ktilde_; }
  const std::vector<State>& aprime() const { return aprime_; }

  std::size_t n_ktilde() const { return ktilde_.size(); }
  std::size_t n_aprime() const { return aprime_.size(); }
  std::size_t n_solve() const { return ktilde_.size() + aprime_.size(); }

  Region region(const State& x) const;
  // Combined index in [0, n_solve()), or -1 for z and for states outside A.
  long solve_index(const State& x) const;
  const State& solve_state(std::size_t i) const;

 private:
  State z_;
  StateSet K_;
  StateSet A_;
  std::vector<State> ktilde_;
  std::vector<State> aprime_;
  std::vector<long> slot_;  // by A index
};

// Upper bound on sum_{y in A^c} P(x,y) v(y), for models whose rows cannot
// be enumerated. Only ever feeds upper bounds.
using TailHook = std::function<double(const State&)>;

struct AssembleOptions {
  std::optional<TailHook> tail_hook;
};

// t(x) = sum_{y in A^c} P(x,y) v(y) on K~ (t1), A' (t2) and at z.
struct TailTerms {
  Vector t1;
  Vector t2;
  double tz = 0.0;
  bool exact = true;
};

struct SolveDiagnostics {
  double max_residual = 0.0;
  long clamped = 0;
  long iterations = 0;
  long solves = 0;

  void merge(const SolveDiagnostics& other);
};

namespace detail {
struct BlockData;
}

// Block-partitioned restriction of P to A, escape masses, and the shared
// factorization of I - P22. Immutable; copies share the factorization.
class BlockSystem {
 public:
  const Partition& partition() const;

  // Transitions within K~ u A'.
  const SparseMatrix& p11() const;
  const SparseMatrix& p12() const;
  const SparseMatrix& p21() const;
  const SparseMatrix& p22() const;
  // One-step probability of landing on z.
  const Vector& p1z() const;
  const Vector& p2z() const;
  // One-step escape mass into A^c.
  const Vector& m1() const;
  const Vector& m2() const;
  // Row of z: into K~, into A', onto itself, and escape mass.
  const Vector& pz1() const;
  const Vector& pz2() const;
  double pzz() const;
  double mz() const;

  const TailTerms& tails() const { return tails_; }
  // Expected number of steps spent in A' before reaching K u A^c.
  const Vector& exit_time() const;

  // Same blocks and factorization, tails recomputed for another Lyapunov function.
  BlockSystem with_tails(const DtmcModel& model, const StateFn& v, const AssembleOptions& options = {}) const;

 private:
  friend BlockSystem assemble(const DtmcModel&, const StateFn&, const Partition&, const AssembleOptions&);
  friend Vector solve_inner(const BlockSystem&, const Vector&, SolveMode, SolveDiagnostics*);

  std::shared_ptr<const detail::BlockData> data_;
  TailTerms tails_;
};

BlockSystem assemble(const DtmcModel& model, const StateFn& v, const Partition& part,
                     const AssembleOptions& options = {});

// Solves (I - P22) u = rhs. Nonnegative right-hand sides give nonnegative
// solutions; rounding negatives are clamped and counted.
Vector solve_inner(const BlockSystem& sys, const Vector& rhs, SolveMode mode = SolveMode::kDirect,
                   SolveDiagnostics* diag = nullptr);

// Sequential-order products used by the monotone path. Each output entry is a
// left-to-right sum over stored entries, so rounding is monotone in the inputs.
Vector ordered_product(const SparseMatrix& m, const Vector& x);
Vector ordered_product(const Matrix& m, const Vector& x);

// Fixed point of u = apply(u) + rhs from u = 0 for a nonnegative operator.
// Throws NoConvergence after max_iterations.
Vector monotone_fixed_point(const std::function<Vector(const Vector&)>& apply, const Vector& rhs,
                            long max_iterations, long* iterations = nullptr);

inline constexpr long kMonotoneIterationCap = 2'000'000;

}  // namespace poisbound
