#pragma once

#include <optional>

#include "poisbound/certificate.hpp"
#include "poisbound/truncation.hpp"

namespace poisbound {

// q evaluated on the partition: at z, and on K~ u A' in solve order.
struct QValues {
  double at_z = 0.0;
  Vector solve;
};

// Throws InvalidParam when q is negative or not finite somewhere on A.
QValues restrict_to(const Partition& part, const StateFn& q);

// Taboo quantities of the excursion from K~ (or A') until the next visit to
// K (time T_K) or the first exit from A (time T).
struct TabooProbabilities {
  Matrix G;      // K~ x K~: P_x(X_{T_K} = y, T_K < T)
  Vector to_z;   // K~:      P_x(X_{T_K} = z, T_K < T)
  Matrix W;      // A' x K~: (I - P22)^{-1} P21
  Vector w_z;    // A':      (I - P22)^{-1} P2z
};

TabooProbabilities compute_G(const BlockSystem& sys, SolveMode mode = SolveMode::kDirect,
                             SolveDiagnostics* diag = nullptr);

// k(x,q) = E_x sum_{j < T_K ^ T} q(X_j) on K~ u A'.
Vector compute_k(const BlockSystem& sys, const QValues& q, SolveMode mode = SolveMode::kDirect,
                 SolveDiagnostics* diag = nullptr);

// Upper bound on E_x sum_{T <= j < T_K} q(X_j) from the tail terms:
// t1 + P12 (I - P22)^{-1} t2 on K~, (I - P22)^{-1} t2 on A'.
Vector compute_kprime_upper(const BlockSystem& sys, SolveDiagnostics* diag = nullptr);

// xi(x) = P_x(T < T_K), computed from the one-step escape masses.
Vector compute_xi(const BlockSystem& sys, SolveDiagnostics* diag = nullptr);

struct HittingDiagnostics {
  SolveDiagnostics inner;
  // || (I-G) kappa - rhs ||_inf of the K~ systems.
  double outer_residual = 0.0;
};

struct HittingBoundResult {
  Vector lower;                 // on K~ u A'
  std::optional<Vector> upper;  // present iff gate < 1
  double gate = 0.0;            // || (I - G)^{-1} xi ||_{K~}
  HittingDiagnostics diag;
};

// Reusable bound computation for one BlockSystem; q-independent pieces
// (taboo probabilities, xi, k~', the K~ factorization, the gate) are built
// once. Lower bounds use `lower_mode`; upper bounds always use direct solves.
class HittingEngine {
 public:
  explicit HittingEngine(BlockSystem sys, SolveMode lower_mode = SolveMode::kDirect);

  const BlockSystem& system() const { return sys_; }
  const Partition& partition() const { return sys_.partition(); }
  const TabooProbabilities& taboo() const { return taboo_; }
  const Vector& xi() const { return xi_; }
  const Vector& kprime_upper() const { return kprime_; }
  double gate() const { return gate_; }
  // The gate is a probability and hits 1 exactly when some K~ state cannot
  // reach z inside A; rounding can land that just under 1, hence the margin.
  static constexpr double kGateMargin = 1e-10;
  bool gate_passed() const { return gate_ < 1.0 - kGateMargin; }
  SolveMode lower_mode() const { return lower_mode_; }
  // max over K~ of |to_z + G 1 + xi - 1|; every excursion ends in exactly one
  // of the three ways, so this is rounding only.
  double partition_defect() const;

  Vector lower(const QValues& q, HittingDiagnostics* diag = nullptr) const;
  // Throws TruncationTooSmall unless gate_passed().
  Vector upper(const QValues& q, HittingDiagnostics* diag = nullptr) const;
  HittingBoundResult bounds(const QValues& q) const;

  // Rebuild with the same lower-bound mode but tails for another Lyapunov function.
  HittingEngine with_tails(const DtmcModel& model, const StateFn& v) const;

 private:
  Vector solve_outer(const Vector& rhs, double* residual) const;

  BlockSystem sys_;
  SolveMode lower_mode_;
  TabooProbabilities taboo_;
  std::optional<TabooProbabilities> taboo_monotone_;
  Eigen::PartialPivLU<Matrix> outer_lu_;
  Vector xi_;
  Vector kprime_;
  Vector gate_vector_;
  double gate_ = 0.0;
  SolveDiagnostics setup_diag_;
};

Vector lower_kappa(const BlockSystem& sys, const QValues& q, SolveMode mode = SolveMode::kDirect);
Vector upper_kappa(const BlockSystem& sys, const QValues& q);

struct HittingOptions {
  SolveMode lower_mode = SolveMode::kDirect;
  AssembleOptions assemble;
};

HittingBoundResult hitting_bounds(const BlockSystem& sys, const QValues& q, SolveMode lower_mode = SolveMode::kDirect);
// Assembles with the certificate's v and bounds E_x sum_{j < tau(z)} q(X_j) for
// q = cert.q. The certificate is assumed verified (see verify_drift).
HittingBoundResult hitting_bounds(const DtmcModel& model, const LyapunovCertificate& cert, const Partition& part,
                                  const HittingOptions& options = {});

}  // namespace poisbound
