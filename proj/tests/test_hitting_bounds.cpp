#include <cmath>

#include <gtest/gtest.h>

#include "poisbound/errors.hpp"
#include "poisbound/hitting_bounds.hpp"
#include "poisbound/oracle.hpp"
#include "support.hpp"

using namespace poisbound;
using testing_support::birth_death;
using testing_support::on_chain;
using testing_support::ring;
using testing_support::ring_cert;
using testing_support::slotted_cert;

namespace {

const StateFn kZero = [](const State&) { return 0.0; };
const StateFn kOne = [](const State&) { return 1.0; };

double row_partition_error(const BlockSystem& sys, const TabooProbabilities& tp, const Vector& xi) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < tp.G.rows(); ++i)
    worst = std::max(worst, std::abs(tp.to_z[i] + tp.G.row(i).sum() + xi[i] - 1.0));
  (void)sys;
  return worst;
}

// f on the slotted queue from a clipped box far beyond any A used here.
const oracle::FiniteChain& slotted_reference() {
  static const SlottedQueue m(0.6);
  static const oracle::FiniteChain fc = oracle::enumerate_box(m, {2000}, State{0});
  return fc;
}

}  // namespace

TEST(ComputeG, FullSpaceGIsThePlainBlock) {
  const auto m = birth_death(6, 0.3);
  Partition p(State{0}, StateSet::box({5}), StateSet::box({5}));
  const auto sys = assemble(m, kZero, p);
  const auto tp = compute_G(sys);
  EXPECT_LE((tp.G - Matrix(sys.p11())).lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(compute_xi(sys).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(ComputeG, OneByOneByHand) {
  // {0,1,2}: K~ = {1}, A' = {2}.
  ExplicitDtmc m({{{State{0}, 0.5}, {State{1}, 0.5}},
                  {{State{0}, 0.2}, {State{1}, 0.3}, {State{2}, 0.5}},
                  {{State{1}, 0.6}, {State{2}, 0.4}}},
                 {0, 1, 2});
  Partition p(State{0}, StateSet::box({1}), StateSet::box({2}));
  const auto tp = compute_G(assemble(m, kZero, p));
  EXPECT_NEAR(tp.G(0, 0), 0.3 + 0.5 * 0.6 / (1.0 - 0.4), 1e-15);
  EXPECT_NEAR(tp.to_z[0], 0.2, 1e-15);
}

TEST(ComputeG, SlottedProbabilityPartition) {
  SlottedQueue m(0.6);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({120}));
  const auto sys = assemble(m, quadratic_form({2.0}), p);
  const auto tp = compute_G(sys);
  const Vector xi = compute_xi(sys);
  EXPECT_LE(row_partition_error(sys, tp, xi), 1e-10);
  EXPECT_GE(tp.G.minCoeff(), 0.0);
  EXPECT_LE(tp.G.maxCoeff(), 1.0);
  EXPECT_GE(xi.minCoeff(), 0.0);
  EXPECT_LE(xi.maxCoeff(), 1.0);
  // On A', xi = 1 - sum of W over K.
  for (Eigen::Index i = 0; i < tp.W.rows(); ++i)
    EXPECT_NEAR(xi[9 + i], 1.0 - tp.W.row(i).sum() - tp.w_z[i], 1e-10);
}

TEST(ComputeG, MonotoneModeAgrees) {
  SlottedQueue m(0.6);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({60}));
  const auto sys = assemble(m, quadratic_form({2.0}), p);
  const auto a = compute_G(sys);
  const auto b = compute_G(sys, SolveMode::kMonotone);
  EXPECT_LE((a.G - b.G).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(ComputeK, ZeroQAndEmptyAprime) {
  SlottedQueue m(0.6);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({40}));
  const auto sys = assemble(m, quadratic_form({2.0}), p);
  EXPECT_EQ(compute_k(sys, restrict_to(p, kZero)).lpNorm<Eigen::Infinity>(), 0.0);

  Partition pk(State{0}, StateSet::box({9}), StateSet::box({9}));
  const auto sk = assemble(m, quadratic_form({2.0}), pk);
  const StateFn r = [](const State& x) { return double(x[0]); };
  const Vector k = compute_k(sk, restrict_to(pk, r));
  for (int x = 1; x <= 9; ++x) EXPECT_EQ(k[x - 1], x);
}

TEST(ComputeK, UnitOnAprimeIsExitTime) {
  SlottedQueue m(0.6);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({120}));
  const auto sys = assemble(m, quadratic_form({2.0}), p);
  const Vector k = compute_k(sys, restrict_to(p, kOne));
  const Matrix P22(sys.p22());
  const Vector ref = (Matrix::Identity(111, 111) - P22).partialPivLu().solve(Vector::Ones(111));
  EXPECT_LE((k.tail(111) - ref).lpNorm<Eigen::Infinity>(), 1e-10 * ref.maxCoeff());
}

TEST(ComputeKprime, ZeroWithoutTailsAndDecayingInward) {
  const auto m = birth_death(30, 0.4);
  Partition full(State{0}, StateSet::box({3}), StateSet::box({29}));
  EXPECT_EQ(compute_kprime_upper(assemble(m, quadratic_form({1.0}), full)).lpNorm<Eigen::Infinity>(), 0.0);

  SlottedQueue sq(0.6);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({120}));
  const auto sys = assemble(sq, quadratic_form({2.0}), p);
  const Vector kp = compute_kprime_upper(sys);
  EXPECT_GE(kp.minCoeff(), 0.0);
  EXPECT_GT(kp[p.solve_index(State{120})], 0.0);
  EXPECT_LT(kp[p.solve_index(State{30})], 1e-6 * kp[p.solve_index(State{120})]);
}

TEST(ComputeKprime, WeaklyDecreasesWhenAGrows) {
  SlottedQueue m(0.6);
  const auto v = quadratic_form({2.0});
  Partition small(State{0}, StateSet::box({9}), StateSet::box({120}));
  Partition big(State{0}, StateSet::box({9}), StateSet::box({240}));
  const Vector a = compute_kprime_upper(assemble(m, v, small));
  const Vector b = compute_kprime_upper(assemble(m, v, big));
  for (int x = 1; x <= 100; ++x) {
    const double av = a[small.solve_index(State{x})], bv = b[big.solve_index(State{x})];
    EXPECT_LE(bv, av * (1 + 1e-12) + 1e-300) << x;
  }
}

TEST(ComputeXi, ShrinksAsAGrows) {
  SlottedQueue m(0.6);
  const auto v = quadratic_form({2.0});
  double prev = 2.0;
  for (int n : {20, 30, 45, 60}) {
    Partition p(State{0}, StateSet::box({9}), StateSet::box({n}));
    const double worst = compute_xi(assemble(m, v, p)).head(9).maxCoeff();
    EXPECT_LT(worst, prev);
    prev = worst;
  }
}

TEST(HittingBounds, SlottedRewardSandwich) {
  SlottedQueue m(0.6);
  const auto cert = slotted_cert(m);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({120}));
  const auto res = hitting_bounds(m, cert, p);
  ASSERT_TRUE(res.upper);
  EXPECT_LT(res.gate, 1.0);
  const auto& fc = slotted_reference();
  const Vector f = oracle::exact_hitting_reward(fc, fc.reward);
  for (int x = 1; x <= 120; ++x) {
    const long i = p.solve_index(State{x});
    const double ex = f[x];
    EXPECT_LE(res.lower[i], ex * (1 + 1e-9)) << x;
    EXPECT_GE((*res.upper)[i], ex * (1 - 1e-9)) << x;
  }
}

TEST(HittingBounds, SlottedReturnTimeFromOne) {
  SlottedQueue m(0.6);
  const auto cert = slotted_cert(m, true);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({120}));
  const auto res = hitting_bounds(m, cert, p);
  const auto& fc = slotted_reference();
  const Vector f = oracle::exact_hitting_reward(fc, Vector::Ones(static_cast<Eigen::Index>(fc.size())));
  const long i = p.solve_index(State{1});
  EXPECT_LE(res.lower[i], f[1] * (1 + 1e-12));
  EXPECT_GE((*res.upper)[i], f[1] * (1 - 1e-12));
}

TEST(HittingBounds, TwoMm1ExpectedHittingTime) {
  auto emb = embed_ctmc(std::make_shared<TwoMm1>(2, 5, 1, 3));
  LyapunovCertificate cont;
  cont.v = quadratic_form({1.0, 1.0});
  cont.q = [](const State&) { return 1.0; };
  cont.K = halfspace_set({5, 3}, 11, {2, 3});
  cont.c = 11;
  const auto cert = embed_certificate(emb, cont);
  Partition p(State{0, 0}, cert.K, StateSet::box({30, 30}));
  const auto res = hitting_bounds(*emb, cert, p);
  ASSERT_TRUE(res.upper);
  const auto fc = oracle::enumerate_box(*emb, {200, 200}, State{0, 0});
  const Vector f = oracle::exact_hitting_reward(fc, testing_support::on_chain(fc, cert.q));
  for (std::size_t i = 0; i < p.n_solve(); ++i) {
    const double ex = f[static_cast<Eigen::Index>(fc.index(p.solve_state(i)))];
    EXPECT_LE(res.lower[static_cast<Eigen::Index>(i)], ex * (1 + 1e-9));
    EXPECT_GE((*res.upper)[static_cast<Eigen::Index>(i)], ex * (1 - 1e-9));
  }
}

TEST(HittingBounds, FullSpaceCollapses) {
  const auto m = birth_death(25, 0.45);
  const StateFn r = [](const State& x) { return double(x[0]); };
  LyapunovCertificate cert = testing_support::full_space_cert(m, r);
  Partition p(State{0}, StateSet::box({4}), StateSet::box({24}));
  const auto res = hitting_bounds(m, cert, p);
  ASSERT_TRUE(res.upper);
  EXPECT_EQ(res.gate, 0.0);
  const auto fc = oracle::enumerate_box(m, {24}, State{0});
  const Vector f = oracle::exact_hitting_reward(fc, fc.reward);
  for (std::size_t i = 0; i < p.n_solve(); ++i) {
    const double ex = f[p.solve_state(i)[0]];
    EXPECT_NEAR(res.lower[static_cast<Eigen::Index>(i)], ex, 1e-9 * (1 + ex));
    EXPECT_NEAR((*res.upper)[static_cast<Eigen::Index>(i)], ex, 1e-9 * (1 + ex));
  }
}

TEST(HittingBounds, ZeroRewardGivesZeroLower) {
  SlottedQueue m(0.6);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({50}));
  const auto sys = assemble(m, quadratic_form({2.0}), p);
  EXPECT_EQ(lower_kappa(sys, restrict_to(p, kZero)).lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(lower_kappa(sys, restrict_to(p, kZero), SolveMode::kMonotone).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(HittingBounds, LowerBoundEqualsKilledChainSolution) {
  // kappa_ is the hitting reward of the chain killed on leaving A.
  SlottedQueue m(0.6);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({60}));
  const auto sys = assemble(m, quadratic_form({2.0}), p);
  const StateFn r = [](const State& x) { return double(x[0]); };
  const Vector lo = lower_kappa(sys, restrict_to(p, r));
  const auto n = static_cast<Eigen::Index>(p.n_solve());
  Matrix M = Matrix::Identity(n, n);
  Vector rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const State x = p.solve_state(static_cast<std::size_t>(i));
    rhs[i] = r(x);
    for (const auto& t : m.row(x)) {
      const long j = p.solve_index(t.to);
      if (j >= 0) M(i, j) -= t.weight;
    }
  }
  const Vector ref = M.partialPivLu().solve(rhs);
  EXPECT_LE((lo - ref).lpNorm<Eigen::Infinity>(), 1e-10 * ref.maxCoeff());
}

TEST(HittingBounds, NestedLowerBoundsAreMonotone) {
  SlottedQueue m(0.6);
  const auto v = quadratic_form({2.0});
  const StateFn r = [](const State& x) { return double(x[0]); };
  std::vector<double> prev;
  for (int n : {30, 45, 60, 90}) {
    Partition p(State{0}, StateSet::box({9}), StateSet::box({n}));
    const Vector lo = lower_kappa(assemble(m, v, p), restrict_to(p, r), SolveMode::kMonotone);
    std::vector<double> cur;
    for (int x = 1; x <= 30; ++x) cur.push_back(lo[p.solve_index(State{x})]);
    if (!prev.empty())
      for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_GE(cur[i], prev[i]) << n << " " << i;
    prev = cur;
  }
}

TEST(HittingBounds, GateFailureRaisesButLowerStays) {
  const auto m = ring(20);
  const auto cert = ring_cert(m);
  Partition p(State{0}, cert.K, StateSet::box({8}));
  EXPECT_TRUE(verify_drift(m, cert, p.A()).passed);
  const auto sys = assemble(m, cert.v, p);
  HittingEngine engine(sys);
  EXPECT_NEAR(engine.gate(), 1.0, 1e-12);
  EXPECT_FALSE(engine.gate_passed());
  const auto q = restrict_to(p, cert.q);
  EXPECT_THROW(engine.upper(q), TruncationTooSmall);
  const auto res = engine.bounds(q);
  EXPECT_FALSE(res.upper);
  const auto fc = oracle::enumerate_box(m, {19}, State{0});
  const Vector f = oracle::exact_hitting_reward(fc, on_chain(fc, cert.q));
  for (int x = 1; x <= 8; ++x) EXPECT_LE(res.lower[p.solve_index(State{x})], f[x] * (1 + 1e-12));
}

TEST(HittingBounds, EmptyKtildeGateIsZero) {
  SlottedQueue m(0.6);
  LyapunovCertificate cert = slotted_cert(m);
  cert.K = StateSet::box({0});
  Partition p(State{0}, cert.K, StateSet::box({80}));
  const auto sys = assemble(m, cert.v, p);
  HittingEngine engine(sys);
  EXPECT_EQ(engine.gate(), 0.0);
  EXPECT_EQ(engine.taboo().G.rows(), 0);
  const auto res = engine.bounds(restrict_to(p, cert.q));
  ASSERT_TRUE(res.upper);
  EXPECT_TRUE(((*res.upper - res.lower).array() >= 0.0).all());
}

TEST(HittingBounds, GateMatchesDirectSolve) {
  SlottedQueue m(0.6);
  Partition p(State{0}, StateSet::box({9}), StateSet::box({25}));
  const auto sys = assemble(m, quadratic_form({2.0}), p);
  HittingEngine engine(sys);
  const Matrix IG = Matrix::Identity(9, 9) - engine.taboo().G;
  const double gate = IG.fullPivLu().solve(Vector(engine.xi().head(9))).lpNorm<Eigen::Infinity>();
  EXPECT_NEAR(engine.gate(), gate, 1e-12 * (1 + gate));
}

TEST(RestrictTo, RejectsNegativeQ) {
  Partition p(State{0}, StateSet::box({2}), StateSet::box({4}));
  EXPECT_THROW(restrict_to(p, [](const State& x) { return x[0] == 3 ? -1.0 : 0.0; }), InvalidParam);
}
