#pragma once

#include <memory>
#include <vector>

#include "poisbound/certificate.hpp"
#include "poisbound/markov_model.hpp"
#include "poisbound/oracle.hpp"
#include "poisbound/truncation.hpp"

namespace testing_support {

using namespace poisbound;

inline StateSet interval(int lo, int hi) {
  return StateSet::filter({hi}, [lo](const State& x) { return x[0] >= lo; });
}

inline LyapunovCertificate slotted_cert(const SlottedQueue& m, bool unit = false) {
  LyapunovCertificate c;
  c.v = quadratic_form({2.0});
  c.K = StateSet::box({9});
  if (unit) {
    c.q = [](const State&) { return 1.0; };
    c.c = minimal_c(m, c.v, c.q, c.K);
  } else {
    c.q = [](const State& x) { return double(x[0]); };
    c.c = 24.456;
  }
  return c;
}

// Birth-death walk on {0..n-1}: up with p, down with 1-p, reflecting.
inline ExplicitDtmc birth_death(int n, double p) {
  std::vector<Row> rows(static_cast<std::size_t>(n));
  std::vector<double> rewards(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Row& r = rows[static_cast<std::size_t>(i)];
    if (i == 0) {
      r = {{State{0}, 1.0 - p}, {State{1}, p}};
    } else if (i == n - 1) {
      r = {{State{i - 1}, 1.0 - p}, {State{i}, p}};
    } else {
      r = {{State{i - 1}, 1.0 - p}, {State{i + 1}, p}};
    }
    rewards[static_cast<std::size_t>(i)] = i;
  }
  return ExplicitDtmc(rows, rewards, "birth_death");
}

// Forward ring on {0..n-1}: i -> i+1 w.p. 0.7, i -> i+2 w.p. 0.3, mod n.
// From 1 and 2 the only way back to 0 is around the ring, so any A short of
// the whole ring fails the gate.
inline ExplicitDtmc ring(int n) {
  std::vector<Row> rows(static_cast<std::size_t>(n));
  std::vector<double> rewards(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    rows[static_cast<std::size_t>(i)] = {{State{(i + 1) % n}, 0.7}, {State{(i + 2) % n}, 0.3}};
    rewards[static_cast<std::size_t>(i)] = i;
  }
  return ExplicitDtmc(rows, rewards, "ring");
}

// v = 10 (n - x) drifts down by 13 per step away from the wrap, which covers
// q <= 13 on any A that stays below n - 2.
inline LyapunovCertificate ring_cert(const ExplicitDtmc& m, bool unit = false) {
  const int n = static_cast<int>(m.size());
  LyapunovCertificate c;
  c.v = [n](const State& x) { return 10.0 * (n - x[0]); };
  if (unit) c.q = [](const State&) { return 1.0; };
  else c.q = [](const State& x) { return double(x[0]); };
  c.K = StateSet::box({2});
  c.c = minimal_c(m, c.v, c.q, c.K);
  return c;
}

// Certificate for a finite chain with A equal to the whole space: any v
// works since nothing leaves A; K is the whole space so c absorbs the drift.
inline LyapunovCertificate full_space_cert(const ExplicitDtmc& m, StateFn q) {
  LyapunovCertificate c;
  c.v = [](const State&) { return 0.0; };
  c.q = std::move(q);
  c.K = StateSet::box({static_cast<int>(m.size()) - 1});
  c.c = minimal_c(m, c.v, c.q, c.K);
  return c;
}

inline Vector on_chain(const oracle::FiniteChain& fc, const StateFn& f) {
  Vector out(static_cast<Eigen::Index>(fc.size()));
  for (std::size_t i = 0; i < fc.size(); ++i) out[static_cast<Eigen::Index>(i)] = f(fc.states[i]);
  return out;
}

}  // namespace testing_support
