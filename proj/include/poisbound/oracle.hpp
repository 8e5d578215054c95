#pragma once

#include <cstdint>
#include <vector>

#include "poisbound/markov_model.hpp"
#include "poisbound/truncation.hpp"

// Brute-force references on fully enumerated finite chains. Nothing here
// shares code with the truncation bound engine beyond the model rows.
namespace poisbound::oracle {

struct FiniteChain {
  StateSet states;
  SparseMatrix P;  // row-stochastic, indexed like `states`
  Vector reward;
  std::size_t z = 0;

  std::size_t size() const { return states.size(); }
  std::size_t index(const State& x) const;
};

// All states of the box {0..upper}; transitions leaving the box are moved to
// the nearest boundary state (coordinate-wise clamp).
FiniteChain enumerate_box(const DtmcModel& model, const std::vector<int>& upper, const State& z);

// Throws Reducible unless every state reaches z and z reaches every state.
void check_irreducible(const FiniteChain& chain);

// f(x) = E_x sum_{j < psi(z)} q(X_j), f(z) = 0.
Vector exact_hitting_reward(const FiniteChain& chain, const Vector& q);

struct PoissonSolution {
  Vector g;        // g(z) = 0
  double alpha = 0.0;
  Vector pi;       // stationary distribution
  double residual = 0.0;  // || (P - I) g + r - alpha w ||_inf
};

// Solves (P - I) g = -(r - alpha w) with g(z) = 0 and alpha = pi r / pi w.
// w defaults to the unit function; a jump process on its embedded chain uses
// r = s' and w = e'.
PoissonSolution exact_poisson(const FiniteChain& chain, const Vector& r, const Vector* weight = nullptr);

struct McEstimate {
  double mean = 0.0;
  double half_width = 0.0;  // 95% normal approximation
  long paths = 0;
  std::uint64_t seed = 0;
};

// Monte Carlo estimate of f(x); the generator is std::mt19937_64 with
// 53-bit uniforms, so results are reproducible for a fixed seed.
McEstimate mc_hitting_estimate(const FiniteChain& chain, const Vector& q, const State& x, long n_paths,
                               std::uint64_t seed);

}  // namespace poisbound::oracle
