#include "poisbound/oracle.hpp"

#include <cmath>
#include <deque>
#include <map>
#include <random>

#include <Eigen/SparseLU>

#include "poisbound/errors.hpp"

namespace poisbound::oracle {

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

// I - P with row and column z removed, over the reindexed states != z.
ColMatrix killed_generator(const FiniteChain& chain) {
  const auto n = static_cast<long>(chain.size());
  const long z = static_cast<long>(chain.z);
  auto shift = [z](long i) { return i < z ? i : i - 1; };
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(chain.P.nonZeros()) + static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    if (i == z) continue;
    t.emplace_back(shift(i), shift(i), 1.0);
    for (SparseMatrix::InnerIterator it(chain.P, i); it; ++it)
      if (it.col() != z) t.emplace_back(shift(i), shift(it.col()), -it.value());
  }
  ColMatrix m(n - 1, n - 1);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

Vector drop_z(const Vector& v, std::size_t z) {
  Vector out(v.size() - 1);
  out << v.head(static_cast<Eigen::Index>(z)), v.tail(v.size() - 1 - static_cast<Eigen::Index>(z));
  return out;
}

Vector insert_z(const Vector& v, std::size_t z, double value) {
  Vector out(v.size() + 1);
  out << v.head(static_cast<Eigen::Index>(z)), value, v.tail(v.size() - static_cast<Eigen::Index>(z));
  return out;
}

}  // namespace

std::size_t FiniteChain::index(const State& x) const {
  const long i = states.index_of(x);
  if (i < 0) throw InvalidParam("state " + to_string(x) + " not in the finite chain");
  return static_cast<std::size_t>(i);
}

FiniteChain enumerate_box(const DtmcModel& model, const std::vector<int>& upper, const State& z) {
  FiniteChain chain;
  StateCoder box(upper);
  chain.states = StateSet::box(upper);
  const auto n = static_cast<Eigen::Index>(chain.states.size());
  chain.reward.resize(n);
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index i = 0; i < n; ++i) {
    const State& x = chain.states[static_cast<std::size_t>(i)];
    chain.reward[i] = model.reward(x);
    std::map<long, double> merged;
    for (const auto& tr : model.row(x)) merged[chain.states.index_of(box.clamp(tr.to))] += tr.weight;
    for (const auto& [j, p] : merged) t.emplace_back(i, j, p);
  }
  chain.P.resize(n, n);
  chain.P.setFromTriplets(t.begin(), t.end());
  chain.P.makeCompressed();
  chain.z = chain.index(z);
  return chain;
}

void check_irreducible(const FiniteChain& chain) {
  const std::size_t n = chain.size();
  std::vector<std::vector<std::size_t>> back(n);
  for (Eigen::Index i = 0; i < chain.P.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(chain.P, i); it; ++it)
      if (it.value() > 0.0) back[static_cast<std::size_t>(it.col())].push_back(static_cast<std::size_t>(i));
  auto sweep = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> queue{chain.z};
    seen[chain.z] = 1;
    std::size_t count = 1;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      auto visit = [&](std::size_t w) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          queue.push_back(w);
        }
      };
      if (forward) {
        for (SparseMatrix::InnerIterator it(chain.P, static_cast<Eigen::Index>(u)); it; ++it)
          visit(static_cast<std::size_t>(it.col()));
      } else {
        for (std::size_t w : back[u]) visit(w);
      }
    }
    return count == n;
  };
  if (!sweep(false)) throw Reducible("z is not reachable from every state");
  if (!sweep(true)) throw Reducible("not every state is reachable from z");
}

Vector exact_hitting_reward(const FiniteChain& chain, const Vector& q) {
  if (q.size() != static_cast<Eigen::Index>(chain.size())) throw InvalidParam("q has wrong length");
  check_irreducible(chain);
  if (chain.size() == 1) return Vector::Zero(1);
  Eigen::SparseLU<ColMatrix> lu(killed_generator(chain));
  if (lu.info() != Eigen::Success) throw Reducible("killed generator is singular");
  const Vector rhs = drop_z(q, chain.z);
  Vector f = lu.solve(rhs);
  return insert_z(f, chain.z, 0.0);
}

PoissonSolution exact_poisson(const FiniteChain& chain, const Vector& r, const Vector* weight) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  if (r.size() != n) throw InvalidParam("reward has wrong length");
  const Vector w = weight ? *weight : Vector::Ones(n);
  if (w.size() != n) throw InvalidParam("weight has wrong length");
  check_irreducible(chain);
  PoissonSolution sol;
  if (n == 1) {
    sol.g = Vector::Zero(1);
    sol.pi = Vector::Ones(1);
    sol.alpha = r[0] / w[0];
    return sol;
  }
  const ColMatrix killed = killed_generator(chain);
  Eigen::SparseLU<ColMatrix> lu(killed);
  if (lu.info() != Eigen::Success) throw Reducible("killed generator is singular");

  // Invariant measure normalized by nu(z) = 1: nu_{-z} (I - P_{-z}) = P(z, -z).
  Eigen::SparseLU<ColMatrix> lu_t(ColMatrix(killed.transpose()));
  if (lu_t.info() != Eigen::Success) throw Reducible("transposed killed generator is singular");
  Vector from_z = Vector::Zero(n);
  for (SparseMatrix::InnerIterator it(chain.P, static_cast<Eigen::Index>(chain.z)); it; ++it) from_z[it.col()] = it.value();
  Vector nu = insert_z(lu_t.solve(drop_z(from_z, chain.z)), chain.z, 1.0);
  sol.pi = nu / nu.sum();
  sol.alpha = sol.pi.dot(r) / sol.pi.dot(w);

  const Vector centered = r - sol.alpha * w;
  sol.g = insert_z(lu.solve(drop_z(centered, chain.z)), chain.z, 0.0);
  sol.residual = (chain.P * sol.g - sol.g + centered).lpNorm<Eigen::Infinity>();
  return sol;
}

McEstimate mc_hitting_estimate(const FiniteChain& chain, const Vector& q, const State& x, long n_paths,
                               std::uint64_t seed) {
  if (n_paths < 2) throw InvalidParam("need at least two paths");
  const std::size_t start = chain.index(x);
  // Cumulative rows for inverse-CDF sampling.
  std::vector<std::vector<std::pair<double, std::size_t>>> cdf(chain.size());
  for (Eigen::Index i = 0; i < chain.P.outerSize(); ++i) {
    double acc = 0.0;
    for (SparseMatrix::InnerIterator it(chain.P, i); it; ++it) {
      acc += it.value();
      cdf[static_cast<std::size_t>(i)].emplace_back(acc, static_cast<std::size_t>(it.col()));
    }
  }
  std::mt19937_64 rng(seed);
  auto step = [&](std::size_t s) {
    const auto& row = cdf[s];
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * row.back().first;
    auto it = std::upper_bound(row.begin(), row.end(), u,
                               [](double v, const std::pair<double, std::size_t>& e) { return v < e.first; });
    return it == row.end() ? row.back().second : it->second;
  };
  double sum = 0.0;
  double sum_sq = 0.0;
  for (long p = 0; p < n_paths; ++p) {
    double total = 0.0;
    for (std::size_t s = start; s != chain.z; s = step(s)) total += q[static_cast<Eigen::Index>(s)];
    sum += total;
    sum_sq += total * total;
  }
  McEstimate est;
  est.paths = n_paths;
  est.seed = seed;
  est.mean = sum / static_cast<double>(n_paths);
  const double var = std::max(0.0, (sum_sq - sum * est.mean) / static_cast<double>(n_paths - 1));
  est.half_width = 1.96 * std::sqrt(var / static_cast<double>(n_paths));
  return est;
}

}  // namespace poisbound::oracle
