#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "poisbound/state.hpp"

namespace poisbound {

// One entry of a sparse row: a transition probability (DTMC) or a rate (CTMC).
struct Transition {
  State to;
  double weight = 0.0;
};

using Row = std::vector<Transition>;

// Discrete-time chain over a countable subset of Z_+^d, generated row by row.
// Rows have finite support, strictly positive entries, no duplicate targets,
// and sum to one.
class DtmcModel {
 public:
  virtual ~DtmcModel() = default;

  virtual int dimension() const = 0;
  virtual Row row(const State& x) const = 0;
  // Per-step reward r(x) >= 0.
  virtual double reward(const State& x) const = 0;
  virtual std::string name() const = 0;
  virtual nlohmann::json params() const = 0;
  // Membership in the (possibly infinite) state space.
  virtual bool in_space(const State& x) const;
};

// Markov jump process given by off-diagonal rates. Every state has a
// strictly positive total exit rate.
class CtmcModel {
 public:
  virtual ~CtmcModel() = default;

  virtual int dimension() const = 0;
  virtual Row rate_row(const State& x) const = 0;
  // Reward rate s(x) >= 0.
  virtual double reward(const State& x) const = 0;
  virtual std::string name() const = 0;
  virtual nlohmann::json params() const = 0;
  virtual bool in_space(const State& x) const;

  // lambda(x): total exit rate recomputed from the row.
  double exit_rate(const State& x) const;
};

// Jump chain of a CTMC: R(x,y) = Q(x,y)/lambda(x), R(x,x) = 0. The reward
// of the embedded chain is s'(x) = s(x)/lambda(x).
class EmbeddedChain final : public DtmcModel {
 public:
  explicit EmbeddedChain(std::shared_ptr<const CtmcModel> ctmc);

  int dimension() const override { return ctmc_->dimension(); }
  Row row(const State& x) const override;
  double reward(const State& x) const override { return scaled_reward(x); }
  std::string name() const override { return ctmc_->name(); }
  nlohmann::json params() const override { return ctmc_->params(); }
  bool in_space(const State& x) const override { return ctmc_->in_space(x); }

  const CtmcModel& ctmc() const { return *ctmc_; }
  // lambda(x); throws ZeroExitRate when it vanishes.
  double holding_rate(const State& x) const;
  double scaled_reward(const State& x) const { return ctmc_->reward(x) / holding_rate(x); }
  double scaled_unit(const State& x) const { return 1.0 / holding_rate(x); }

 private:
  std::shared_ptr<const CtmcModel> ctmc_;
};

std::shared_ptr<const EmbeddedChain> embed_ctmc(std::shared_ptr<const CtmcModel> ctmc);

// X_{n+1} = [X_n + B_n - D_{n+1}]^+ with B uniform on {1,2,3} and
// P(D = k) = (1-q) q^{k-1}, k >= 1. Reward r(x) = x.
class SlottedQueue final : public DtmcModel {
 public:
  explicit SlottedQueue(double q);

  int dimension() const override { return 1; }
  Row row(const State& x) const override;
  double reward(const State& x) const override { return x[0]; }
  std::string name() const override { return "slotted_queue"; }
  nlohmann::json params() const override { return {{"q", q_}}; }

  double q() const { return q_; }
  // P(B - D = -k) = (1-q) q^{k-1} (q + q^2 + q^3)/3 for k >= 1.
  double left_tail_pmf(int k) const;

 private:
  double q_;
};

// Two independent M/M/1 queues. Reward s(x) = x1 + x2.
class TwoMm1 final : public CtmcModel {
 public:
  TwoMm1(double lambda1, double mu1, double lambda2, double mu2);

  int dimension() const override { return 2; }
  Row rate_row(const State& x) const override;
  double reward(const State& x) const override { return x[0] + x[1]; }
  std::string name() const override { return "two_mm1"; }
  nlohmann::json params() const override;

  double lambda(int i) const { return lambda_[static_cast<std::size_t>(i)]; }
  double mu(int i) const { return mu_[static_cast<std::size_t>(i)]; }

 private:
  std::array<double, 2> lambda_;
  std::array<double, 2> mu_;
};

// Open Jackson network of single-server FCFS stations. A customer finishing
// service at i joins j with probability routing[i][j] and leaves with
// probability 1 - sum_j routing[i][j]. Reward s(x) = sum_i x_i.
class Jackson final : public CtmcModel {
 public:
  Jackson(std::vector<double> lambda, std::vector<double> mu, std::vector<std::vector<double>> routing);

  int dimension() const override { return static_cast<int>(lambda_.size()); }
  Row rate_row(const State& x) const override;
  double reward(const State& x) const override;
  std::string name() const override { return "jackson"; }
  nlohmann::json params() const override;

  // Solution of nu = lambda + B^T nu.
  std::vector<double> traffic() const;

 private:
  std::vector<double> lambda_;
  std::vector<double> mu_;
  std::vector<std::vector<double>> routing_;
  std::vector<double> exit_prob_;
};

// Finite chain on {0..n-1} given explicitly by its rows; used for tests and
// oracle cross-checks with the truncation set equal to the full space.
class ExplicitDtmc final : public DtmcModel {
 public:
  ExplicitDtmc(std::vector<Row> rows, std::vector<double> rewards, std::string name = "explicit");

  int dimension() const override { return 1; }
  Row row(const State& x) const override;
  double reward(const State& x) const override;
  std::string name() const override { return name_; }
  nlohmann::json params() const override;
  bool in_space(const State& x) const override;

  std::size_t size() const { return rows_.size(); }

  // Irreducible chain with n states: a directed cycle plus `extra` random
  // edges per row, all weights drawn from the seeded generator.
  static ExplicitDtmc random(std::size_t n, std::size_t extra, std::uint64_t seed);

 private:
  std::vector<Row> rows_;
  std::vector<double> rewards_;
  std::string name_;
};

// Builds a model from {"model": name, "params": {...}}; unknown fields are
// rejected. Exactly one of the returned pointers is non-null.
struct ModelHandle {
  std::shared_ptr<const DtmcModel> dtmc;
  std::shared_ptr<const CtmcModel> ctmc;
  std::shared_ptr<const EmbeddedChain> embedded;

  bool continuous_time() const { return ctmc != nullptr; }
  // The chain the bound engine runs on (the DTMC itself or the jump chain).
  const DtmcModel& chain() const;
  std::shared_ptr<const DtmcModel> chain_ptr() const;
};

ModelHandle build_model(const nlohmann::json& config);

}  // namespace poisbound
