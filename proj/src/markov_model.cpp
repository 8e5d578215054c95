#include "poisbound/markov_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "poisbound/errors.hpp"
#include "poisbound/json_util.hpp"

namespace poisbound {

namespace {

bool nonnegative(const State& x) {
  for (int i = 0; i < x.dim; ++i)
    if (x[i] < 0) return false;
  return true;
}

void check_in_space(bool ok, const State& x, const std::string& model) {
  if (!ok) throw InvalidParam("state " + to_string(x) + " is not in the state space of " + model);
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

bool DtmcModel::in_space(const State& x) const { return x.dim == dimension() && nonnegative(x); }

bool CtmcModel::in_space(const State& x) const { return x.dim == dimension() && nonnegative(x); }

double CtmcModel::exit_rate(const State& x) const {
  double total = 0.0;
  for (const auto& t : rate_row(x)) total += t.weight;
  return total;
}

EmbeddedChain::EmbeddedChain(std::shared_ptr<const CtmcModel> ctmc) : ctmc_(std::move(ctmc)) {
  if (!ctmc_) throw InvalidParam("null CTMC");
}

double EmbeddedChain::holding_rate(const State& x) const {
  const double lambda = ctmc_->exit_rate(x);
  if (!(lambda > 0.0)) throw ZeroExitRate("state " + to_string(x) + " has zero exit rate");
  return lambda;
}

Row EmbeddedChain::row(const State& x) const {
  Row rates = ctmc_->rate_row(x);
  double lambda = 0.0;
  for (const auto& t : rates) lambda += t.weight;
  if (!(lambda > 0.0)) throw ZeroExitRate("state " + to_string(x) + " has zero exit rate");
  for (auto& t : rates) t.weight /= lambda;
  return rates;
}

std::shared_ptr<const EmbeddedChain> embed_ctmc(std::shared_ptr<const CtmcModel> ctmc) {
  return std::make_shared<const EmbeddedChain>(std::move(ctmc));
}

// ---------------------------------------------------------------------------
// Slotted queue

SlottedQueue::SlottedQueue(double q) : q_(q) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidParam("slotted queue needs q in (0,1)");
}

double SlottedQueue::left_tail_pmf(int k) const {
  if (k < 1) throw InvalidParam("left tail defined for k >= 1");
  return (1.0 - q_) * std::pow(q_, k - 1) * (q_ + q_ * q_ + q_ * q_ * q_) / 3.0;
}

Row SlottedQueue::row(const State& x) const {
  check_in_space(in_space(x), x, name());
  const int n = x[0];
  // y = [n + b - d]^+ with b in {1,2,3}, d >= 1, so y <= n + 2.
  std::vector<double> mass(static_cast<std::size_t>(n) + 3, 0.0);
  for (int b = 1; b <= 3; ++b) {
    const int top = n + b;
    double pd = (1.0 - q_);  // P(D = d) for d = 1
    for (int d = 1; d < top; ++d) {
      mass[static_cast<std::size_t>(top - d)] += pd / 3.0;
      pd *= q_;
    }
    // d >= top sends the queue to zero: P(D >= top) = q^{top-1}.
    mass[0] += std::pow(q_, top - 1) / 3.0;
  }
  Row out;
  for (std::size_t y = 0; y < mass.size(); ++y)
    if (mass[y] > 0.0) out.push_back({State{static_cast<int>(y)}, mass[y]});
  return out;
}

// ---------------------------------------------------------------------------
// Two M/M/1 queues

TwoMm1::TwoMm1(double lambda1, double mu1, double lambda2, double mu2)
    : lambda_{lambda1, lambda2}, mu_{mu1, mu2} {
  for (double r : {lambda1, mu1, lambda2, mu2})
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidParam("two_mm1 rates must be positive and finite");
}

nlohmann::json TwoMm1::params() const {
  return {{"lambda1", lambda_[0]}, {"mu1", mu_[0]}, {"lambda2", lambda_[1]}, {"mu2", mu_[1]}};
}

Row TwoMm1::rate_row(const State& x) const {
  check_in_space(in_space(x), x, name());
  Row out;
  for (int i = 0; i < 2; ++i) {
    State up = x;
    up[i] += 1;
    out.push_back({up, lambda_[static_cast<std::size_t>(i)]});
  }
  for (int i = 0; i < 2; ++i) {
    if (x[i] == 0) continue;
    State down = x;
    down[i] -= 1;
    out.push_back({down, mu_[static_cast<std::size_t>(i)]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Jackson network

Jackson::Jackson(std::vector<double> lambda, std::vector<double> mu, std::vector<std::vector<double>> routing)
    : lambda_(std::move(lambda)), mu_(std::move(mu)), routing_(std::move(routing)) {
  const std::size_t n = lambda_.size();
  if (n == 0 || n > static_cast<std::size_t>(kMaxDim)) throw InvalidParam("jackson: 1..4 stations supported");
  if (mu_.size() != n || routing_.size() != n) throw InvalidParam("jackson: inconsistent dimensions");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lambda_[i] >= 0.0) || !(mu_[i] > 0.0)) throw InvalidParam("jackson: rates must be positive");
    if (routing_[i].size() != n) throw InvalidParam("jackson: routing matrix must be square");
    double sum = 0.0;
    for (double b : routing_[i]) {
      if (!(b >= 0.0)) throw InvalidParam("jackson: negative routing probability");
      sum += b;
    }
    if (sum > 1.0 + 1e-12) throw InvalidParam("jackson: routing row exceeds 1");
    exit_prob_.push_back(std::max(0.0, 1.0 - sum));
  }
  if (std::all_of(lambda_.begin(), lambda_.end(), [](double l) { return l == 0.0; }))
    throw InvalidParam("jackson: at least one exogenous arrival rate must be positive");
  // nu = lambda + B^T nu must have a nonnegative solution (spectral radius < 1).
  for (double v : traffic())
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidParam("jackson: routing spectral radius must be < 1");
}

nlohmann::json Jackson::params() const {
  return {{"lambda", lambda_}, {"mu", mu_}, {"routing", routing_}};
}

double Jackson::reward(const State& x) const {
  double s = 0.0;
  for (int i = 0; i < x.dim; ++i) s += x[i];
  return s;
}

std::vector<double> Jackson::traffic() const {
  // Solve (I - B^T) nu = lambda by Gaussian elimination with partial pivoting.
  const std::size_t n = lambda_.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - routing_[j][i];
    a[i][n] = lambda_[i];
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-14) throw InvalidParam("jackson: singular traffic equations");
    std::swap(a[col], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> nu(n);
  for (std::size_t i = 0; i < n; ++i) nu[i] = a[i][n] / a[i][i];
  return nu;
}

Row Jackson::rate_row(const State& x) const {
  check_in_space(in_space(x), x, name());
  const int n = dimension();
  Row out;
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (lambda_[ui] > 0.0) {
      State up = x;
      up[i] += 1;
      out.push_back({up, lambda_[ui]});
    }
  }
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (x[i] == 0) continue;
    for (int j = 0; j < n; ++j) {
      const double p = routing_[ui][static_cast<std::size_t>(j)];
      if (j == i || p <= 0.0) continue;  // feedback to the same station leaves x unchanged
      State y = x;
      y[i] -= 1;
      y[j] += 1;
      out.push_back({y, mu_[ui] * p});
    }
    if (exit_prob_[ui] > 0.0) {
      State y = x;
      y[i] -= 1;
      out.push_back({y, mu_[ui] * exit_prob_[ui]});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Explicit finite chain

ExplicitDtmc::ExplicitDtmc(std::vector<Row> rows, std::vector<double> rewards, std::string name)
    : rows_(std::move(rows)), rewards_(std::move(rewards)), name_(std::move(name)) {
  if (rows_.empty() || rows_.size() != rewards_.size()) throw InvalidParam("explicit chain: size mismatch");
  const int n = static_cast<int>(rows_.size());
  for (auto& row : rows_) {
    std::set<int> seen;
    double sum = 0.0;
    for (const auto& t : row) {
      if (t.to.dim != 1 || t.to[0] < 0 || t.to[0] >= n) throw InvalidParam("explicit chain: target out of range");
      if (!(t.weight > 0.0)) throw InvalidParam("explicit chain: nonpositive probability");
      if (!seen.insert(t.to[0]).second) throw InvalidParam("explicit chain: duplicate target");
      sum += t.weight;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidParam("explicit chain: row does not sum to 1");
  }
  for (double r : rewards_)
    if (!std::isfinite(r)) throw InvalidParam("explicit chain: nonfinite reward");
}

nlohmann::json ExplicitDtmc::params() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : rows_) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& t : row) r.push_back({t.to[0], t.weight});
    rows.push_back(r);
  }
  return {{"rows", rows}, {"rewards", rewards_}};
}

bool ExplicitDtmc::in_space(const State& x) const {
  return x.dim == 1 && x[0] >= 0 && static_cast<std::size_t>(x[0]) < rows_.size();
}

Row ExplicitDtmc::row(const State& x) const {
  check_in_space(in_space(x), x, name_);
  return rows_[static_cast<std::size_t>(x[0])];
}

double ExplicitDtmc::reward(const State& x) const {
  check_in_space(in_space(x), x, name_);
  return rewards_[static_cast<std::size_t>(x[0])];
}

ExplicitDtmc ExplicitDtmc::random(std::size_t n, std::size_t extra, std::uint64_t seed) {
  if (n < 2) throw InvalidParam("random chain needs at least 2 states");
  std::mt19937_64 rng(seed);
  std::vector<Row> rows(n);
  std::vector<double> rewards(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::size_t> targets{(i + 1) % n};
    for (std::size_t k = 0; k < extra; ++k) targets.insert(static_cast<std::size_t>(rng() % n));
    double total = 0.0;
    std::vector<double> w;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      w.push_back(0.1 + unit_uniform(rng));
      total += w.back();
    }
    std::size_t k = 0;
    double acc = 0.0;
    for (std::size_t t : targets) {
      double p = w[k] / total;
      if (++k == targets.size()) p = 1.0 - acc;  // absorb rounding in the last entry
      acc += p;
      rows[i].push_back({State{static_cast<int>(t)}, p});
    }
    rewards[i] = 10.0 * unit_uniform(rng);
  }
  return ExplicitDtmc(std::move(rows), std::move(rewards), "random");
}

// ---------------------------------------------------------------------------
// Config

const DtmcModel& ModelHandle::chain() const { return *chain_ptr(); }

std::shared_ptr<const DtmcModel> ModelHandle::chain_ptr() const {
  if (embedded) return embedded;
  if (!dtmc) throw InvalidParam("empty model handle");
  return dtmc;
}

ModelHandle build_model(const nlohmann::json& config) {
  json_util::require_object(config, "model section");
  json_util::allow_keys(config, {"model", "params"}, "model section");
  const std::string kind = json_util::get<std::string>(config, "model", "model section");
  const nlohmann::json params = config.contains("params") ? config.at("params") : nlohmann::json::object();
  json_util::require_object(params, "model params");
  ModelHandle h;
  try {
    if (kind == "slotted_queue") {
      json_util::allow_keys(params, {"q"}, "slotted_queue params");
      h.dtmc = std::make_shared<SlottedQueue>(json_util::get<double>(params, "q", "slotted_queue params"));
    } else if (kind == "two_mm1") {
      json_util::allow_keys(params, {"lambda1", "mu1", "lambda2", "mu2"}, "two_mm1 params");
      auto p = [&](const char* k) { return json_util::get<double>(params, k, "two_mm1 params"); };
      h.ctmc = std::make_shared<TwoMm1>(p("lambda1"), p("mu1"), p("lambda2"), p("mu2"));
    } else if (kind == "jackson") {
      json_util::allow_keys(params, {"lambda", "mu", "routing"}, "jackson params");
      h.ctmc = std::make_shared<Jackson>(
          json_util::get<std::vector<double>>(params, "lambda", "jackson params"),
          json_util::get<std::vector<double>>(params, "mu", "jackson params"),
          json_util::get<std::vector<std::vector<double>>>(params, "routing", "jackson params"));
    } else if (kind == "explicit") {
      // rows: [[[to, p], ...], ...], one row per state 0..n-1
      json_util::allow_keys(params, {"rows", "rewards"}, "explicit params");
      const auto raw = json_util::get<std::vector<std::vector<std::pair<int, double>>>>(params, "rows", "explicit params");
      std::vector<Row> rows;
      for (const auto& r : raw) {
        Row row;
        for (const auto& [to, p] : r) row.push_back({State{to}, p});
        rows.push_back(std::move(row));
      }
      h.dtmc = std::make_shared<ExplicitDtmc>(std::move(rows),
                                              json_util::get<std::vector<double>>(params, "rewards", "explicit params"));
    } else {
      throw ConfigError("unknown model '" + kind + "'");
    }
  } catch (const InvalidParam& e) {
    throw ConfigError(e.what());
  }
  if (h.ctmc) h.embedded = embed_ctmc(h.ctmc);
  return h;
}

}  // namespace poisbound
