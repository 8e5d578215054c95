#include "poisbound/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Core>

#include "poisbound/errors.hpp"
#include "poisbound/json_util.hpp"
#include "poisbound/oracle.hpp"

namespace poisbound {

namespace ju = json_util;
using nlohmann::json;

namespace {

State state_from_json(const json& j, int dim, const std::string& where) {
  std::vector<int> xs;
  if (j.is_number_integer()) {
    xs.push_back(j.get<int>());
  } else {
    try {
      xs = j.get<std::vector<int>>();
    } catch (const json::exception&) {
      throw ConfigError(where + ": state must be an integer or a list of integers");
    }
  }
  if (static_cast<int>(xs.size()) != dim)
    throw ConfigError(where + ": state has " + std::to_string(xs.size()) + " coordinates, model has " +
                      std::to_string(dim));
  for (int v : xs)
    if (v < 0) throw ConfigError(where + ": negative coordinate");
  return State::of(xs);
}

std::vector<int> box_corner(const StateSet& s) { return s.upper_corner(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json report_json(const DriftReport& r) {
  json j{{"passed", r.passed},
         {"max_violation", r.max_violation},
         {"states_checked", r.states_checked},
         {"violations", r.violations},
         {"unverified_region", r.unverified_region}};
  if (r.worst_state) j["worst_state"] = to_string(*r.worst_state);
  return j;
}

StateSet default_D(const StateSet& A, const State& z) { return A.without(z); }

std::vector<int> sweep_box(const SweepSpec& s, double t, int dim) {
  const int side = static_cast<int>(std::ceil(s.scale * t));
  return std::vector<int>(static_cast<std::size_t>(dim), side);
}

json versions_json() {
  return {{"poisbound", POISBOUND_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

struct Computed {
  BoundTable table;
  ChainCertificates certs;
  CertificateCheck check;
};

Computed compute(const RunConfig& config, const StateSet& A, const RunOptions& options) {
  if (A.empty()) throw ConfigError("partition.A is empty or missing");
  Computed out;
  out.certs = build_certificates(config);
  const StateSet& check_set = config.certificate.check ? *config.certificate.check : A;
  out.check = verify_certificates(config, out.certs, check_set);
  if (!out.check.passed()) {
    const DriftReport& bad = out.check.reward.passed ? out.check.unit : out.check.reward;
    throw CertificateFailure(std::string(out.check.reward.passed ? "unit" : "reward") +
                             " drift inequality fails at " + (bad.worst_state ? to_string(*bad.worst_state) : "?") +
                             " by " + format_double(bad.max_violation));
  }
  std::optional<Partition> part;
  try {
    part.emplace(config.z, config.certificate.K, A);
  } catch (const InvalidParam& e) {
    throw ConfigError(std::string("partition: ") + e.what());
  }
  PoissonOptions popt;
  popt.lower_mode = options.rigorous ? SolveMode::kMonotone : SolveMode::kDirect;
  out.table = g_bounds(config.model.chain(), out.certs.reward, out.certs.unit, *part, popt);
  if (config.use_exact) {
    if (auto exact = closed_form_solution(config.model))
      for (auto& row : out.table.rows) row.exact = (*exact)(row.x);
  }
  return out;
}

json table_summary(const BoundTable& t) {
  return {{"alpha_lower", t.alpha.lower},
          {"alpha_upper", t.alpha.upper},
          {"gate_reward", t.gate_reward},
          {"gate_unit", t.gate_unit},
          {"max_inner_residual", t.max_inner_residual},
          {"max_outer_residual", t.max_outer_residual},
          {"partition_defect", t.partition_defect},
          {"clamped", t.clamped},
          {"iterations", t.iterations}};
}

std::string plot_script(const RunResult& r) {
  const bool with_exact = !r.table.rows.empty() && r.table.rows.front().exact.has_value();
  const bool one_d = r.table.z.dim == 1;
  std::ostringstream s;
  s << "set datafile separator ','\n"
    << "set key left top\n"
    << "set terminal pngcairo size 900,600\n"
    << "set output 'bounds.png'\n";
  // 2-D states are plotted against their row index in bounds.csv.
  const std::string x = one_d ? "1" : "0";
  s << (one_d ? "set xlabel 'x'\n" : "set xlabel 'row of bounds.csv'\n");
  s << "plot 'bounds.csv' using " << x << ":2 with lines title 'lower', \\\n"
    << "     '' using " << x << ":3 with lines title 'upper', \\\n"
    << "     '' using " << x << ":4 with lines dt 2 title 'approx'";
  if (with_exact) s << ", \\\n     '' using " << x << ":5 with lines dt 3 title 'exact'";
  s << "\n\nset output 'gaps.png'\nset logscale y\nset ylabel 'gap'\n";
  const int appr_col = with_exact ? 7 : 5;
  s << "plot ";
  if (with_exact) s << "'bounds.csv' using " << x << ":6 with lines title 'rel gap', \\\n     ";
  s << "'bounds.csv' using " << x << ":" << appr_col << " with lines title 'appr rel gap', \\\n"
    << "     '' using " << x << ":" << appr_col + 1 << " with lines title 'abs gap'\n";
  return s.str();
}

// Lower kappa values on D, reward then unit.
std::vector<double> kappa_lower_on(const BoundTable& t, const StateSet& D) {
  std::vector<double> out;
  out.reserve(2 * D.size());
  for (const State& x : D) {
    const BoundRow* row = t.find(x);
    if (!row) throw InvalidParam("state " + to_string(x) + " of D is not in A");
    out.push_back(row->kappa_reward_lower);
    out.push_back(row->kappa_unit_lower);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

GapRow gap_row(const BoundRow& row) {
  GapRow g;
  g.x = row.x;
  g.abs = std::abs(row.upper - row.lower);
  if (row.exact && *row.exact != 0.0) g.rel = g.abs / std::abs(*row.exact);
  if (row.upper != 0.0) g.appr_rel = g.abs / std::abs(row.upper);
  return g;
}

GapReport gap_metrics(const BoundTable& table, const StateSet& D, bool need_rel) {
  GapReport rep;
  rep.rows.reserve(table.rows.size());
  for (const auto& r : table.rows) rep.rows.push_back(gap_row(r));
  for (const State& x : D) {
    if (x == table.z) throw InvalidParam("D must not contain z");
    const BoundRow* row = table.find(x);
    if (!row) throw InvalidParam("state " + to_string(x) + " of D is not in A");
    if (need_rel && !row->exact) throw MissingExact("no exact value at " + to_string(x));
    const GapRow g = gap_row(*row);
    rep.sup_abs = std::max(rep.sup_abs, g.abs);
    if (g.rel) rep.sup_rel = std::max(rep.sup_rel.value_or(0.0), *g.rel);
    if (g.appr_rel) rep.sup_appr_rel = std::max(rep.sup_appr_rel.value_or(0.0), *g.appr_rel);
  }
  return rep;
}

// ---------------------------------------------------------------------------

StateSet parse_state_set(const json& j, int dim, const std::string& where) {
  ju::require_object(j, where);
  if (j.size() != 1) throw ConfigError(where + " must have exactly one of rect, interval, list, halfspace");
  const auto& [kind, body] = *j.items().begin();
  if (kind == "rect") {
    std::vector<int> upper;
    try {
      upper = body.get<std::vector<int>>();
    } catch (const json::exception&) {
      throw ConfigError(where + ".rect must be a list of integers");
    }
    if (static_cast<int>(upper.size()) != dim) throw ConfigError(where + ".rect has the wrong dimension");
    for (int u : upper)
      if (u < 0) throw ConfigError(where + ".rect has a negative side");
    return StateSet::box(upper);
  }
  if (kind == "interval") {
    if (dim != 1) throw ConfigError(where + ".interval needs a one-dimensional model");
    std::vector<int> lohi;
    try {
      lohi = body.get<std::vector<int>>();
    } catch (const json::exception&) {
      throw ConfigError(where + ".interval must be [lo, hi]");
    }
    if (lohi.size() != 2 || lohi[0] < 0 || lohi[1] < lohi[0]) throw ConfigError(where + ".interval must be [lo, hi]");
    return StateSet::filter({lohi[1]}, [lo = lohi[0]](const State& x) { return x[0] >= lo; });
  }
  if (kind == "list") {
    if (!body.is_array()) throw ConfigError(where + ".list must be an array");
    std::vector<State> states;
    for (const auto& item : body) states.push_back(state_from_json(item, dim, where + ".list"));
    if (states.empty()) throw ConfigError(where + ".list is empty");
    return StateSet(std::move(states));
  }
  if (kind == "halfspace") {
    ju::require_object(body, where + ".halfspace");
    ju::allow_keys(body, {"coeffs", "rhs"}, where + ".halfspace");
    auto coeffs = ju::get<std::vector<double>>(body, "coeffs", where + ".halfspace");
    const double rhs = ju::get<double>(body, "rhs", where + ".halfspace");
    if (static_cast<int>(coeffs.size()) != dim) throw ConfigError(where + ".halfspace.coeffs has the wrong dimension");
    if (rhs < 0.0) throw ConfigError(where + ".halfspace.rhs must be nonnegative");
    std::vector<int> upper;
    for (double a : coeffs) {
      if (!(a > 0.0)) throw ConfigError(where + ".halfspace.coeffs must be positive");
      upper.push_back(static_cast<int>(std::floor(rhs / a)));
    }
    return halfspace_set(coeffs, rhs, upper);
  }
  throw ConfigError("unknown set kind '" + kind + "' in " + where);
}

RunConfig parse_config(const json& config) {
  ju::require_object(config, "config");
  ju::allow_keys(config, {"model", "params", "certificates", "partition", "sweep", "metrics", "oracle"}, "config");
  RunConfig rc;
  rc.raw = config;
  json model_part{{"model", ju::get<std::string>(config, "model", "config")}};
  if (config.contains("params")) model_part["params"] = config.at("params");
  rc.model = build_model(model_part);
  const int dim = rc.model.chain().dimension();

  const json& certs = config.contains("certificates") ? config.at("certificates") : json();
  if (certs.is_null()) throw ConfigError("missing section 'certificates'");
  ju::require_object(certs, "certificates");
  ju::allow_keys(certs, {"v", "K", "c", "c_unit", "check"}, "certificates");
  const json& v = certs.contains("v") ? certs.at("v") : json();
  ju::require_object(v, "certificates.v");
  ju::allow_keys(v, {"quadratic"}, "certificates.v");
  rc.certificate.v_coeffs = ju::get<std::vector<double>>(v, "quadratic", "certificates.v");
  if (static_cast<int>(rc.certificate.v_coeffs.size()) != dim)
    throw ConfigError("certificates.v.quadratic has the wrong dimension");
  for (double a : rc.certificate.v_coeffs)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("certificates.v.quadratic must be nonnegative");
  if (!certs.contains("K")) throw ConfigError("missing field 'K' in certificates");
  rc.certificate.K = parse_state_set(certs.at("K"), dim, "certificates.K");
  if (certs.contains("c")) rc.certificate.c_reward = ju::get<double>(certs, "c", "certificates");
  if (certs.contains("c_unit")) rc.certificate.c_unit = ju::get<double>(certs, "c_unit", "certificates");
  for (auto c : {rc.certificate.c_reward, rc.certificate.c_unit})
    if (c && !(*c >= 0.0 && std::isfinite(*c))) throw ConfigError("certificate constants must be finite and >= 0");
  if (certs.contains("check")) rc.certificate.check = parse_state_set(certs.at("check"), dim, "certificates.check");

  if (!config.contains("partition")) throw ConfigError("missing section 'partition'");
  const json& part = config.at("partition");
  ju::require_object(part, "partition");
  ju::allow_keys(part, {"z", "A"}, "partition");
  if (!part.contains("z")) throw ConfigError("missing field 'z' in partition");
  rc.z = state_from_json(part.at("z"), dim, "partition.z");
  if (part.contains("A")) rc.A = parse_state_set(part.at("A"), dim, "partition.A");

  if (config.contains("sweep")) {
    const json& sw = config.at("sweep");
    ju::require_object(sw, "sweep");
    ju::allow_keys(sw, {"schedule", "scale"}, "sweep");
    SweepSpec spec;
    if (sw.contains("schedule")) spec.schedule = ju::get<std::vector<double>>(sw, "schedule", "sweep");
    spec.scale = ju::get<double>(sw, "scale", "sweep");
    if (!(spec.scale > 0.0)) throw ConfigError("sweep.scale must be positive");
    if (spec.schedule.empty()) throw ConfigError("sweep.schedule is empty");
    for (std::size_t i = 0; i < spec.schedule.size(); ++i) {
      if (!(spec.schedule[i] > 0.0)) throw ConfigError("sweep.schedule entries must be positive");
      if (i > 0 && !(spec.schedule[i] > spec.schedule[i - 1]))
        throw ConfigError("sweep.schedule must be strictly increasing");
    }
    rc.sweep = spec;
  }

  if (config.contains("metrics")) {
    const json& m = config.at("metrics");
    ju::require_object(m, "metrics");
    ju::allow_keys(m, {"D", "exact"}, "metrics");
    if (m.contains("D")) rc.D = parse_state_set(m.at("D"), dim, "metrics.D");
    rc.use_exact = ju::get_or<bool>(m, "exact", true, "metrics");
    if (rc.D && rc.D->contains(rc.z)) throw ConfigError("metrics.D must not contain z");
  }

  if (config.contains("oracle")) {
    const json& o = config.at("oracle");
    ju::require_object(o, "oracle");
    ju::allow_keys(o, {"box", "paths", "seed", "mc_states"}, "oracle");
    if (o.contains("box")) {
      auto box = ju::get<std::vector<int>>(o, "box", "oracle");
      if (static_cast<int>(box.size()) != dim) throw ConfigError("oracle.box has the wrong dimension");
      rc.oracle.box = box;
    }
    rc.oracle.paths = ju::get_or<long>(o, "paths", 0L, "oracle");
    if (rc.oracle.paths < 0 || rc.oracle.paths == 1) throw ConfigError("oracle.paths must be 0 or at least 2");
    rc.oracle.seed = ju::get_or<std::uint64_t>(o, "seed", 42, "oracle");
    if (o.contains("mc_states")) rc.oracle.mc_states = parse_state_set(o.at("mc_states"), dim, "oracle.mc_states");
  }

  if (rc.A.empty() && !rc.sweep) throw ConfigError("partition.A is required unless a sweep is configured");
  return rc;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------

ChainCertificates build_certificates(const RunConfig& config) {
  const CertificateSpec& spec = config.certificate;
  ChainCertificates out;
  LyapunovCertificate reward;
  reward.v = quadratic_form(spec.v_coeffs);
  reward.K = spec.K;
  reward.c = spec.c_reward.value_or(0.0);
  LyapunovCertificate unit = reward;
  unit.c = spec.c_unit.value_or(0.0);
  unit.q = [](const State&) { return 1.0; };

  if (config.model.continuous_time()) {
    auto ctmc = config.model.ctmc;
    reward.q = [ctmc](const State& x) { return ctmc->reward(x); };
    out.reward = embed_certificate(config.model.embedded, reward);
    out.unit = embed_certificate(config.model.embedded, unit);
  } else {
    auto dtmc = config.model.dtmc;
    reward.q = [dtmc](const State& x) { return dtmc->reward(x); };
    out.reward = reward;
    out.unit = unit;
  }
  const DtmcModel& chain = config.model.chain();
  if (!spec.c_reward) {
    out.reward.c = minimal_c(chain, out.reward.v, out.reward.q, out.reward.K);
    out.c_reward_computed = true;
  }
  if (!spec.c_unit) {
    out.unit.c = minimal_c(chain, out.unit.v, out.unit.q, out.unit.K);
    out.c_unit_computed = true;
  }
  return out;
}

std::optional<StateFn> closed_form_solution(const ModelHandle& model) {
  if (model.dtmc) {
    // Verified at q = 0.6 only; other q have no known closed form here.
    if (auto sq = std::dynamic_pointer_cast<const SlottedQueue>(model.dtmc); sq && sq->q() == 0.6)
      return StateFn([](const State& x) { return double(x[0]) * x[0] + 4.0 * x[0]; });
    return std::nullopt;
  }
  if (auto mm = std::dynamic_pointer_cast<const TwoMm1>(model.ctmc)) {
    const double d1 = 2.0 * (mm->mu(0) - mm->lambda(0));
    const double d2 = 2.0 * (mm->mu(1) - mm->lambda(1));
    return StateFn([d1, d2](const State& x) {
      const double a = x[0], b = x[1];
      return (a * a + a) / d1 + (b * b + b) / d2;
    });
  }
  return std::nullopt;
}

std::optional<double> closed_form_average(const ModelHandle& model) {
  if (model.dtmc) {
    if (auto sq = std::dynamic_pointer_cast<const SlottedQueue>(model.dtmc); sq && sq->q() == 0.6) return 8.0 / 3.0;
    return std::nullopt;
  }
  if (auto mm = std::dynamic_pointer_cast<const TwoMm1>(model.ctmc)) {
    double d = 0.0;
    for (int i = 0; i < 2; ++i) d += mm->lambda(i) / (mm->mu(i) - mm->lambda(i));
    return d;
  }
  return std::nullopt;
}

CertificateCheck verify_certificates(const RunConfig& config, const ChainCertificates& certs,
                                     const StateSet& check_set) {
  CertificateCheck out;
  const DtmcModel& chain = config.model.chain();
  out.reward = verify_drift(chain, certs.reward, check_set.states());
  out.unit = verify_drift(chain, certs.unit, check_set.states());
  return out;
}

// ---------------------------------------------------------------------------

RunResult run_on(const RunConfig& config, const StateSet& A, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  Computed c = compute(config, A, options);
  RunResult r;
  r.table = std::move(c.table);
  const bool has_exact = !r.table.rows.empty() && r.table.rows.front().exact.has_value();
  const StateSet D = config.D ? *config.D : default_D(A, config.z);
  r.gaps = gap_metrics(r.table, D, has_exact);

  json& m = r.manifest;
  m["config"] = config.raw;
  m["versions"] = versions_json();
  m["mode"] = options.rigorous ? "rigorous" : "direct";
  m["n_states"] = A.size();
  m["bounds"] = table_summary(r.table);
  m["certificates"] = {{"reward", report_json(c.check.reward)},
                       {"unit", report_json(c.check.unit)},
                       {"c_reward", c.certs.reward.c},
                       {"c_unit", c.certs.unit.c},
                       {"c_reward_computed", c.certs.c_reward_computed},
                       {"c_unit_computed", c.certs.c_unit_computed}};
  json gaps{{"sup_abs_gap", r.gaps.sup_abs}, {"D_size", D.size()}};
  if (r.gaps.sup_rel) gaps["sup_rel_gap"] = *r.gaps.sup_rel;
  if (r.gaps.sup_appr_rel) gaps["sup_appr_rel_gap"] = *r.gaps.sup_appr_rel;
  m["gaps"] = gaps;
  if (auto a = closed_form_average(config.model); a && config.use_exact) m["exact_average"] = *a;
  if (options.timestamp) m["wall_seconds"] = seconds_since(t0);
  return r;
}

RunResult run_single(const RunConfig& config, const RunOptions& options) { return run_on(config, config.A, options); }

SweepResult run_sweep(const RunConfig& config, const RunOptions& options) {
  if (!config.sweep) throw ConfigError("config has no sweep section");
  const SweepSpec& spec = *config.sweep;
  const int dim = config.model.chain().dimension();
  const StateSet A1 = StateSet::box(sweep_box(spec, spec.schedule.front(), dim));
  const StateSet D = config.D ? *config.D : default_D(A1, config.z);
  const bool want_exact = config.use_exact && closed_form_solution(config.model).has_value();

  SweepResult out;
  std::optional<std::vector<double>> previous;
  const double slack = options.rigorous ? 0.0 : 1e-12;
  bool all_monotone = true;
  for (double t : spec.schedule) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepStep step;
    step.t = t;
    const StateSet A = StateSet::box(sweep_box(spec, t, dim));
    step.n_states = A.size();
    try {
      Computed c = compute(config, A, options);
      const GapReport g = gap_metrics(c.table, D, want_exact);
      step.gate = std::max(c.table.gate_reward, c.table.gate_unit);
      step.sup_rel = g.sup_rel;
      step.sup_appr_rel = g.sup_appr_rel;
      step.sup_abs = g.sup_abs;
      auto kappa = kappa_lower_on(c.table, D);
      if (previous) {
        for (std::size_t i = 0; i < kappa.size(); ++i)
          if (kappa[i] < (*previous)[i] - slack * std::abs((*previous)[i])) step.lower_monotone = false;
      }
      all_monotone = all_monotone && step.lower_monotone;
      previous = std::move(kappa);
    } catch (const TruncationTooSmall&) {
      step.status = "truncation_too_small";
      try {
        Partition part(config.z, config.certificate.K, A);
        HittingEngine engine(assemble(config.model.chain(), quadratic_form(config.certificate.v_coeffs), part));
        step.gate = engine.gate();
      } catch (const BoundError&) {
      }
    } catch (const BoundError& e) {
      step.status = to_string(e.code());
    }
    step.wall_seconds = seconds_since(t0);
    out.steps.push_back(step);
  }

  json& m = out.manifest;
  m["config"] = config.raw;
  m["versions"] = versions_json();
  m["mode"] = options.rigorous ? "rigorous" : "direct";
  m["D_size"] = D.size();
  m["lower_monotone"] = all_monotone;
  json steps = json::array();
  for (const auto& s : out.steps) steps.push_back({{"t", s.t}, {"n_states", s.n_states}, {"gate", s.gate}, {"status", s.status}});
  m["steps"] = steps;
  return out;
}

void write_run(const RunResult& result, const std::filesystem::path& dir, const RunOptions& options) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "bounds.csv", write_bounds_csv(result.table, {options.timestamp}));
  write_file_atomic(dir / "manifest.json", result.manifest.dump(2) + "\n");
  write_file_atomic(dir / "plot.gp", plot_script(result));
}

void write_sweep(const SweepResult& result, const std::filesystem::path& dir, const RunOptions& options) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "sweep.csv", write_sweep_csv(result, {options.timestamp}));
  write_file_atomic(dir / "manifest.json", result.manifest.dump(2) + "\n");
  std::string gp =
      "set datafile separator ','\n"
      "set terminal pngcairo size 900,600\n"
      "set output 'sweep.png'\n"
      "set logscale y\n"
      "set xlabel 't'\n"
      "plot 'sweep.csv' using 1:5 with linespoints title 'sup rel gap', \\\n"
      "     '' using 1:6 with linespoints title 'sup appr rel gap', \\\n"
      "     '' using 1:7 with linespoints title 'sup abs gap'\n";
  write_file_atomic(dir / "plot.gp", gp);
}

OracleRun run_oracle(const RunConfig& config, const RunOptions& options) {
  const DtmcModel& chain_model = config.model.chain();
  const int dim = chain_model.dimension();
  StateSet A = config.A;
  if (A.empty()) {
    if (!config.sweep) throw ConfigError("oracle needs partition.A or a sweep");
    A = StateSet::box(sweep_box(*config.sweep, config.sweep->schedule.back(), dim));
  }
  std::vector<int> box;
  if (config.oracle.box) {
    box = *config.oracle.box;
  } else {
    for (int u : box_corner(A)) box.push_back(std::max(4 * u, 8));
  }
  for (int i = 0; i < dim; ++i)
    if (box[static_cast<std::size_t>(i)] < A.upper_corner()[static_cast<std::size_t>(i)])
      throw ConfigError("oracle.box must contain A");

  const auto t0 = std::chrono::steady_clock::now();
  oracle::FiniteChain fc = oracle::enumerate_box(chain_model, box, config.z);
  const auto n = static_cast<Eigen::Index>(fc.size());
  Vector unit(n);
  if (config.model.continuous_time()) {
    for (Eigen::Index i = 0; i < n; ++i) unit[i] = config.model.embedded->scaled_unit(fc.states[static_cast<std::size_t>(i)]);
  } else {
    unit.setOnes();
  }
  const oracle::PoissonSolution sol = oracle::exact_poisson(fc, fc.reward, &unit);
  const Vector f_reward = oracle::exact_hitting_reward(fc, fc.reward);
  const Vector f_unit = oracle::exact_hitting_reward(fc, unit);
  const auto exact = config.use_exact ? closed_form_solution(config.model) : std::nullopt;

  std::vector<std::pair<State, oracle::McEstimate>> mc;
  if (config.oracle.paths > 0 && config.oracle.mc_states) {
    for (const State& x : *config.oracle.mc_states)
      mc.emplace_back(x, oracle::mc_hitting_estimate(fc, fc.reward, x, config.oracle.paths, config.oracle.seed));
  }

  std::ostringstream csv;
  if (options.timestamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    csv << "# generated " << buf << '\n';
  }
  csv << "state,solution,hitting_reward,hitting_unit";
  if (exact) csv << ",closed_form";
  if (!mc.empty()) csv << ",mc_mean,mc_half_width";
  csv << '\n';
  for (const State& x : A) {
    const auto i = static_cast<Eigen::Index>(fc.index(x));
    csv << to_string(x) << ',' << format_double(sol.g[i]) << ',' << format_double(f_reward[i]) << ','
        << format_double(f_unit[i]);
    if (exact) csv << ',' << format_double((*exact)(x));
    if (!mc.empty()) {
      auto it = std::find_if(mc.begin(), mc.end(), [&](const auto& p) { return p.first == x; });
      if (it != mc.end()) csv << ',' << format_double(it->second.mean) << ',' << format_double(it->second.half_width);
      else csv << ",,";
    }
    csv << '\n';
  }

  OracleRun out;
  out.csv = csv.str();
  json& m = out.manifest;
  m["config"] = config.raw;
  m["versions"] = versions_json();
  m["box"] = box;
  m["n_states"] = fc.size();
  m["average"] = sol.alpha;
  m["residual"] = sol.residual;
  if (auto a = closed_form_average(config.model); a && config.use_exact) m["exact_average"] = *a;
  if (!mc.empty()) {
    m["monte_carlo"] = {{"paths", config.oracle.paths}, {"seed", config.oracle.seed}};
  }
  if (options.timestamp) m["wall_seconds"] = seconds_since(t0);
  return out;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidParam:
    case ErrorCode::kMissingExact:
      return 2;
    case ErrorCode::kCertificateFailure:
      return 3;
    case ErrorCode::kTruncationTooSmall:
      return 4;
    case ErrorCode::kSingularInner:
    case ErrorCode::kNoConvergence:
    case ErrorCode::kDegenerateDenominator:
    case ErrorCode::kReducible:
    case ErrorCode::kZeroExitRate:
      return 5;
  }
  return 1;
}

}  // namespace poisbound
