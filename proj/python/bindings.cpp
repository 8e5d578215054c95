#include <memory>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "poisbound/certificate.hpp"
#include "poisbound/errors.hpp"
#include "poisbound/experiments.hpp"
#include "poisbound/hitting_bounds.hpp"
#include "poisbound/markov_model.hpp"
#include "poisbound/oracle.hpp"
#include "poisbound/poisson_bounds.hpp"
#include "poisbound/truncation.hpp"

namespace py = pybind11;
using namespace poisbound;

// States cross the boundary as tuples of ints; a bare int is a 1-d state.
namespace pybind11::detail {
template <>
struct type_caster<State> {
  PYBIND11_TYPE_CASTER(State, const_name("tuple[int, ...]"));

  bool load(handle src, bool) {
    if (PyLong_Check(src.ptr())) {
      value = State{src.cast<int>()};
      return true;
    }
    if (!isinstance<sequence>(src) || isinstance<str>(src)) return false;
    const auto seq = reinterpret_borrow<sequence>(src);
    if (seq.size() == 0 || seq.size() > static_cast<std::size_t>(kMaxDim)) return false;
    std::vector<int> xs;
    for (const auto item : seq) {
      if (!PyLong_Check(item.ptr())) return false;
      xs.push_back(item.cast<int>());
    }
    value = State::of(xs);
    return true;
  }

  static handle cast(const State& x, return_value_policy, handle) {
    tuple t(static_cast<std::size_t>(x.dim));
    for (int i = 0; i < x.dim; ++i) t[static_cast<std::size_t>(i)] = int_(x[i]);
    return t.release();
  }
};
}  // namespace pybind11::detail

namespace {

// Python objects <-> nlohmann::json through the json module; configs are small.
nlohmann::json to_json(const py::object& obj) {
  const std::string text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(text);
}

py::object from_json(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::list row_to_list(const Row& row) {
  py::list out;
  for (const auto& t : row) out.append(py::make_tuple(t.to, t.weight));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-sided truncation bounds for Poisson's equation on countable Markov chains";
  m.attr("__version__") = POISBOUND_VERSION;

  // Errors: one Python class per code, all under BoundError.
  static py::handle base = py::exception<BoundError>(m, "BoundError");
  static py::handle config_error = py::exception<ConfigError>(m, "ConfigError", base.ptr());
  static py::handle cert_error = py::exception<CertificateFailure>(m, "CertificateFailure", base.ptr());
  static py::handle trunc_error = py::exception<TruncationTooSmall>(m, "TruncationTooSmall", base.ptr());
  static py::handle param_error = py::exception<InvalidParam>(m, "InvalidParam", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const CertificateFailure& e) {
      py::set_error(cert_error, e.what());
    } catch (const TruncationTooSmall& e) {
      py::set_error(trunc_error, e.what());
    } catch (const InvalidParam& e) {
      py::set_error(param_error, e.what());
    } catch (const BoundError& e) {
      py::set_error(base, e.what());
    }
  });

  // Models
  py::class_<DtmcModel, std::shared_ptr<DtmcModel>>(m, "DtmcModel")
      .def_property_readonly("name", &DtmcModel::name)
      .def_property_readonly("dimension", &DtmcModel::dimension)
      .def("row", [](const DtmcModel& self, const State& x) { return row_to_list(self.row(x)); })
      .def("reward", &DtmcModel::reward)
      .def("in_space", &DtmcModel::in_space)
      .def("params", [](const DtmcModel& self) { return from_json(self.params()); });

  py::class_<SlottedQueue, DtmcModel, std::shared_ptr<SlottedQueue>>(m, "SlottedQueue")
      .def(py::init<double>(), py::arg("q"));

  py::class_<ExplicitDtmc, DtmcModel, std::shared_ptr<ExplicitDtmc>>(m, "ExplicitDtmc")
      .def(py::init([](const std::vector<std::vector<std::pair<State, double>>>& rows, std::vector<double> rewards) {
             std::vector<Row> out;
             for (const auto& r : rows) {
               Row row;
               for (const auto& [to, p] : r) row.push_back({to, p});
               out.push_back(std::move(row));
             }
             return std::make_shared<ExplicitDtmc>(std::move(out), std::move(rewards));
           }),
           py::arg("rows"), py::arg("rewards"))
      .def_static("random",
                  [](std::size_t n, std::size_t extra, std::uint64_t seed) {
                    return std::make_shared<ExplicitDtmc>(ExplicitDtmc::random(n, extra, seed));
                  },
                  py::arg("n"), py::arg("extra"), py::arg("seed"))
      .def("__len__", &ExplicitDtmc::size);

  py::class_<EmbeddedChain, DtmcModel, std::shared_ptr<EmbeddedChain>>(m, "EmbeddedChain")
      .def("holding_rate", &EmbeddedChain::holding_rate)
      .def("scaled_unit", &EmbeddedChain::scaled_unit);

  py::class_<CtmcModel, std::shared_ptr<CtmcModel>>(m, "CtmcModel")
      .def_property_readonly("name", &CtmcModel::name)
      .def_property_readonly("dimension", &CtmcModel::dimension)
      .def("rate_row", [](const CtmcModel& self, const State& x) { return row_to_list(self.rate_row(x)); })
      .def("reward", &CtmcModel::reward)
      .def("exit_rate", &CtmcModel::exit_rate)
      .def("params", [](const CtmcModel& self) { return from_json(self.params()); });

  py::class_<TwoMm1, CtmcModel, std::shared_ptr<TwoMm1>>(m, "TwoMm1")
      .def(py::init<double, double, double, double>(), py::arg("lambda1"), py::arg("mu1"), py::arg("lambda2"),
           py::arg("mu2"));

  py::class_<Jackson, CtmcModel, std::shared_ptr<Jackson>>(m, "Jackson")
      .def(py::init<std::vector<double>, std::vector<double>, std::vector<std::vector<double>>>(), py::arg("lam"),
           py::arg("mu"), py::arg("routing"))
      .def("traffic", &Jackson::traffic);

  m.def(
      "embed_ctmc",
      [](std::shared_ptr<CtmcModel> ctmc) { return std::const_pointer_cast<EmbeddedChain>(embed_ctmc(ctmc)); },
      py::arg("ctmc"));

  // State sets and certificates
  py::class_<StateSet>(m, "StateSet")
      .def(py::init<std::vector<State>>(), py::arg("states"))
      .def_static("box", &StateSet::box, py::arg("upper"))
      .def("__len__", &StateSet::size)
      .def("__contains__", &StateSet::contains)
      .def("states", &StateSet::states);

  m.def("halfspace_set", &halfspace_set, py::arg("coeffs"), py::arg("rhs"), py::arg("upper"));
  m.def("quadratic_form", &quadratic_form, py::arg("coeffs"));

  py::class_<LyapunovCertificate>(m, "LyapunovCertificate")
      .def(py::init([](StateFn v, StateFn q, StateSet K, double c) { return LyapunovCertificate{v, q, K, c}; }),
           py::arg("v"), py::arg("q"), py::arg("K"), py::arg("c"))
      .def_readwrite("v", &LyapunovCertificate::v)
      .def_readwrite("q", &LyapunovCertificate::q)
      .def_readwrite("K", &LyapunovCertificate::K)
      .def_readwrite("c", &LyapunovCertificate::c);

  py::class_<DriftReport>(m, "DriftReport")
      .def_readonly("passed", &DriftReport::passed)
      .def_readonly("max_violation", &DriftReport::max_violation)
      .def_readonly("worst_state", &DriftReport::worst_state)
      .def_readonly("states_checked", &DriftReport::states_checked)
      .def_readonly("violations", &DriftReport::violations);

  m.def(
      "verify_drift",
      [](const DtmcModel& model, const LyapunovCertificate& cert, const StateSet& check, double tolerance) {
        return verify_drift(model, cert, check.states(), tolerance);
      },
      py::arg("model"), py::arg("cert"), py::arg("check"), py::arg("tolerance") = 0.0);
  m.def("minimal_c", &minimal_c, py::arg("model"), py::arg("v"), py::arg("q"), py::arg("K"));
  m.def(
      "embed_certificate",
      [](std::shared_ptr<EmbeddedChain> chain, const LyapunovCertificate& c) { return embed_certificate(chain, c); },
      py::arg("chain"), py::arg("continuous"));

  // Bounds
  py::class_<Partition>(m, "Partition")
      .def(py::init<State, StateSet, StateSet>(), py::arg("z"), py::arg("K"), py::arg("A"))
      .def_property_readonly("z", &Partition::z)
      .def_property_readonly("ktilde", &Partition::ktilde)
      .def_property_readonly("aprime", &Partition::aprime)
      .def("solve_states", [](const Partition& p) {
        std::vector<State> out;
        for (std::size_t i = 0; i < p.n_solve(); ++i) out.push_back(p.solve_state(i));
        return out;
      });

  py::class_<HittingBoundResult>(m, "HittingBoundResult")
      .def_readonly("lower", &HittingBoundResult::lower)
      .def_readonly("upper", &HittingBoundResult::upper)
      .def_readonly("gate", &HittingBoundResult::gate);

  m.def(
      "hitting_bounds",
      [](const DtmcModel& model, const LyapunovCertificate& cert, const Partition& part, bool rigorous) {
        HittingOptions o;
        o.lower_mode = rigorous ? SolveMode::kMonotone : SolveMode::kDirect;
        return hitting_bounds(model, cert, part, o);
      },
      py::arg("model"), py::arg("cert"), py::arg("partition"), py::arg("rigorous") = false);

  py::class_<BoundRow>(m, "BoundRow")
      .def_readonly("x", &BoundRow::x)
      .def_readonly("lower", &BoundRow::lower)
      .def_readonly("upper", &BoundRow::upper)
      .def_readonly("approx", &BoundRow::approx)
      .def_readonly("exact", &BoundRow::exact);

  py::class_<BoundTable>(m, "BoundTable")
      .def_readonly("rows", &BoundTable::rows)
      .def_property_readonly("alpha", [](const BoundTable& t) { return py::make_tuple(t.alpha.lower, t.alpha.upper); })
      .def_readonly("gate_reward", &BoundTable::gate_reward)
      .def_readonly("gate_unit", &BoundTable::gate_unit)
      .def_readonly("partition_defect", &BoundTable::partition_defect)
      .def("find", [](const BoundTable& t, const State& x) -> std::optional<BoundRow> {
        const BoundRow* r = t.find(x);
        if (!r) return std::nullopt;
        return *r;
      })
      .def("to_csv", [](const BoundTable& t) { return write_bounds_csv(t, {false}); });

  auto options = [](bool rigorous) {
    PoissonOptions o;
    o.lower_mode = rigorous ? SolveMode::kMonotone : SolveMode::kDirect;
    return o;
  };
  m.def(
      "g_bounds",
      [options](const DtmcModel& model, const LyapunovCertificate& r, const LyapunovCertificate& e,
                const Partition& part, bool rigorous) { return g_bounds(model, r, e, part, options(rigorous)); },
      py::arg("model"), py::arg("cert_reward"), py::arg("cert_unit"), py::arg("partition"),
      py::arg("rigorous") = false);
  m.def(
      "h_bounds",
      [options](const EmbeddedChain& chain, const LyapunovCertificate& s, const LyapunovCertificate& e,
                const Partition& part, bool rigorous) { return h_bounds(chain, s, e, part, options(rigorous)); },
      py::arg("chain"), py::arg("cert_reward"), py::arg("cert_unit"), py::arg("partition"),
      py::arg("rigorous") = false);

  // Oracle
  auto orc = m.def_submodule("oracle", "Brute-force references on enumerated finite chains");
  py::class_<oracle::FiniteChain>(orc, "FiniteChain")
      .def_property_readonly("states", [](const oracle::FiniteChain& c) { return c.states.states(); })
      .def_readonly("reward", &oracle::FiniteChain::reward)
      .def("index", &oracle::FiniteChain::index)
      .def("__len__", &oracle::FiniteChain::size);
  orc.def(
      "enumerate_box",
      [](const DtmcModel& model, const std::vector<int>& upper, const State& z) {
        return oracle::enumerate_box(model, upper, z);
      },
      py::arg("model"), py::arg("upper"), py::arg("z"));
  orc.def(
      "exact_poisson",
      [](const oracle::FiniteChain& c, const Vector& r, std::optional<Vector> weight) {
        const auto s = oracle::exact_poisson(c, r, weight ? &*weight : nullptr);
        return py::dict(py::arg("g") = s.g, py::arg("alpha") = s.alpha, py::arg("pi") = s.pi,
                        py::arg("residual") = s.residual);
      },
      py::arg("chain"), py::arg("r"), py::arg("weight") = py::none());
  orc.def("exact_hitting_reward", &oracle::exact_hitting_reward, py::arg("chain"), py::arg("q"));

  // Config-driven runs mirroring the CLI; configs are plain dicts.
  m.def(
      "run_config",
      [](const py::object& config, bool rigorous) {
        const RunResult r = run_single(parse_config(to_json(config)), {rigorous, false});
        return py::make_tuple(r.table, from_json(r.manifest));
      },
      py::arg("config"), py::arg("rigorous") = false);
  m.def(
      "sweep_config",
      [](const py::object& config, bool rigorous) {
        const SweepResult r = run_sweep(parse_config(to_json(config)), {rigorous, false});
        return py::make_tuple(write_sweep_csv(r, {false}), from_json(r.manifest));
      },
      py::arg("config"), py::arg("rigorous") = false);
  m.def(
      "oracle_config",
      [](const py::object& config) {
        const OracleRun r = run_oracle(parse_config(to_json(config)), {false, false});
        return py::make_tuple(r.csv, from_json(r.manifest));
      },
      py::arg("config"));
  m.def(
      "verify_config",
      [](const py::object& config) {
        const RunConfig cfg = parse_config(to_json(config));
        const ChainCertificates certs = build_certificates(cfg);
        const StateSet& check = cfg.certificate.check ? *cfg.certificate.check : cfg.A;
        const CertificateCheck c = verify_certificates(cfg, certs, check);
        return py::make_tuple(c.reward, c.unit);
      },
      py::arg("config"));
}
