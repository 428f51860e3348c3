// Python extension. Structured values cross the boundary as JSON text; the
// package wrapper converts them to and from dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dosefind/errors.hpp"
#include "dosefind/io.hpp"
#include "dosefind/service.hpp"

namespace py = pybind11;
using namespace dosefind;
using io::json;

namespace {

std::string simulate(const std::string& config) {
  const io::RunConfig rc = io::parse_run_config(json::parse(config));
  const EscalationConfig design = design_for(rc.scenario, rc.design);
  io::RunConfig recorded = rc;
  recorded.design = design;
  OperatingCharacteristics oc;
  {
    py::gil_scoped_release release;
    const auto results = run_replicates(rc.scenario, design, rc.prior, rc.mcmc, rc.replicates,
                                        rc.seed, rc.parallelism);
    oc = aggregate(rc.scenario, design, results);
  }
  json out = io::manifest(recorded, oc, {});
  out.erase("outputs");
  out["operating_characteristics"] = io::to_json(oc);
  out["oc_table_csv"] = io::oc_table_csv(rc.scenario, oc);
  out["curves_csv"] = io::curves_csv(rc.scenario, oc);
  return out.dump();
}

std::string optional_text(const std::optional<std::string>& s) { return s.value_or("{}"); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the dosefind package";

  static py::handle config_error =
      py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError).ptr();
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_ValueError);
  py::register_exception<LifecycleError>(m, "LifecycleError", PyExc_RuntimeError);
  py::register_exception<service::NotFound>(m, "NotFound", PyExc_KeyError);
  py::register_exception<service::IdempotencyConflict>(m, "IdempotencyConflict",
                                                       PyExc_RuntimeError);
  // Registered last so it runs first: attaches the offending field name.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::object err = config_error(e.what());
      err.attr("field") = e.field();
      PyErr_SetObject(config_error.ptr(), err.ptr());
    } catch (const json::parse_error& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("simulate", &simulate, py::arg("config"),
        "Run a batch simulation from a JSON run config; returns JSON text.");
  m.def("builtin_scenarios", [] { return service::TrialStore::builtin_scenarios_json().dump(); });
  m.def(
      "overdose_risk_reference",
      [](double pi, double tu) {
        const auto r = overdose_risk_reference(pi, tu);
        return py::make_tuple(r.risk, r.mean_dlt);
      },
      py::arg("pi"), py::arg("tu"));
  m.def(
      "joint_cell_prob",
      [](double alpha1, double beta1, double alpha2, double beta2, double gamma2, double zeta,
         double rho, double d, int y_tox, int y_eff) {
        ModelParams p;
        p.alpha1 = alpha1;
        p.beta1 = beta1;
        p.alpha2 = alpha2;
        p.beta2 = beta2;
        p.gamma2 = gamma2;
        p.zeta = zeta;
        p.rho = rho;
        return joint_cell_prob(p, d, y_tox, y_eff);
      },
      py::arg("alpha1"), py::arg("beta1"), py::arg("alpha2"), py::arg("beta2"),
      py::arg("gamma2"), py::arg("zeta"), py::arg("rho"), py::arg("d"), py::arg("y_tox"),
      py::arg("y_eff"));

  py::class_<service::TrialStore>(m, "TrialStore")
      .def(py::init([](const std::string& data_dir, const std::string& mcmc) {
             return std::make_unique<service::TrialStore>(data_dir,
                                                          io::parse_mcmc(json::parse(mcmc)));
           }),
           py::arg("data_dir") = "", py::arg("mcmc") = "{}")
      .def("create",
           [](service::TrialStore& s, const std::optional<std::string>& body) {
             return s.create(json::parse(optional_text(body))).dump();
           },
           py::arg("body") = py::none())
      .def("get", [](const service::TrialStore& s, const std::string& id) { return s.get(id).dump(); })
      .def("submit",
           [](service::TrialStore& s, const std::string& id, const std::string& body,
              const std::optional<std::string>& key) {
             const json b = json::parse(body);
             py::gil_scoped_release release;
             return s.submit(id, b, key).dump();
           },
           py::arg("id"), py::arg("body"), py::arg("idempotency_key") = py::none())
      .def("whatif",
           [](const service::TrialStore& s, const std::string& id, const std::string& body) {
             const json b = json::parse(body);
             py::gil_scoped_release release;
             return s.whatif(id, b).dump();
           })
      .def("posterior",
           [](const service::TrialStore& s, const std::string& id) {
             py::gil_scoped_release release;
             return s.posterior(id).dump();
           })
      .def("ids", &service::TrialStore::ids);
}
