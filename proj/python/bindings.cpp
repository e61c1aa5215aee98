#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "volbound/errors.hpp"
#include "volbound/phi_engine.hpp"
#include "volbound/pricing.hpp"
#include "volbound/reference_models.hpp"
#include "volbound/scenario_lab.hpp"
#include "volbound/special_functions.hpp"

namespace py = pybind11;
using namespace volbound;

namespace {

ReferenceModel model_named(const std::string& name, std::optional<double> z0) {
  ReferenceModel m = builtin_model(name);
  if (z0) m.z0 = *z0;
  return m;
}

}  // namespace

PYBIND11_MODULE(_volbound, m) {
  m.doc() = "volbound core bindings";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("norm_cdf", &norm_cdf, py::arg("x"));
  m.def("norm_pdf", &norm_pdf, py::arg("x"));
  m.def("bessel_k", py::overload_cast<int, double>(&bessel_k), py::arg("order"), py::arg("x"));

  m.def(
      "phi",
      [](const std::string& model, double z) { return builtin_model(model).phi(z); },
      py::arg("model"), py::arg("z"));

  m.def(
      "verify_phi",
      [](const std::string& model, double lo, double hi, std::size_t points, double tol) {
        ReferenceModel md = builtin_model(model);
        auto grid = interior_grid(lo, hi, points);
        OdeResidualReport r = verify_phi(md, grid, tol);
        py::dict d;
        d["max_abs"] = r.max_abs;
        d["rel_scale"] = r.rel_scale;
        d["tol"] = r.tol;
        d["positive"] = r.positive;
        d["convex"] = r.convex;
        d["passed"] = r.passed;
        return d;
      },
      py::arg("model"), py::arg("lo"), py::arg("hi"), py::arg("points") = 200,
      py::arg("tol") = 1e-8);

  m.def(
      "call_price",
      [](double t, double T, double K, double sigma, double z) {
        return bs_call_price(t, T, K, sigma, z).value;
      },
      py::arg("t"), py::arg("T"), py::arg("K"), py::arg("sigma"), py::arg("z"));

  m.def(
      "mc_call_price",
      [](const std::string& model, double sigma, double t, double T, double K,
         std::optional<double> z, std::size_t paths, double dt, std::uint64_t seed) {
        ReferenceModel md = model_named(model, z);
        SimConfig cfg;
        cfg.n_paths = paths;
        cfg.dt = dt;
        cfg.seed = seed;
        PriceQuote q = mc_call_price(md, sigma, t, T, K, md.z0, cfg);
        return py::make_tuple(q.value, q.se);
      },
      py::arg("model"), py::arg("sigma"), py::arg("t"), py::arg("T"), py::arg("K"),
      py::arg("z") = py::none(), py::arg("paths") = 10000, py::arg("dt") = 1e-2,
      py::arg("seed") = 1);

  m.def(
      "implied_vol",
      [](double price, double t, double T, double K, double z, double tol) {
        ImpliedVolOptions opts;
        opts.tol = tol;
        return implied_vol(builtin_model("gbm"), price, t, T, K, z, opts).sigma;
      },
      py::arg("price"), py::arg("t"), py::arg("T"), py::arg("K"), py::arg("z"),
      py::arg("tol") = 1e-10);

  m.def("commands", &lab::commands);

  m.def(
      "run",
      [](const std::string& command, const std::string& config_text,
         const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed,
         std::optional<std::size_t> paths, std::optional<double> dt,
         std::optional<unsigned> workers) {
        lab::RunConfig cfg;
        cfg.command = command;
        cfg.config_text = config_text;
        cfg.overrides = overrides;
        cfg.seed = seed;
        cfg.paths = paths;
        cfg.dt = dt;
        cfg.workers = workers;
        lab::RunOutcome out;
        {
          py::gil_scoped_release release;
          out = lab::run(cfg);
        }
        return py::make_tuple(out.exit_code, out.report.dump(), out.error);
      },
      py::arg("command"), py::arg("config_text") = "", py::arg("overrides") = std::vector<std::string>{},
      py::arg("seed") = py::none(), py::arg("paths") = py::none(), py::arg("dt") = py::none(),
      py::arg("workers") = py::none());
}
