#include "jointmix/em_engine.hpp"
#include "jointmix/errors.hpp"
#include "jointmix/io.hpp"
#include "jointmix/ordinal_model.hpp"
#include "jointmix/simulation.hpp"
#include "jointmix/survival_model.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace jointmix;
using io::json;

namespace {

json parse(const std::string& text) {
  if (text.empty()) return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
}

Eigen::VectorXd column(const Dataset& data, double SurvivalRecord::*field) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = data.subjects[i].survival.*field;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_jointmix, m) {
  m.doc() = "Joint ordinal/survival mixture model";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<Dataset>(m, "Dataset")
      .def_static(
          "read_csv",
          [](const std::string& ordinal, const std::string& survival) {
            return io::read_dataset(ordinal, survival);
          },
          py::arg("ordinal"), py::arg("survival"))
      .def(
          "write_csv",
          [](const Dataset& d, const std::string& ordinal, const std::string& survival) {
            io::write_dataset(d, ordinal, survival);
          },
          py::arg("ordinal"), py::arg("survival"))
      .def("__len__", &Dataset::size)
      .def_readonly("levels", &Dataset::levels)
      .def_readonly("items", &Dataset::items)
      .def_property_readonly("ids",
                             [](const Dataset& d) {
                               std::vector<std::string> ids;
                               for (const auto& s : d.subjects) ids.push_back(s.id);
                               return ids;
                             })
      .def_property_readonly("times", [](const Dataset& d) { return column(d, &SurvivalRecord::time); })
      .def_property_readonly("covariates",
                             [](const Dataset& d) { return column(d, &SurvivalRecord::covariate); })
      .def_property_readonly("events", [](const Dataset& d) {
        Eigen::VectorXi out(static_cast<Eigen::Index>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i) {
          out[static_cast<Eigen::Index>(i)] = d.subjects[i].survival.event;
        }
        return out;
      });

  m.def("default_design", [] { return io::to_json(default_design()).dump(); });

  m.def(
      "simulate",
      [](const std::string& design) {
        const json j = parse(design);
        const SimDesign d = j.empty() ? default_design() : io::design_from_json(j);
        SimulatedData sim;
        {
          py::gil_scoped_release release;
          sim = generate_dataset(d);
        }
        return py::make_tuple(sim.data, sim.labels, sim.censored_fraction);
      },
      py::arg("design") = "");

  m.def(
      "fit",
      [](const Dataset& data, int groups, const std::string& config, const std::string& init) {
        const EMConfig cfg = io::config_from_json(parse(config));
        std::optional<ModelParams> start;
        if (!init.empty()) start = io::params_from_json(parse(init));
        FitResult fit;
        {
          py::gil_scoped_release release;
          fit = em_fit(data, groups, cfg, start);
        }
        json out = io::to_json(fit);
        return py::make_tuple(out.dump(), Eigen::MatrixXd(fit.posterior.gamma));
      },
      py::arg("data"), py::arg("groups"), py::arg("config") = "", py::arg("init") = "");

  m.def(
      "mc",
      [](const std::string& design, int replications, const std::string& config,
         bool init_at_truth) {
        const json j = parse(design);
        const SimDesign d = j.empty() ? default_design() : io::design_from_json(j);
        EMConfig base;
        base.max_iter = 20000;
        base.n_restarts = 1;
        MCOptions options{io::config_from_json(parse(config), base), init_at_truth};
        MCReport report;
        {
          py::gil_scoped_release release;
          report = mc_normality(d, replications, options);
        }
        return io::to_json(report).dump();
      },
      py::arg("design") = "", py::arg("replications") = 100, py::arg("config") = "",
      py::arg("init_at_truth") = true);

  m.def(
      "category_probs",
      [](double group_effect, const std::string& params) {
        const json j = parse(params);
        OrdinalParams p;
        const auto vec = [&](const char* key) {
          const auto v = j.at(key).get<std::vector<double>>();
          return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        };
        p.a = vec("a");
        p.phi = vec("phi");
        p.b = vec("b");
        validate(p, static_cast<int>(p.a.size()), static_cast<int>(p.b.size()));
        return Eigen::MatrixXd(category_log_probs(group_effect, p).array().exp());
      },
      py::arg("group_effect"), py::arg("ordinal_params"));

  m.def(
      "loglik",
      [](const Dataset& data, const std::string& params, const std::string& fit_hazard) {
        const ModelParams p = io::params_from_json(parse(params));
        const json h = parse(fit_hazard);
        HazardSteps hazard{h.at("times").get<std::vector<double>>(),
                           h.at("jumps").get<std::vector<double>>()};
        const ProfileModel model(data, p.groups());
        return observed_loglik(model, p, hazard);
      },
      py::arg("data"), py::arg("params"), py::arg("hazard"));
}
