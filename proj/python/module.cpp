#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hkflow/error.hpp"
#include "hkflow/evi.hpp"
#include "hkflow/experiment.hpp"
#include "hkflow/geometry.hpp"
#include "hkflow/hk.hpp"
#include "hkflow/mdelta.hpp"
#include "hkflow/mm.hpp"
#include "hkflow/pde.hpp"

namespace py = pybind11;
using namespace hkflow;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hellinger-Kantorovich distances, minimizing movements and reference flows";
  m.attr("__version__") = kVersion;

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<SolverFailure>(m, "SolverFailure", PyExc_RuntimeError);

  py::class_<GridDomain, std::shared_ptr<GridDomain>>(m, "GridDomain")
      .def(py::init<std::vector<double>, std::vector<double>, std::vector<int>>(), py::arg("lower"),
           py::arg("upper"), py::arg("nodes"))
      .def_property_readonly("dim", &GridDomain::dim)
      .def_property_readonly("size", &GridDomain::size)
      .def_property_readonly("weights", &GridDomain::weights)
      .def_property_readonly("coords", &GridDomain::coords)
      .def("volume", &GridDomain::volume)
      .def("distance", &GridDomain::distance);
  m.def("interval", [](double a, double b, int n) {
    return std::make_shared<GridDomain>(std::vector<double>{a}, std::vector<double>{b}, std::vector<int>{n});
  }, py::arg("a"), py::arg("b"), py::arg("n"));

  py::class_<DiscreteMeasure>(m, "Measure")
      .def(py::init([](std::shared_ptr<GridDomain> d, Eigen::VectorXd rho) {
             return DiscreteMeasure(std::const_pointer_cast<const GridDomain>(d), std::move(rho));
           }),
           py::arg("domain"), py::arg("density"))
      .def_property_readonly("density", [](const DiscreteMeasure& mu) { return mu.density(); })
      .def_property_readonly("masses", &DiscreteMeasure::masses)
      .def_property_readonly("mass", [](const DiscreteMeasure& mu) { return total_mass(mu); })
      .def("normalized", [](const DiscreteMeasure& mu) { return normalize(mu); })
      .def("scaled", [](const DiscreteMeasure& mu, double f) { return scale_measure(mu, f); });

  py::class_<Entropy>(m, "Entropy")
      .def(py::init<>())
      .def_static("power_mass", &Entropy::power_mass, py::arg("alpha"), py::arg("m"), py::arg("gamma") = 0.0)
      .def_static("neg_power", &Entropy::neg_power, py::arg("q"), py::arg("beta") = 1.0)
      .def_static("custom_table", &Entropy::custom_table, py::arg("c"), py::arg("e"), py::arg("lam") = 0.0)
      .def_static("capped", &Entropy::capped, py::arg("gamma"), py::arg("eps") = 1e-3)
      .def("value", &Entropy::value)
      .def("d1", &Entropy::d1)
      .def("d2", &Entropy::d2)
      .def("functional", &Entropy::functional)
      .def_property_readonly("lam", &Entropy::lambda)
      .def("__repr__", &Entropy::describe);

  m.def("hk_distance_squared", [](const DiscreteMeasure& a, const DiscreteMeasure& b) {
    const LetResult r = hk_distance_squared(a, b);
    py::dict d;
    d["value"] = r.value;
    d["dual_value"] = r.dual_value;
    d["gap"] = r.gap;
    d["plan"] = r.plan;
    d["exact"] = r.exact;
    d["converged"] = r.converged;
    return d;
  });
  m.def("hk_exact_small", [](const DiscreteMeasure& a, const DiscreteMeasure& b) { return hk_exact_small(a, b).value; });
  m.def("shk_distance", [](const DiscreteMeasure& a, const DiscreteMeasure& b) { return shk_distance(a, b); });
  m.def("hk_two_dirac", &hk_two_dirac, py::arg("a"), py::arg("b"), py::arg("d"));

  py::class_<MMTrajectory>(m, "Trajectory")
      .def_readonly("tau", &MMTrajectory::tau)
      .def_readonly("times", &MMTrajectory::times)
      .def_readonly("energies", &MMTrajectory::energies)
      .def_readonly("step_distance_sq", &MMTrajectory::step_distance_sq)
      .def_readonly("measures", &MMTrajectory::measures)
      .def_property_readonly("densities", [](const MMTrajectory& t) {
        Eigen::MatrixXd out(t.measures.size(), t.measures.empty() ? 0 : t.measures[0].size());
        for (std::size_t k = 0; k < t.measures.size(); ++k) out.row(k) = t.measures[k].density().transpose();
        return out;
      });
  m.def("run_mm", [](const std::string& metric, const DiscreteMeasure& mu0, const Entropy& e, double tau, int steps) {
    return run_mm(parse_metric(metric), mu0, e, tau, steps);
  }, py::arg("metric"), py::arg("mu0"), py::arg("entropy"), py::arg("tau"), py::arg("steps"));
  m.def("scalar_mm", &scalar_mm, py::arg("c0"), py::arg("tau"), py::arg("entropy"), py::arg("steps"));
  m.def("solve_scalar_ode", [](double c0, const Entropy& e, double T) {
    const OdePath p = solve_scalar_ode(c0, e, T);
    return py::make_tuple(p.t, p.c);
  });
  m.def("solve_pde", [](const std::string& metric, const DiscreteMeasure& rho0, const Entropy& e, double T,
                        double alpha, double beta) {
    PdeConfig cfg;
    cfg.T = T;
    cfg.alpha = alpha;
    cfg.beta = beta;
    const PdeTrajectory p = parse_metric(metric) == Metric::HK ? solve_reaction_diffusion_hk(rho0, e, cfg)
                                                               : solve_shk_pde(rho0, e, cfg);
    return p.at(T).density();
  }, py::arg("metric"), py::arg("rho0"), py::arg("entropy"), py::arg("T"), py::arg("alpha") = 1.0,
        py::arg("beta") = 4.0);
  m.def("evi_worst_residual", [](const MMTrajectory& t) {
    const auto obs = default_observers(t.measures[0], t.metric);
    const EVIReport r = evi_residual_integrated(t.measures, t.tau, obs, t.entropy.lambda(), t.entropy, t.metric);
    return py::make_tuple(r.worst_lambda_star, r.worst_lambda);
  });
  m.def("q_p", &q_p, py::arg("p"), py::arg("t"), py::arg("delta"));
  m.def("check_transfer_estimates", [](double p, int n) {
    const TransferReport r = check_transfer_estimates(p, n, n);
    return py::make_tuple(r.holds, r.min_q, r.witness_t, r.witness_delta);
  }, py::arg("p"), py::arg("n") = 200);
  m.def("in_m_delta", &in_m_delta);
  m.def("in_m_tilde", &in_m_tilde);
  m.def("run_experiment", [](const std::string& verb, std::optional<std::filesystem::path> config,
                             std::filesystem::path out, std::optional<double> p) {
    ExperimentConfig cfg;
    cfg.verb = verb;
    cfg.config_path = std::move(config);
    cfg.out_dir = std::move(out);
    cfg.p = p;
    const ExperimentResult r = run_experiment(cfg);
    return py::make_tuple(r.exit_code, r.files, r.failures);
  }, py::arg("verb"), py::arg("config") = py::none(), py::arg("out") = "out", py::arg("p") = py::none());
}
