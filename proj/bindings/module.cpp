// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main operations: environment generation, rates,
// the KMC walk, percolation estimators, and the bound/fit helpers.  Heavy
// orchestration stays in the C++ CLI; these wrappers are for scripting and
// smoke tests.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mottsim/bounds.hpp"
#include "mottsim/domination.hpp"
#include "mottsim/env_gen.hpp"
#include "mottsim/experiments.hpp"
#include "mottsim/kmc.hpp"
#include "mottsim/msd.hpp"
#include "mottsim/percolation.hpp"

namespace py = pybind11;
using namespace mott;

namespace {

BoxGeometry make_box(double side, int dim, bool periodic) {
  return BoxGeometry::cube(side, dim,
                           periodic ? Boundary::periodic : Boundary::open);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mott variable-range hopping simulation toolkit";

  py::class_<BoxGeometry>(m, "BoxGeometry")
      .def(py::init(&make_box), py::arg("side"), py::arg("dim") = 2,
           py::arg("periodic") = true)
      .def_property_readonly("dim", &BoxGeometry::dim)
      .def_property_readonly("sides",
                             [](const BoxGeometry& b) { return b.sides; })
      .def_property_readonly("periodic", &BoxGeometry::periodic)
      .def("volume", &BoxGeometry::volume);

  py::class_<NuLaw>(m, "NuLaw")
      .def(py::init([](double alpha, double c0) {
             NuLaw nu{alpha, c0};
             nu.validate();
             return nu;
           }),
           py::arg("alpha") = 0.0, py::arg("c0") = 1.0)
      .def_readonly("alpha", &NuLaw::alpha)
      .def("interval_mass", &NuLaw::interval_mass);

  py::class_<RateModel>(m, "RateModel")
      .def_static("mean_field", &RateModel::mean_field, py::arg("beta"),
                  py::arg("r_cut") = 40.0)
      .def_readonly("beta", &RateModel::beta)
      .def_readonly("r_cut", &RateModel::r_cut)
      .def_readonly("kappa1", &RateModel::kappa1)
      .def_readonly("kappa2", &RateModel::kappa2);

  py::class_<MarkedConfiguration>(m, "MarkedConfiguration")
      .def_static(
          "create",
          [](BoxGeometry box, std::vector<double> coords,
             std::vector<double> energies, py::object origin) {
            std::optional<std::size_t> idx;
            if (!origin.is_none()) idx = origin.cast<std::size_t>();
            return MarkedConfiguration::create(std::move(box), std::move(coords),
                                               std::move(energies), idx);
          },
          py::arg("box"), py::arg("coords"), py::arg("energies"),
          py::arg("origin") = py::none())
      .def("__len__", &MarkedConfiguration::size)
      .def_property_readonly("dim", &MarkedConfiguration::dim)
      .def_property_readonly(
          "coords", [](const MarkedConfiguration& c) { return c.coords(); })
      .def_property_readonly(
          "energies", [](const MarkedConfiguration& c) { return c.energies(); })
      .def_property_readonly("origin_index",
                             [](const MarkedConfiguration& c) -> py::object {
                               if (!c.has_origin()) return py::none();
                               return py::cast(*c.origin_index());
                             });

  py::class_<CrystalSpec>(m, "CrystalSpec")
      .def_static("cubic", &CrystalSpec::cubic, py::arg("spacing"),
                  py::arg("dim") = 2, py::arg("dilution_p") = 1.0);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("times", &Trajectory::times)
      .def_readonly("sites", &Trajectory::sites)
      .def_readonly("displacement", &Trajectory::displacement)
      .def_readonly("stuck", &Trajectory::stuck)
      .def_readonly("truncated", &Trajectory::truncated)
      .def_property_readonly("dim",
                             [](const Trajectory& t) { return t.dim; });

  // --- environment generation -------------------------------------------
  m.def(
      "sample_poisson",
      [](double rho, const BoxGeometry& box, std::uint64_t seed,
         std::uint64_t replica) {
        RngStream rng(seed, replica);
        return sample_poisson(rho, box, rng);
      },
      py::arg("rho"), py::arg("box"), py::arg("seed"), py::arg("replica") = 0);
  m.def(
      "thin",
      [](std::vector<double> points, int dim, double p, std::uint64_t seed,
         std::uint64_t replica) {
        RngStream rng(seed, replica);
        return thin(points, dim, p, rng);
      },
      py::arg("points"), py::arg("dim"), py::arg("p"), py::arg("seed"),
      py::arg("replica") = 0);
  m.def(
      "palm_poisson",
      [](double rho, const BoxGeometry& box, const NuLaw& nu,
         std::uint64_t seed, std::uint64_t replica) {
        RngStream rng(seed, replica);
        return palm_poisson(rho, box, nu, rng);
      },
      py::arg("rho"), py::arg("box"), py::arg("nu"), py::arg("seed"),
      py::arg("replica") = 0);
  m.def(
      "diluted_crystal",
      [](const CrystalSpec& spec, const BoxGeometry& box, std::uint64_t seed,
         std::uint64_t replica) {
        RngStream rng(seed, replica);
        return diluted_crystal(spec, box, rng);
      },
      py::arg("spec"), py::arg("box"), py::arg("seed"), py::arg("replica") = 0);
  m.def(
      "palm_crystal",
      [](const CrystalSpec& spec, const BoxGeometry& box, const NuLaw& nu,
         std::uint64_t seed, std::uint64_t replica) {
        RngStream rng(seed, replica);
        return palm_crystal(spec, box, nu, rng);
      },
      py::arg("spec"), py::arg("box"), py::arg("nu"), py::arg("seed"),
      py::arg("replica") = 0);
  m.def(
      "campbell_estimate",
      [](std::function<MarkedConfiguration(std::uint64_t)> sampler,
         double window, Statistic statistic, std::size_t n,
         std::uint64_t seed) {
        const StationarySource source = [&sampler](RngStream& rng) {
          return sampler(rng.next_u64());
        };
        const CampbellEstimate est =
            campbell_estimate(source, window, statistic, n, seed);
        return py::make_tuple(est.value, est.stderr_value);
      },
      py::arg("sampler"), py::arg("window"), py::arg("statistic"), py::arg("n"),
      py::arg("seed"));

  // --- rates and the walk --------------------------------------------------
  m.def("pair_rate", &pair_rate, py::arg("config"), py::arg("x"), py::arg("y"),
        py::arg("model"));
  m.def(
      "escape_rate",
      [](const MarkedConfiguration& cfg, std::size_t x, const RateModel& model) {
        const CellGrid grid(cfg.coords(), cfg.box(),
                            std::max(1.0, cfg.box().min_side() / 8.0));
        return escape_rate(cfg, x, model, grid);
      },
      py::arg("config"), py::arg("x"), py::arg("model"));
  m.def(
      "jump_probabilities",
      [](const MarkedConfiguration& cfg, std::size_t x, const RateModel& model) {
        const CellGrid grid(cfg.coords(), cfg.box(),
                            std::max(1.0, cfg.box().min_side() / 8.0));
        const JumpDistribution jd = jump_distribution(cfg, x, model, grid);
        return py::make_tuple(jd.neighbors, jd.probabilities);
      },
      py::arg("config"), py::arg("x"), py::arg("model"));
  m.def(
      "simulate",
      [](const MarkedConfiguration& cfg, const RateModel& model, double t_max,
         std::uint64_t seed, std::uint64_t replica, std::uint64_t max_steps) {
        RngStream rng(seed, replica);
        SimulateOptions opts;
        opts.max_steps = max_steps;
        return simulate(cfg, model, t_max, rng, opts);
      },
      py::arg("config"), py::arg("model"), py::arg("t_max"), py::arg("seed"),
      py::arg("replica") = 0, py::arg("max_steps") = 400000);

  // --- percolation ----------------------------------------------------------
  m.def(
      "boolean_cluster_sizes",
      [](std::vector<double> points, const BoxGeometry& box, double r) {
        const ClusterStructure cs = boolean_clusters(points, box, r);
        std::vector<std::uint32_t> sizes;
        const std::size_t n = points.size() / box.sides.size();
        for (std::size_t i = 0; i < n; ++i)
          if (cs.root[i] == i) sizes.push_back(cs.size[i]);
        return sizes;
      },
      py::arg("points"), py::arg("box"), py::arg("r"));
  m.def(
      "crossing_probability",
      [](double rho, double r, double box_side, int dim, std::size_t n,
         std::uint64_t seed, int workers) {
        const CrossingEstimate est =
            crossing_probability(rho, r, box_side, dim, n, seed, workers);
        return py::make_tuple(est.probability, est.stderr_probability);
      },
      py::arg("rho"), py::arg("r"), py::arg("box_side"), py::arg("dim"),
      py::arg("n"), py::arg("seed"), py::arg("workers") = 1);
  m.def("mott_exponent", &mott_exponent, py::arg("alpha"), py::arg("dim"));
  m.def("energy_threshold", &energy_threshold, py::arg("beta"), py::arg("alpha"),
        py::arg("dim"));
  m.def(
      "mott_graph_cluster",
      [](const MarkedConfiguration& cfg, double energy_cap, double range) {
        return mott_graph_cluster(cfg, MottGraphParams{energy_cap, range});
      },
      py::arg("config"), py::arg("energy_cap"), py::arg("range"));

  // --- bounds and fits --------------------------------------------------------
  m.def("closed_form_bound", &closed_form_bound, py::arg("beta"),
        py::arg("alpha"), py::arg("dim"), py::arg("c1"), py::arg("c2"),
        py::arg("C"));
  m.def(
      "fit_mott_exponent",
      [](std::vector<std::pair<double, double>> pairs, double fixed_exponent) {
        const ExponentFit fit = fit_mott_exponent(pairs, fixed_exponent);
        py::dict out;
        out["slope"] = fit.slope;
        out["slope_stderr"] = fit.slope_stderr;
        out["r_squared"] = fit.r_squared;
        out["points_used"] = fit.points_used;
        out["points_dropped"] = fit.points_dropped;
        out["fixed_exponent"] = fit.fixed_exponent;
        out["fixed_C"] = fit.fixed_c;
        out["fixed_prefactor"] = fit.fixed_prefactor;
        return out;
      },
      py::arg("pairs"), py::arg("fixed_exponent"));
  m.def("choose_rho_prime", &choose_rho_prime, py::arg("p"), py::arg("n_bound"),
        py::arg("cell"), py::arg("dim"));
  m.def("beta_star_from_p", &beta_star_from_p, py::arg("p"), py::arg("nu"),
        py::arg("dim"));

  // --- experiment orchestration -------------------------------------------
  m.def(
      "run_experiment",
      [](const std::string& config_text) {
        const ExperimentConfig cfg =
            ExperimentConfig::from_kv(KeyValueConfig::parse(config_text));
        return run_experiment(cfg);
      },
      py::arg("config_text"),
      "Runs one experiment from config text; returns the exit code.");

  py::register_exception<InsufficientData>(m, "InsufficientDataError");
  py::register_exception<ConfigError>(m, "ConfigErrorException");
}
