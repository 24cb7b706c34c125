#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fpslab/campaigns.hpp"
#include "fpslab/domain.hpp"
#include "fpslab/error.hpp"
#include "fpslab/field.hpp"
#include "fpslab/local_sets.hpp"
#include "fpslab/observables.hpp"
#include "fpslab/stats.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// A lattice problem with its boundary data, the unit of work on the Python side.
class Lattice {
 public:
  Lattice(const std::string& domain_json, double mesh, const std::string& profile_dir) {
    fpslab::DomainSpec spec = json::parse(domain_json).get<fpslab::DomainSpec>();
    spec.validate();
    fpslab::ProfileStore store(profile_dir);
    dom_ = std::make_shared<const fpslab::LatticeDomain>(fpslab::build_lattice(spec, mesh));
    problem_ = fpslab::make_problem(dom_, fpslab::boundary_data_from_spec(*dom_), store.get(mesh));
  }

  int size() const { return dom_->interior_count(); }
  double mesh() const { return dom_->mesh(); }
  double kappa() const { return problem_->oracle->kappa(); }

  py::array_t<double> points() const {
    py::array_t<double> out({size(), 2});
    auto m = out.mutable_unchecked<2>();
    for (int v = 0; v < size(); ++v) {
      const auto z = dom_->interior_point(v);
      m(v, 0) = z.real();
      m(v, 1) = z.imag();
    }
    return out;
  }

  int nearest(double x, double y) const { return dom_->nearest_interior({x, y}); }
  double green(int x, int y) const { return problem_->oracle->green(x, y); }

  py::array_t<double> sample(std::uint64_t seed) const {
    return to_array(fpslab::sample_gff(*problem_->oracle, seed).phi);
  }

  py::dict local_set(std::uint64_t seed, const std::string& kind, double a, double b) const {
    const auto field = fpslab::sample_gff(*problem_->oracle, seed);
    const auto ec = fpslab::sample_edge_crossings(field, problem_->profile);
    fpslab::LocalSetSample ls;
    if (kind == "down") ls = fpslab::extract_fps(problem_, field, ec, a);
    else if (kind == "up") ls = fpslab::extract_fps_up(problem_, field, ec, b);
    else if (kind == "tvs") ls = fpslab::extract_tvs(problem_, field, ec, a, b);
    else throw fpslab::Error(fpslab::ErrorCode::kInvalidArgument, "kind must be down, up or tvs");
    py::dict d;
    d["phi"] = to_array(field.phi);
    d["in_set"] = to_array(ls.lattice_in_set);
    d["total"] = to_array(ls.lattice_total);
    d["nu"] = to_array(ls.nu);
    return d;
  }

  double hitting_time(std::uint64_t seed, double a, int z) const {
    const auto field = fpslab::sample_gff(*problem_->oracle, seed);
    const auto ls = fpslab::extract_fps(problem_, field, fpslab::sample_edge_crossings(field, problem_->profile), a);
    return ls.contains(z) ? std::numeric_limits<double>::infinity() : fpslab::hitting_time_observable(ls, z);
  }

 private:
  std::shared_ptr<const fpslab::LatticeDomain> dom_;
  std::shared_ptr<const fpslab::Problem> problem_;
};

std::string run_test_json(const std::string& name, const std::string& params, std::uint64_t seed, int workers,
                          std::optional<int> samples, const std::string& profile_dir) {
  fpslab::RunOptions opts;
  opts.seed = seed;
  opts.workers = workers;
  opts.samples = samples;
  fpslab::ProfileStore store(profile_dir);
  py::gil_scoped_release release;
  return fpslab::run_test(name, json::parse(params), opts, store).to_json().dump();
}

std::string catalog_json() {
  json j = json::array();
  for (const auto& t : fpslab::test_catalog())
    j.push_back({{"name", t.name}, {"criterion", t.criterion}, {"description", t.description},
                 {"min_samples", t.min_samples}, {"defaults", t.defaults}});
  return j.dump();
}

py::dict ks_levy(const std::vector<double>& values, double distance) {
  const auto r = fpslab::ks_test(values, fpslab::levy_hitting(distance));
  py::dict d;
  d["n"] = r.n;
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["reject"] = r.reject;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "first passage set sampler and checks";
  m.attr("version") = std::string(fpslab::kVersion);

  static py::exception<fpslab::Error> error(m, "FpslabError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const fpslab::Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<Lattice>(m, "Lattice")
      .def(py::init<const std::string&, double, const std::string&>(), py::arg("domain_json"), py::arg("mesh"),
           py::arg("profile_dir") = "")
      .def_property_readonly("size", &Lattice::size)
      .def_property_readonly("mesh", &Lattice::mesh)
      .def_property_readonly("kappa", &Lattice::kappa)
      .def("points", &Lattice::points)
      .def("nearest", &Lattice::nearest, py::arg("x"), py::arg("y"))
      .def("green", &Lattice::green, py::arg("x"), py::arg("y"))
      .def("sample", &Lattice::sample, py::arg("seed"))
      .def("local_set", &Lattice::local_set, py::arg("seed"), py::arg("kind"), py::arg("a") = 0.0,
           py::arg("b") = 0.0)
      .def("hitting_time", &Lattice::hitting_time, py::arg("seed"), py::arg("a"), py::arg("z"));

  m.def("catalog_json", &catalog_json);
  m.def("run_test_json", &run_test_json, py::arg("name"), py::arg("params") = "{}", py::arg("seed") = 1,
        py::arg("workers") = 1, py::arg("samples") = py::none(), py::arg("profile_dir") = "");
  m.def("ks_levy", &ks_levy, py::arg("values"), py::arg("distance"));
  m.def("unit_disk_json", [] { return json(fpslab::DomainSpec::unit_disk()).dump(); });
  m.def(
      "annulus_json",
      [](double r, double u_outer, double u_inner) {
        auto spec = fpslab::DomainSpec::annulus(r);
        spec.set_constant(0, u_outer).set_constant(1, u_inner);
        return json(spec).dump();
      },
      py::arg("inner_radius"), py::arg("u_outer") = 0.0, py::arg("u_inner") = 0.0);
}
