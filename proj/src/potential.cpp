#include "fpslab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

#include "fpslab/error.hpp"

namespace fpslab {

namespace {

constexpr double kInvTwoPi = 0.5 / std::numbers::pi;

using Llt = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>>;

void check_sets(const CableGraph& g, const ComponentSet& b1, const ComponentSet& b2) {
  for (int c : b1)
    if (std::find(b2.begin(), b2.end(), c) != b2.end())
      throw Error(ErrorCode::kOverlappingBoundarySets, "component " + std::to_string(c) + " in both sets");
  auto present = [&](const ComponentSet& b) {
    for (const auto& f : g.fixed_nodes())
      if (f.kind == FixedKind::kBoundary && std::find(b.begin(), b.end(), f.component) != b.end()) return true;
    return false;
  };
  if (b1.empty() || !present(b1)) throw Error(ErrorCode::kEmptySet, "first boundary set has no vertices");
  if (b2.empty() || !present(b2)) throw Error(ErrorCode::kEmptySet, "second boundary set has no vertices");
}

bool in_set(const ComponentSet& b, int c) { return std::find(b.begin(), b.end(), c) != b.end(); }

}  // namespace

void CalibrationProfile::require_calibrated() const {
  if (!calibrated) throw Error(ErrorCode::kNotCalibrated, "calibration profile missing");
}

void to_json(nlohmann::json& j, const CalibrationProfile& p) {
  j = nlohmann::json{{"kappa", p.kappa},
                     {"self_singularity", p.self_singularity},
                     {"mesh", p.mesh},
                     {"bridge_variance", p.bridge_variance},
                     {"cell_weight", p.cell_weight},
                     {"probe_radii", p.probe_radii},
                     {"residuals", p.residuals},
                     {"max_variance_z", p.max_variance_z}};
}

void from_json(const nlohmann::json& j, CalibrationProfile& p) {
  p = CalibrationProfile{};
  p.kappa = j.at("kappa").get<double>();
  p.self_singularity = j.at("self_singularity").get<double>();
  p.mesh = j.at("mesh").get<double>();
  p.bridge_variance = j.value("bridge_variance", p.kappa);
  p.cell_weight = j.value("cell_weight", 1.0);
  p.probe_radii = j.value("probe_radii", std::vector<double>{});
  p.residuals = j.value("residuals", std::vector<double>{});
  p.max_variance_z = j.value("max_variance_z", 0.0);
  p.calibrated = true;
}

CalibrationProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotCalibrated, "no calibration profile at " + path);
  try {
    return nlohmann::json::parse(in).get<CalibrationProfile>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIoError, path + ": " + e.what());
  }
}

struct GreenOracle::Factor {
  Llt llt;
};

GreenOracle::GreenOracle(std::shared_ptr<const CableGraph> graph, double kappa)
    : graph_(std::move(graph)), kappa_(kappa) {
  if (graph_->free_count() == 0) throw Error(ErrorCode::kEmptyComplement, "no free nodes to factorize");
  auto f = std::make_shared<Factor>();
  f->llt.compute(graph_->laplacian());
  if (f->llt.info() != Eigen::Success) throw Error(ErrorCode::kSolverFailure, "Cholesky factorization failed");
  factor_ = std::move(f);
}

GreenOracle::GreenOracle(const LatticeDomain& dom, double kappa) : GreenOracle(dom.cable_graph(), kappa) {}

GreenOracle GreenOracle::with_graph(std::shared_ptr<const CableGraph> graph) const {
  if (graph->free_count() != size() || graph->edges().size() != graph_->edges().size())
    throw Error(ErrorCode::kInvalidArgument, "graph topology differs from the factorized one");
  GreenOracle o;
  o.graph_ = std::move(graph);
  o.factor_ = factor_;
  o.kappa_ = kappa_;
  return o;
}

void GreenOracle::check_node(int x) const {
  if (x < 0 || x >= size()) throw Error(ErrorCode::kVertexOutOfDomain, "vertex " + std::to_string(x));
}

Eigen::VectorXd GreenOracle::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = factor_->llt.solve(rhs);
  if (!x.allFinite()) throw Error(ErrorCode::kSolverFailure, "non-finite solution");
  return x;
}

Eigen::VectorXd GreenOracle::green_column(int y) const {
  check_node(y);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(size());
  e[y] = 1.0;
  return kappa_ * solve(e);
}

double GreenOracle::green(int x, int y) const {
  check_node(x);
  return green_column(y)[x];
}

Eigen::VectorXd GreenOracle::diagonal() const {
  // Takahashi recurrences on the pattern of L, last column first:
  //   Z(i,j) = -sum_k L(k,j) Z(i,k) / L(j,j),  Z(j,j) = 1/L(j,j)^2 - sum_k L(k,j) Z(k,j) / L(j,j).
  const auto& l = factor_->llt.matrixL().nestedExpression();
  const int n = static_cast<int>(l.cols());
  const int* outer = l.outerIndexPtr();
  const int* inner = l.innerIndexPtr();
  const double* lv = l.valuePtr();
  std::vector<double> z(l.nonZeros(), 0.0);
  std::vector<double> acc;
  for (int j = n - 1; j >= 0; --j) {
    const int p0 = outer[j], p1 = outer[j + 1];
    const int m = p1 - p0 - 1;
    const double d = lv[p0];
    // acc[t] collects sum_k L(k,j) Z(row t, k) over the pattern below j. The
    // pattern below j is a subset of every column k in it (clique property).
    acc.assign(m, 0.0);
    for (int t = 0; t < m; ++t) {
      const int k = inner[p0 + 1 + t];
      const double lk = lv[p0 + 1 + t];
      int q = outer[k];
      acc[t] += lk * z[q];  // Z(k,k)
      for (int u = t + 1; u < m; ++u) {
        const int i = inner[p0 + 1 + u];
        while (inner[q] < i) ++q;
        acc[u] += lk * z[q];
        acc[t] += lv[p0 + 1 + u] * z[q];
      }
    }
    double s = 0.0;
    for (int t = 0; t < m; ++t) {
      z[p0 + 1 + t] = -acc[t] / d;
      s += lv[p0 + 1 + t] * z[p0 + 1 + t];
    }
    z[p0] = 1.0 / (d * d) - s / d;
  }
  Eigen::VectorXd out(n);
  const auto& perm = factor_->llt.permutationP().indices();
  for (int i = 0; i < n; ++i) out[i] = kappa_ * z[outer[perm[i]]];
  return out;
}

double GreenOracle::quadratic_form(const Eigen::VectorXd& d) const { return kappa_ * d.dot(solve(d)); }

Eigen::VectorXd GreenOracle::correlate(const Eigen::VectorXd& xi) const {
  // L = P^T U^T U P, so P^T U^{-1} xi has covariance L^{-1}.
  Eigen::VectorXd y = factor_->llt.matrixU().solve(xi);
  return std::sqrt(kappa_) * (factor_->llt.permutationPinv() * y);
}

Eigen::VectorXd GreenOracle::harmonic(std::span<const double> fixed_values) const {
  return solve(graph_->dirichlet_rhs(fixed_values));
}

RegularizedDiagonal regularized_diagonal(const GreenOracle& oracle, const CalibrationProfile& profile,
                                         std::span<const int> vertices) {
  profile.require_calibrated();
  RegularizedDiagonal out;
  const double sing = kInvTwoPi * std::log(1.0 / profile.mesh) + profile.self_singularity;
  for (int v : vertices) {
    const double g = oracle.green_diag(v) - sing;
    out.vertices.push_back(v);
    out.g_values.push_back(g);
    out.cr_values.push_back(std::exp(2.0 * std::numbers::pi * g));
  }
  return out;
}

CalibrationProfile fit_calibration(const LatticeDomain& dom, std::span<const double> probe_radii) {
  if (probe_radii.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two probes");
  const GreenOracle raw(dom, 1.0);
  const std::size_t n = probe_radii.size();
  std::vector<double> diag(n), target(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int v = dom.nearest_interior({probe_radii[k], 0.0});
    const double r = std::abs(dom.interior_point(v));
    diag[k] = raw.green_diag(v);
    target[k] = kInvTwoPi * std::log(1.0 - r * r);
  }
  // diag = alpha + beta * target, with beta = 1/kappa.
  double mt = 0, md = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mt += target[k] / n;
    md += diag[k] / n;
  }
  double stt = 0, std_ = 0;
  for (std::size_t k = 0; k < n; ++k) {
    stt += (target[k] - mt) * (target[k] - mt);
    std_ += (target[k] - mt) * (diag[k] - md);
  }
  const double beta = std_ / stt;
  const double alpha = md - beta * mt;
  if (!(beta > 0.0)) throw Error(ErrorCode::kCalibrationFailure, "non-positive slope in Green fit");
  CalibrationProfile p;
  p.kappa = 1.0 / beta;
  p.mesh = dom.mesh();
  p.self_singularity = alpha * p.kappa - kInvTwoPi * std::log(1.0 / p.mesh);
  // Edge bridges last kappa per unit resistance; one lattice cell per vertex.
  p.bridge_variance = p.kappa;
  p.cell_weight = 1.0;
  p.probe_radii.assign(probe_radii.begin(), probe_radii.end());
  const double sing = alpha * p.kappa;
  for (std::size_t k = 0; k < n; ++k) {
    const double g_fit = p.kappa * diag[k] - sing;
    const double cr_fit = std::exp(2.0 * std::numbers::pi * g_fit);
    const double cr_true = std::exp(2.0 * std::numbers::pi * target[k]);
    p.residuals.push_back(cr_fit / cr_true - 1.0);
  }
  p.calibrated = true;
  return p;
}

PinnedSolution solve_pinned(const CableGraph& g, std::span<const std::int8_t> role) {
  if (static_cast<int>(role.size()) != g.fixed_count()) throw Error(ErrorCode::kInvalidArgument, "role size mismatch");
  const int nf = g.free_count();
  auto kept = [&](const CableEdge& e) {
    return !(g.is_fixed(e.a) && role[e.a - nf] < 0) && !(g.is_fixed(e.b) && role[e.b - nf] < 0);
  };
  // Free nodes with no kept path to a pinned node float; they carry no energy.
  std::vector<std::uint8_t> anchored(nf, 0);
  std::vector<int> stack;
  for (const auto& e : g.edges()) {
    if (!kept(e)) continue;
    if (g.is_fixed(e.a) && !g.is_fixed(e.b) && !anchored[e.b]) anchored[e.b] = 1, stack.push_back(e.b);
    if (g.is_fixed(e.b) && !g.is_fixed(e.a) && !anchored[e.a]) anchored[e.a] = 1, stack.push_back(e.a);
  }
  while (!stack.empty()) {
    const int x = stack.back();
    stack.pop_back();
    for (int ei : g.incident(x)) {
      const int y = g.other_end(ei, x);
      if (!g.is_fixed(y) && !anchored[y]) anchored[y] = 1, stack.push_back(y);
    }
  }
  std::vector<Eigen::Triplet<double>> t;
  std::vector<double> diag(nf, 0.0);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
  for (const auto& e : g.edges()) {
    if (!kept(e)) continue;
    const double c = 1.0 / e.resistance;
    const bool fa = g.is_fixed(e.a), fb = g.is_fixed(e.b);
    if (!fa) diag[e.a] += c;
    if (!fb) diag[e.b] += c;
    if (!fa && !fb) {
      t.emplace_back(e.a, e.b, -c);
      t.emplace_back(e.b, e.a, -c);
    } else if (fa && !fb) {
      rhs[e.b] += c * role[e.a - nf];
    } else if (fb && !fa) {
      rhs[e.a] += c * role[e.b - nf];
    }
  }
  std::vector<int> index(nf, -1);
  int n_active = 0;
  for (int i = 0; i < nf; ++i)
    if (anchored[i]) index[i] = n_active++;
  std::vector<Eigen::Triplet<double>> ta;
  ta.reserve(t.size() + n_active);
  for (const auto& tr : t)
    if (anchored[tr.row()]) ta.emplace_back(index[tr.row()], index[tr.col()], tr.value());
  Eigen::VectorXd rhs_a(n_active);
  for (int i = 0; i < nf; ++i)
    if (anchored[i]) {
      ta.emplace_back(index[i], index[i], diag[i]);
      rhs_a[index[i]] = rhs[i];
    }
  PinnedSolution out;
  out.potential = Eigen::VectorXd::Zero(nf);
  if (n_active > 0) {
    Eigen::SparseMatrix<double> lap(n_active, n_active);
    lap.setFromTriplets(ta.begin(), ta.end());
    Llt llt(lap);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::kSolverFailure, "pinned Laplacian factorization failed");
    const Eigen::VectorXd x = llt.solve(rhs_a);
    if (!x.allFinite()) throw Error(ErrorCode::kSolverFailure, "pinned solve produced non-finite values");
    for (int i = 0; i < nf; ++i)
      if (anchored[i]) out.potential[i] = x[index[i]];
  }
  auto value = [&](int node) { return g.is_fixed(node) ? static_cast<double>(role[node - nf]) : out.potential[node]; };
  out.outflow.assign(g.fixed_count(), 0.0);
  for (const auto& e : g.edges()) {
    if (!kept(e)) continue;
    if ((!g.is_fixed(e.a) && !anchored[e.a]) || (!g.is_fixed(e.b) && !anchored[e.b])) continue;
    const double c = 1.0 / e.resistance;
    const double d = value(e.a) - value(e.b);
    out.energy += c * d * d;
    if (g.is_fixed(e.a)) out.outflow[e.a - nf] += c * d;
    if (g.is_fixed(e.b)) out.outflow[e.b - nf] -= c * d;
  }
  return out;
}

double extremal_length(const GreenOracle& oracle, const ComponentSet& b1, const ComponentSet& b2) {
  const auto& g = oracle.graph();
  check_sets(g, b1, b2);
  std::vector<std::int8_t> role(g.fixed_count(), -1);
  for (int k = 0; k < g.fixed_count(); ++k) {
    const auto& f = g.fixed(k);
    if (f.kind != FixedKind::kBoundary) continue;
    if (in_set(b1, f.component)) role[k] = 0;
    if (in_set(b2, f.component)) role[k] = 1;
  }
  const double m = solve_pinned(g, role).energy;
  if (!(m > 0.0)) throw Error(ErrorCode::kSolverFailure, "boundary sets are not connected");
  return 1.0 / m;
}

double extremal_length_with_set(const GreenOracle& oracle, const ComponentSet& b, std::span<const int> a_vertices) {
  const auto& g = oracle.graph();
  std::vector<std::uint8_t> in_a(g.free_count(), 0);
  for (int v : a_vertices) {
    if (v < 0 || v >= g.free_count()) throw Error(ErrorCode::kVertexOutOfDomain, "vertex " + std::to_string(v));
    in_a[v] = 1;
  }
  ComponentSet rest;
  for (const auto& f : g.fixed_nodes())
    if (f.kind == FixedKind::kBoundary && !in_set(b, f.component) && !in_set(rest, f.component))
      rest.push_back(f.component);
  check_sets(g, b, rest);
  const CableGraph pinned = g.pin_free(in_a, 0.0);
  std::vector<std::int8_t> role(pinned.fixed_count(), 0);
  for (int k = 0; k < pinned.fixed_count(); ++k) {
    const auto& f = pinned.fixed(k);
    if (f.kind == FixedKind::kBoundary && in_set(b, f.component)) role[k] = 1;
  }
  const double m = solve_pinned(pinned, role).energy;
  if (!(m > 0.0)) throw Error(ErrorCode::kSolverFailure, "boundary sets are not connected");
  return 1.0 / m;
}

double poisson_mass(const GreenOracle& oracle, const ComponentSet& b1, const ComponentSet& b2) {
  const auto& g = oracle.graph();
  check_sets(g, b1, b2);
  const int nf = g.free_count();
  std::vector<double> values(g.fixed_count(), 0.0);
  for (int k = 0; k < g.fixed_count(); ++k)
    if (g.fixed(k).kind == FixedKind::kBoundary && in_set(b2, g.fixed(k).component)) values[k] = 1.0;
  const Eigen::VectorXd h = oracle.harmonic(values);
  double mass = 0.0;
  for (const auto& e : g.edges()) {
    const bool fa = g.is_fixed(e.a), fb = g.is_fixed(e.b);
    const double c = 1.0 / e.resistance;
    auto val = [&](int n) { return g.is_fixed(n) ? values[n - nf] : h[n]; };
    if (fa && g.fixed_node(e.a).kind == FixedKind::kBoundary && in_set(b1, g.fixed_node(e.a).component))
      mass += c * val(e.b);
    if (fb && g.fixed_node(e.b).kind == FixedKind::kBoundary && in_set(b1, g.fixed_node(e.b).component))
      mass += c * val(e.a);
  }
  return mass;
}

double weighted_boundary_average(const GreenOracle& oracle, const ComponentSet& b, const BoundaryData& u) {
  const auto& g = oracle.graph();
  const int nf = g.free_count();
  std::vector<double> values(g.fixed_count(), 0.0);
  bool any = false;
  for (int k = 0; k < g.fixed_count(); ++k)
    if (g.fixed(k).kind == FixedKind::kBoundary && in_set(b, g.fixed(k).component)) {
      values[k] = 1.0;
      any = true;
    }
  if (!any) throw Error(ErrorCode::kEmptySet, "boundary set has no vertices");
  const Eigen::VectorXd h = oracle.harmonic(values);
  double num = 0.0, den = 0.0;
  for (const auto& e : g.edges()) {
    const double c = 1.0 / e.resistance;
    for (int side = 0; side < 2; ++side) {
      const int x = side ? e.b : e.a, y = side ? e.a : e.b;
      if (!g.is_fixed(x) || values[x - nf] != 1.0) continue;
      const double hy = g.is_fixed(y) ? values[y - nf] : h[y];
      const double w = c * (1.0 - hy);
      const int site = g.fixed_node(x).site;
      if (site < 0 || site >= static_cast<int>(u.values.size()))
        throw Error(ErrorCode::kInvalidArgument, "boundary data does not match the domain");
      num += w * u.values[site];
      den += w;
    }
  }
  if (!(den > 0.0)) throw Error(ErrorCode::kEmptySet, "boundary set carries no harmonic measure");
  return num / den;
}

}  // namespace fpslab
