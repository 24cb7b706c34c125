#include "fpslab/cable_graph.hpp"

#include <numeric>

#include "fpslab/error.hpp"

namespace fpslab {

CableGraph::CableGraph(std::vector<int> free_site, std::vector<FixedNode> fixed, std::vector<CableEdge> edges)
    : free_site_(std::move(free_site)), fixed_(std::move(fixed)), edges_(std::move(edges)) {
  const int n = node_count();
  offset_.assign(n + 1, 0);
  for (const auto& e : edges_) {
    if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n || e.a == e.b || !(e.resistance > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "malformed cable");
    ++offset_[e.a + 1];
    ++offset_[e.b + 1];
  }
  std::partial_sum(offset_.begin(), offset_.end(), offset_.begin());
  adj_.resize(offset_[n]);
  std::vector<int> fill(offset_.begin(), offset_.end() - 1);
  for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
    adj_[fill[edges_[e].a]++] = e;
    adj_[fill[edges_[e].b]++] = e;
  }
}

Eigen::SparseMatrix<double> CableGraph::laplacian() const {
  const int n = free_count();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(edges_.size() * 4);
  std::vector<double> diag(n, 0.0);
  for (const auto& e : edges_) {
    const double c = 1.0 / e.resistance;
    const bool fa = is_fixed(e.a), fb = is_fixed(e.b);
    if (!fa) diag[e.a] += c;
    if (!fb) diag[e.b] += c;
    if (!fa && !fb) {
      t.emplace_back(e.a, e.b, -c);
      t.emplace_back(e.b, e.a, -c);
    }
  }
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, diag[i]);
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

Eigen::VectorXd CableGraph::dirichlet_rhs(std::span<const double> fixed_values) const {
  if (static_cast<int>(fixed_values.size()) != fixed_count())
    throw Error(ErrorCode::kInvalidArgument, "fixed value count mismatch");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(free_count());
  for (const auto& e : edges_) {
    const bool fa = is_fixed(e.a), fb = is_fixed(e.b);
    if (fa == fb) continue;
    const double c = 1.0 / e.resistance;
    if (fa)
      rhs[e.b] += c * fixed_values[e.a - free_count()];
    else
      rhs[e.a] += c * fixed_values[e.b - free_count()];
  }
  return rhs;
}

std::vector<double> CableGraph::fixed_values() const {
  std::vector<double> v(fixed_.size());
  for (std::size_t k = 0; k < fixed_.size(); ++k) v[k] = fixed_[k].value;
  return v;
}

CableGraph::Components CableGraph::free_components() const {
  Components out;
  out.label.assign(free_count(), -1);
  std::vector<int> stack;
  for (int s = 0; s < free_count(); ++s) {
    if (out.label[s] >= 0) continue;
    out.label[s] = out.count;
    stack.push_back(s);
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      for (int e : incident(x)) {
        const int y = other_end(e, x);
        if (is_fixed(y) || out.label[y] >= 0) continue;
        out.label[y] = out.count;
        stack.push_back(y);
      }
    }
    ++out.count;
  }
  return out;
}

CableGraph CableGraph::restrict_to(std::span<const std::uint8_t> keep) const {
  std::vector<int> free_map(free_count(), -1), fixed_map(fixed_count(), -1);
  std::vector<int> sites;
  for (int i = 0; i < free_count(); ++i)
    if (keep[i]) {
      free_map[i] = static_cast<int>(sites.size());
      sites.push_back(free_site_[i]);
    }
  const int nf = static_cast<int>(sites.size());
  std::vector<FixedNode> fixed;
  std::vector<CableEdge> edges;
  auto map_node = [&](int node) {
    if (!is_fixed(node)) return free_map[node];
    int& m = fixed_map[node - free_count()];
    if (m < 0) {
      m = static_cast<int>(fixed.size());
      fixed.push_back(fixed_[node - free_count()]);
    }
    return nf + m;
  };
  for (const auto& e : edges_) {
    const bool ka = !is_fixed(e.a) && keep[e.a];
    const bool kb = !is_fixed(e.b) && keep[e.b];
    if (!ka && !kb) continue;
    if ((!ka && !is_fixed(e.a)) || (!kb && !is_fixed(e.b)))
      throw Error(ErrorCode::kInvalidArgument, "restriction must be a union of free components");
    edges.push_back({map_node(e.a), map_node(e.b), e.resistance, e.key});
  }
  return CableGraph(std::move(sites), std::move(fixed), std::move(edges));
}

CableGraph CableGraph::pin_free(std::span<const std::uint8_t> mask, double value) const {
  const int nf = free_count();
  std::vector<int> map(nf, -1), sites;
  for (int i = 0; i < nf; ++i)
    if (!mask[i]) {
      map[i] = static_cast<int>(sites.size());
      sites.push_back(free_site_[i]);
    }
  const int nf2 = static_cast<int>(sites.size());
  std::vector<FixedNode> fixed = fixed_;
  for (int i = 0; i < nf; ++i)
    if (mask[i]) {
      map[i] = nf2 + static_cast<int>(fixed.size());
      fixed.push_back(FixedNode{value, FixedKind::kSet, -1, free_site_[i]});
    }
  auto node = [&](int n) { return is_fixed(n) ? nf2 + (n - nf) : map[n]; };
  std::vector<CableEdge> edges;
  for (const auto& e : edges_) {
    const int a = node(e.a), b = node(e.b);
    if (a >= nf2 && b >= nf2) continue;
    edges.push_back({a, b, e.resistance, e.key});
  }
  return CableGraph(std::move(sites), std::move(fixed), std::move(edges));
}

}  // namespace fpslab
