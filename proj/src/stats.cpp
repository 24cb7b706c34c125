#include "fpslab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "fpslab/bridge.hpp"
#include "fpslab/error.hpp"
#include "fpslab/rng.hpp"

namespace fpslab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Marsaglia, Tsang & Wang (2003), P(D_n < d).
double mtw_cdf(int n, double d) {
  const int k = static_cast<int>(n * d) + 1;
  const int m = 2 * k - 1;
  const double h = k - n * d;
  Eigen::MatrixXd H(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) H(i, j) = (i - j + 1 < 0) ? 0.0 : 1.0;
  for (int i = 0; i < m; ++i) {
    H(i, 0) -= std::pow(h, i + 1);
    H(m - 1, i) -= std::pow(h, m - i);
  }
  H(m - 1, 0) += (2 * h - 1 > 0) ? std::pow(2 * h - 1, m) : 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i - j + 1 > 0)
        for (int g = 1; g <= i - j + 1; ++g) H(i, j) /= g;
  // Power with scaling to avoid overflow.
  int e_total = 0;
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd base = H;
  int e_base = 0;
  int p = n;
  while (p > 0) {
    if (p & 1) {
      result = result * base;
      e_total += e_base;
      const double c = result(k - 1, k - 1);
      if (c > 1e140) {
        result *= 1e-140;
        e_total += 140;
      }
    }
    p >>= 1;
    if (p > 0) {
      base = base * base;
      e_base *= 2;
      if (base(k - 1, k - 1) > 1e140) {
        base *= 1e-140;
        e_base += 140;
      }
    }
  }
  double s = result(k - 1, k - 1);
  for (int i = 1; i <= n; ++i) {
    s = s * i / n;
    if (s < 1e-140) {
      s *= 1e140;
      e_total -= 140;
    }
  }
  return s * std::pow(10.0, e_total);
}

double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;
  double s = 0.0;
  for (int j = 1; j < 100; ++j) {
    const double t = 2.0 * ((j & 1) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * x * x);
    s += t;
    if (std::abs(t) < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace

double kolmogorov_pvalue(int n, double d) {
  if (d <= 0.0) return 1.0;
  if (d >= 1.0) return 0.0;
  if (n <= 500 && n * d * n * d < 18.0 * n) {
    const double p = 1.0 - mtw_cdf(n, d);
    if (p >= 0.0 && p <= 1.0) return p;
  }
  const double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
}

nlohmann::json ReferenceLaw::describe() const {
  nlohmann::json j = params;
  j["kind"] = kind;
  if (!draws.empty()) j["reference_draws"] = draws.size();
  return j;
}

ReferenceLaw levy_hitting(double distance) {
  if (!(distance > 0.0)) throw Error(ErrorCode::kInvalidArgument, "hitting distance must be positive");
  ReferenceLaw law;
  law.kind = "LevyHitting";
  law.params = {{"distance", distance}};
  law.cdf = [distance](double t) { return t <= 0.0 ? 0.0 : std::erfc(distance / std::sqrt(2.0 * t)); };
  return law;
}

ReferenceLaw levy_hitting_truncated(double distance, double lifetime) {
  auto base = levy_hitting(distance);
  const double norm = base.cdf(lifetime);
  ReferenceLaw law;
  law.kind = "LevyHittingTruncated";
  law.params = {{"distance", distance}, {"lifetime", lifetime}};
  law.cdf = [f = base.cdf, norm, lifetime](double t) { return t >= lifetime ? 1.0 : f(t) / norm; };
  return law;
}

ReferenceLaw levy_hitting_censored(double distance, double horizon) {
  auto base = levy_hitting(distance);
  const double at_horizon = base.cdf(horizon);
  ReferenceLaw law;
  law.kind = "LevyHittingCensored";
  law.params = {{"distance", distance}, {"horizon", horizon}};
  law.cdf = [f = base.cdf, at_horizon, horizon](double t) {
    if (t == kInf) return 1.0;
    return t < horizon ? f(t) : at_horizon;
  };
  return law;
}

ReferenceLaw bridge_hitting(double start, double end, double length, double lo, double hi) {
  ReferenceLaw law;
  law.kind = "BridgeHitting";
  law.params = {{"start", start}, {"end", end}, {"length", length}, {"lo", lo}};
  if (std::isfinite(hi)) law.params["hi"] = hi;
  law.cdf = [=](double t) {
    if (t <= 0.0) return 0.0;
    if (t >= length) return 1.0 - bridge::band_survival(start, end, length, lo, hi, length);
    return 1.0 - bridge::band_survival(start, end, length, lo, std::isfinite(hi) ? hi : 1e300, t);
  };
  if (!std::isfinite(hi)) {
    law.cdf = [=](double t) {
      if (t <= 0.0) return 0.0;
      if (start <= lo) return 1.0;
      return bridge::hit_time_cdf(start - lo, end - lo, length, std::min(t, length));
    };
  }
  return law;
}

ReferenceLaw empirical_law(std::string kind, nlohmann::json params, std::vector<double> draws) {
  ReferenceLaw law;
  law.kind = std::move(kind);
  law.params = std::move(params);
  std::sort(draws.begin(), draws.end());
  law.draws = std::move(draws);
  return law;
}

KsResult ks_one_sample(std::span<const double> values, const std::function<double(double)>& cdf, double significance) {
  const int n = static_cast<int>(values.size());
  if (n < 100) throw Error(ErrorCode::kTooFewSamples, "KS test needs at least 100 samples, got " + std::to_string(n));
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  // Ties are taken as one block so atoms (censoring at +inf) are compared
  // against the left limit of the cdf.
  double d = 0.0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j < n && x[j] == x[i]) ++j;
    const double f = cdf(x[i]);
    const double f_left = x[i] == kInf ? cdf(std::numeric_limits<double>::max()) : f;
    d = std::max({d, static_cast<double>(j) / n - f, f_left - static_cast<double>(i) / n});
    i = j;
  }
  KsResult r;
  r.n = n;
  r.statistic = d;
  r.p_value = kolmogorov_pvalue(n, d);
  r.reject = r.p_value < significance;
  return r;
}

KsResult ks_two_sample(std::span<const double> xs, std::span<const double> ys, double significance) {
  const int n = static_cast<int>(xs.size()), m = static_cast<int>(ys.size());
  if (n < 100 || m < 100) throw Error(ErrorCode::kTooFewSamples, "two-sample KS needs at least 100 samples per side");
  std::vector<double> x(xs.begin(), xs.end()), y(ys.begin(), ys.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double d = 0.0;
  int i = 0, j = 0;
  while (i < n && j < m) {
    const double v = std::min(x[i], y[j]);
    while (i < n && x[i] <= v) ++i;
    while (j < m && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.n = n;
  r.statistic = d;
  const double ne = static_cast<double>(n) * m / (n + m);
  const double sn = std::sqrt(ne);
  r.p_value = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
  r.reject = r.p_value < significance;
  return r;
}

KsResult ks_test(std::span<const double> values, const ReferenceLaw& law, double significance) {
  if (law.cdf) return ks_one_sample(values, law.cdf, significance);
  if (law.draws.empty()) throw Error(ErrorCode::kInvalidArgument, "reference law has neither cdf nor draws");
  return ks_two_sample(values, law.draws, significance);
}

std::vector<double> simulate_bridge_exit_grid(double start, double end, double length, double lo, double hi,
                                              int paths, int steps, std::uint64_t seed) {
  std::vector<double> out(paths);
  const double dt = length / steps;
  for (int p = 0; p < paths; ++p) {
    Stream s(seed, static_cast<std::uint64_t>(p));
    double x = start;
    double t = 0.0;
    double hit = kInf;
    if (x <= lo || x >= hi) hit = 0.0;
    for (int k = 0; k < steps && !std::isfinite(hit); ++k) {
      const double rem = length - t;
      // Forward step of the bridge: mean pulls toward the endpoint.
      double y;
      if (k + 1 == steps) {
        y = end;
      } else {
        const double mean = x + (end - x) * dt / rem;
        const double var = dt * (rem - dt) / rem;
        y = mean + std::sqrt(var) * s.normal();
      }
      const double p_lo = bridge::prob_min_below(x, y, dt, lo);
      const double p_hi = std::isfinite(hi) ? bridge::prob_min_below(-x, -y, dt, -hi) : 0.0;
      const double u = s.uniform();
      const double n1 = s.normal(), u1 = s.uniform();
      // Crossing of either barrier within the step; the two events are
      // treated as disjoint, which is exact as dt -> 0.
      if (u < p_lo) {
        hit = t + (x <= lo ? 0.0 : bridge::hit_time_from_draws(x - lo, y - lo, dt, n1, u1));
      } else if (u < p_lo + p_hi) {
        hit = t + (x >= hi ? 0.0 : bridge::hit_time_from_draws(hi - x, hi - y, dt, n1, u1));
      }
      x = y;
      t += dt;
    }
    out[p] = std::isfinite(hit) ? hit : length;
  }
  return out;
}

namespace {

// Depth-first midpoint refinement of one interval; refines only where a
// barrier is within six local standard deviations of an endpoint.
struct DyadicRefiner {
  double lo, hi;
  int max_level;
  Stream* s;

  bool near(double x, double sd) const { return x - lo < 6.0 * sd || hi - x < 6.0 * sd; }

  double first_exit(double t0, double x0, double t1, double x1, int level) {
    const double dt = t1 - t0;
    const double sd = std::sqrt(dt);
    if (!near(x0, sd) && !near(x1, sd)) return kInf;
    if (level == max_level) {
      const double shift = 0.5826 * sd;
      return (x1 <= lo + shift || x1 >= hi - shift) ? t1 : kInf;
    }
    const double tm = 0.5 * (t0 + t1);
    const double xm = 0.5 * (x0 + x1) + 0.5 * sd * s->normal();
    const double left = first_exit(t0, x0, tm, xm, level + 1);
    if (std::isfinite(left)) return left;
    return first_exit(tm, xm, t1, x1, level + 1);
  }
};

}  // namespace

std::vector<double> simulate_bridge_exit_dyadic(double start, double end, double length, double lo, double hi,
                                                int paths, int depth, std::uint64_t seed) {
  const int n = 1 << depth;
  const double dt = length / n;
  std::vector<double> out(paths);
  std::vector<double> w(n + 1);
  for (int p = 0; p < paths; ++p) {
    Stream s(seed, static_cast<std::uint64_t>(p));
    w[0] = start;
    w[n] = end;
    for (int level = 0; level < depth; ++level) {
      const int stride = n >> level;
      const int half = stride / 2;
      const double sd = std::sqrt(half * dt / 2.0);
      for (int i = 0; i < n; i += stride) w[i + half] = 0.5 * (w[i] + w[i + stride]) + sd * s.normal();
    }
    DyadicRefiner r{lo, hi, 24, &s};
    double hit = length;
    if (start <= lo || start >= hi) hit = 0.0;
    for (int i = 0; i < n && hit == length; ++i) {
      const double h = r.first_exit(i * dt, w[i], (i + 1) * dt, w[i + 1], 0);
      if (std::isfinite(h)) hit = h;
    }
    out[p] = hit;
  }
  return out;
}

std::vector<double> simulate_walk_hitting(double distance, int k, double horizon, int paths, std::uint64_t seed) {
  const double step = distance / k;
  const double dt = step * step;
  const long long max_steps = static_cast<long long>(horizon / dt);
  std::vector<double> out(paths);
  for (int p = 0; p < paths; ++p) {
    Stream s(seed, static_cast<std::uint64_t>(p));
    long long pos = 0;
    double hit = kInf;
    std::uint64_t bits = 0;
    int avail = 0;
    for (long long i = 1; i <= max_steps; ++i) {
      if (avail == 0) {
        bits = static_cast<std::uint64_t>(s.uniform() * 0x1.0p52);
        avail = 52;
      }
      pos += (bits & 1) ? 1 : -1;
      bits >>= 1;
      --avail;
      if (pos <= -k) {
        hit = i * dt;
        break;
      }
    }
    out[p] = hit;
  }
  return out;
}

MeanSe mean_se(std::span<const double> x) {
  MeanSe r;
  const double n = static_cast<double>(x.size());
  if (x.empty()) return r;
  for (double v : x) r.mean += v / n;
  double ss = 0.0;
  for (double v : x) ss += (v - r.mean) * (v - r.mean);
  r.sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  r.se = r.sd / std::sqrt(n);
  return r;
}

}  // namespace fpslab
