#include "fpslab/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace fpslab::bridge {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double prob_min_below(double x, double y, double T, double level) {
  if (x <= level || y <= level) return 1.0;
  return std::exp(-2.0 * (x - level) * (y - level) / T);
}

double min_from_uniform(double x, double y, double T, double u) {
  // P(min < m) = exp(-2 (x-m)(y-m) / T); solve the quadratic for m.
  const double c = -T * std::log(u) / 2.0;
  const double d = x - y;
  return 0.5 * ((x + y) - std::sqrt(d * d + 4.0 * c));
}

double max_cdf_given_min(double x, double y, double T, double m, double b) {
  const double b0 = x + y - 2.0 * m;
  const double w = b - m;
  auto ratio = [&](double z) { return z * std::exp((b0 * b0 - z * z) / (2.0 * T)); };
  double sum = b0;
  for (int k = 1; k < 200; ++k) {
    const double ap = y - x + 2.0 * k * w, an = y - x - 2.0 * k * w;
    const double bp = b0 + 2.0 * k * w, bn = b0 - 2.0 * k * w;
    const double term = -k * ratio(ap) + (1.0 + k) * ratio(bp) + k * ratio(an) + (1.0 - k) * ratio(bn);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum) && k > 2) break;
  }
  return std::clamp(sum / b0, 0.0, 1.0);
}

double hit_time_from_draws(double alpha, double beta, double T, double normal, double uniform) {
  // With w = tau T / (T - tau), w is inverse Gaussian with mean alpha T / |beta|
  // and shape alpha^2 (Levy when beta = 0).
  const double lambda = alpha * alpha;
  const double y = normal * normal;
  double w;
  if (beta == 0.0) {
    w = y > 0.0 ? lambda / y : std::numeric_limits<double>::infinity();
  } else {
    const double mu = alpha * T / std::abs(beta);
    const double a = mu * y / (2.0 * lambda);
    const double x = mu / (1.0 + a + std::sqrt(a * a + 2.0 * a));
    w = uniform <= mu / (mu + x) ? x : mu * mu / x;
  }
  if (!std::isfinite(w)) return T;
  return w * T / (T + w);
}

double hit_time_cdf(double alpha, double beta, double T, double s) {
  if (s <= 0.0) return 0.0;
  if (s >= T) return prob_min_below(alpha, beta, T, 0.0);
  const double r = T - s;
  const double v = s * r / T;
  const double sd = std::sqrt(v);
  const double mu1 = (-alpha * r + beta * s) / T;
  const double mu2 = (alpha * r + beta * s) / T;
  const double p1 = normal_cdf(mu1 / sd);
  const double lp1 = p1 > 0.0 ? std::log(p1) : -std::numeric_limits<double>::infinity();
  return normal_cdf(-mu2 / sd) + std::exp(-2.0 * alpha * beta / T + lp1);
}

double band_survival(double x, double y, double T, double lo, double hi, double s) {
  if (x <= lo || x >= hi) return 0.0;
  if (s <= 0.0) return 1.0;
  const bool at_end = s >= T;
  if (at_end && (y <= lo || y >= hi)) return 0.0;
  const double w = hi - lo;
  const double r = T - s;
  const double v = at_end ? 0.0 : s * r / T;
  const double d0 = y - x;
  double sum = 0.0;
  auto image = [&](double c, double sign) {
    const double e = (d0 * d0 - (y - c) * (y - c)) / (2.0 * T);
    if (e < -745.0) return 0.0;
    double mass;
    if (at_end) {
      mass = 1.0;
    } else {
      const double mu = (c * r + y * s) / T;
      const double sd = std::sqrt(v);
      mass = normal_cdf((hi - mu) / sd) - normal_cdf((lo - mu) / sd);
    }
    return sign * std::exp(e) * mass;
  };
  for (int k = 0; k < 200; ++k) {
    double term = image(x - 2.0 * k * w, 1.0) - image(2.0 * lo - x - 2.0 * k * w, 1.0);
    if (k > 0) term += image(x + 2.0 * k * w, 1.0) - image(2.0 * lo - x + 2.0 * k * w, 1.0);
    sum += term;
    if (k > 2 && std::abs(term) < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace fpslab::bridge
