#pragma once

// Brownian bridge formulas. A bridge of duration T runs from x to y with
// unit diffusion rate.
namespace fpslab::bridge {

double normal_cdf(double z);

/// P(min of the bridge <= level).
double prob_min_below(double x, double y, double T, double level);

/// Bridge minimum by inversion of its exact law from a uniform in (0,1).
double min_from_uniform(double x, double y, double T, double u);

/// P(max <= b | min = m), for m < min(x,y) and b > max(x,y).
double max_cdf_given_min(double x, double y, double T, double m, double b);

/// First hitting time of a barrier, for a bridge starting `alpha` > 0 away
/// from it and ending `beta` away on the same side (beta <= 0 means the end
/// lies across). Conditioned on the barrier being hit.
double hit_time_from_draws(double alpha, double beta, double T, double normal, double uniform);

/// P(hit by time s, and hit at all) for the same configuration.
double hit_time_cdf(double alpha, double beta, double T, double s);

/// P(the bridge stays inside (lo, hi) during [0, s]).
double band_survival(double x, double y, double T, double lo, double hi, double s);

}  // namespace fpslab::bridge
