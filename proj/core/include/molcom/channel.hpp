#pragma once

#include <cstddef>
#include <vector>

namespace molcom {

// Physical description of the diffusion channel. Any consistent length unit
// works; the defaults below are in mm and mm^2/s.
struct ChannelParams {
  double receiver_radius = 1.0;  // r, radius of the spherical receiver
  double distance = 4.0;         // d, transmitter-receiver distance, d > r
  double diffusion_coeff = 30.0; // D, length^2 / time

  void validate() const;
};

// Correction exponents fitted on top of the closed-form arrival model.
struct FitParams {
  double b1 = 1.0;
  double b2 = 1.0;
  double b3 = 1.0;
};

// Mean arrival fractions observed at increasing time instants.
struct ObservedSeries {
  std::vector<double> times;   // strictly increasing, > 0, seconds
  std::vector<double> values;  // fractions in [0, 1]

  std::size_t size() const { return times.size(); }
  void validate() const;
};

struct FitOptions {
  int restarts = 4;             // perturbed restarts after the (1,1,1) run
  int max_evaluations = 10000;  // objective budget per run
  double diameter_tol = 1e-8;   // simplex diameter convergence threshold
};

struct FitResult {
  FitParams params;
  double residual = 0.0;  // sum of squared errors at the optimum
  int evaluations = 0;
};

// Complementary error function, 1 - erf(z). Rational approximation with
// absolute error below 1.2e-7; satisfies erfc(-z) == 2 - erfc(z) exactly.
double erfc(double z);

// Fraction of released molecules absorbed by the receiver up to time t:
//   F(t) = r/(d+r) * erfc(d / sqrt(4 D t)),  t > 0.
double arrival_fraction(const ChannelParams& ch, double t);

// Parametrized variant used for data fitting:
//   F(t, b) = b1 * r/(d+r) * erfc(d / sqrt((4D)^b2 * t^b3)).
double arrival_fraction_fitted(const ChannelParams& ch, const FitParams& fit, double t);

// Least-squares fit of (b1, b2, b3) to an observed series, Nelder-Mead
// started at (1,1,1) with perturbed restarts.
FitResult fit_channel(const ChannelParams& ch, const ObservedSeries& obs,
                      const FitOptions& opts = {});

// First-arrival (hitting) time density of a molecule at the absorbing
// receiver:
//   h(t) = r (d-r) / (d sqrt(4 pi D t^3)) * exp(-(d-r)^2 / (4 D t)).
// Integrates to r/d over (0, inf); peaks at t = (d-r)^2 / (6 D).
double hitting_density(const ChannelParams& ch, double t);

// Time of the density maximum, (d-r)^2 / (6 D).
double hitting_peak_time(const ChannelParams& ch);

// Least-squares objective behind fit_channel, exposed for diagnostics and
// for oracle comparisons.
double fit_objective(const ChannelParams& ch, const ObservedSeries& obs, const FitParams& fit);

}  // namespace molcom
