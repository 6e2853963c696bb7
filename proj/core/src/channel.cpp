#include "molcom/channel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace molcom {

void ChannelParams::validate() const {
  if (!(receiver_radius > 0.0) || !std::isfinite(receiver_radius))
    throw std::domain_error("channel: receiver radius must be positive");
  if (!(distance > receiver_radius) || !std::isfinite(distance))
    throw std::domain_error("channel: distance must exceed receiver radius");
  if (!(diffusion_coeff > 0.0) || !std::isfinite(diffusion_coeff))
    throw std::domain_error("channel: diffusion coefficient must be positive");
}

void ObservedSeries::validate() const {
  if (times.size() != values.size())
    throw std::invalid_argument("observed series: times/values length mismatch");
  if (times.size() < 3)
    throw std::invalid_argument("observed series: need at least 3 points");
  double prev = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > prev) || !std::isfinite(times[i]))
      throw std::invalid_argument("observed series: times must be strictly increasing and positive");
    if (!std::isfinite(values[i]))
      throw std::invalid_argument("observed series: values must be finite");
    prev = times[i];
  }
}

double erfc(double z) {
  if (!std::isfinite(z)) throw std::domain_error("erfc: non-finite input");
  const double x = std::fabs(z);
  const double t = 1.0 / (1.0 + 0.5 * x);
  // Chebyshev-fitted rational approximation, |abs error| < 1.2e-7.
  const double ans =
      t * std::exp(-x * x - 1.26551223 +
                   t * (1.00002368 +
                        t * (0.37409196 +
                             t * (0.09678418 +
                                  t * (-0.18628806 +
                                       t * (0.27886807 +
                                            t * (-1.13520398 +
                                                 t * (1.48851587 +
                                                      t * (-0.82215223 + t * 0.17087277)))))))));
  return z >= 0.0 ? ans : 2.0 - ans;
}

double arrival_fraction(const ChannelParams& ch, double t) {
  ch.validate();
  if (!(t > 0.0) || !std::isfinite(t))
    throw std::domain_error("arrival_fraction: t must be positive");
  const double r = ch.receiver_radius, d = ch.distance, D = ch.diffusion_coeff;
  return r / (d + r) * erfc(d / std::sqrt(4.0 * D * t));
}

double arrival_fraction_fitted(const ChannelParams& ch, const FitParams& fit, double t) {
  ch.validate();
  if (!(t > 0.0) || !std::isfinite(t))
    throw std::domain_error("arrival_fraction_fitted: t must be positive");
  const double r = ch.receiver_radius, d = ch.distance, D = ch.diffusion_coeff;
  // Identity parameters take the plain code path so the two functions agree
  // bit for bit.
  if (fit.b1 == 1.0 && fit.b2 == 1.0 && fit.b3 == 1.0) return arrival_fraction(ch, t);
  const double radicand = std::pow(4.0 * D, fit.b2) * std::pow(t, fit.b3);
  if (!(radicand > 0.0) || !std::isfinite(radicand))
    throw std::domain_error("arrival_fraction_fitted: nonpositive or overflowing radicand");
  return fit.b1 * r / (d + r) * erfc(d / std::sqrt(radicand));
}

double hitting_peak_time(const ChannelParams& ch) {
  ch.validate();
  const double gap = ch.distance - ch.receiver_radius;
  return gap * gap / (6.0 * ch.diffusion_coeff);
}

double hitting_density(const ChannelParams& ch, double t) {
  ch.validate();
  if (!(t > 0.0) || !std::isfinite(t))
    throw std::domain_error("hitting_density: t must be positive");
  const double r = ch.receiver_radius, d = ch.distance, D = ch.diffusion_coeff;
  const double gap = d - r;
  const double decay = gap * gap / (4.0 * D * t);
  // The exponential underflows long before 1/sqrt(t^3) can overflow.
  if (decay > 700.0) return 0.0;
  return r * gap / (d * std::sqrt(4.0 * M_PI * D * t * t * t)) * std::exp(-decay);
}

double fit_objective(const ChannelParams& ch, const ObservedSeries& obs, const FitParams& fit) {
  double sse = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    double f;
    try {
      f = arrival_fraction_fitted(ch, fit, obs.times[k]);
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::infinity();
    }
    const double e = f - obs.values[k];
    sse += e * e;
  }
  return std::isfinite(sse) ? sse : std::numeric_limits<double>::infinity();
}

namespace {

using Vec3 = std::array<double, 3>;

struct SimplexResult {
  Vec3 x;
  double f;
  int evaluations;
};

double simplex_diameter(const std::array<Vec3, 4>& xs) {
  double diam = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double d = xs[i][k] - xs[j][k];
        d2 += d * d;
      }
      diam = std::max(diam, std::sqrt(d2));
    }
  return diam;
}

template <typename F>
SimplexResult nelder_mead(F&& f, const Vec3& start, double step, double diameter_tol,
                          int max_evals) {
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  std::array<Vec3, 4> xs;
  std::array<double, 4> fs;
  int evals = 0;
  auto eval = [&](const Vec3& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  xs[0] = start;
  for (int i = 1; i < 4; ++i) {
    xs[i] = start;
    xs[i][i - 1] += step;
  }
  for (int i = 0; i < 4; ++i) fs[i] = eval(xs[i]);

  auto order = [&] {
    for (int i = 1; i < 4; ++i) {  // insertion sort, ascending f
      Vec3 x = xs[i];
      double v = fs[i];
      int j = i - 1;
      while (j >= 0 && fs[j] > v) {
        xs[j + 1] = xs[j];
        fs[j + 1] = fs[j];
        --j;
      }
      xs[j + 1] = x;
      fs[j + 1] = v;
    }
  };

  order();
  while (evals < max_evals && simplex_diameter(xs) >= diameter_tol) {
    Vec3 centroid{};
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) centroid[k] += xs[i][k] / 3.0;

    Vec3 reflected;
    for (int k = 0; k < 3; ++k) reflected[k] = centroid[k] + kReflect * (centroid[k] - xs[3][k]);
    const double fr = eval(reflected);

    if (fr < fs[0]) {
      Vec3 expanded;
      for (int k = 0; k < 3; ++k) expanded[k] = centroid[k] + kExpand * (reflected[k] - centroid[k]);
      const double fe = eval(expanded);
      if (fe < fr) {
        xs[3] = expanded;
        fs[3] = fe;
      } else {
        xs[3] = reflected;
        fs[3] = fr;
      }
    } else if (fr < fs[2]) {
      xs[3] = reflected;
      fs[3] = fr;
    } else {
      const bool outside = fr < fs[3];
      Vec3 contracted;
      const Vec3& base = outside ? reflected : xs[3];
      for (int k = 0; k < 3; ++k) contracted[k] = centroid[k] + kContract * (base[k] - centroid[k]);
      const double fc = eval(contracted);
      if (fc < (outside ? fr : fs[3])) {
        xs[3] = contracted;
        fs[3] = fc;
      } else {
        for (int i = 1; i < 4; ++i) {
          for (int k = 0; k < 3; ++k) xs[i][k] = xs[0][k] + kShrink * (xs[i][k] - xs[0][k]);
          fs[i] = eval(xs[i]);
        }
      }
    }
    order();
  }
  return {xs[0], fs[0], evals};
}

}  // namespace

FitResult fit_channel(const ChannelParams& ch, const ObservedSeries& obs, const FitOptions& opts) {
  ch.validate();
  obs.validate();

  auto objective = [&](const Vec3& x) {
    return fit_objective(ch, obs, FitParams{x[0], x[1], x[2]});
  };

  // Fixed perturbations keep the restarts deterministic.
  static constexpr std::array<Vec3, 4> kOffsets{{
      {0.15, -0.10, 0.10},
      {-0.10, 0.15, -0.10},
      {0.10, 0.10, 0.15},
      {-0.15, -0.15, -0.05},
  }};

  FitResult best;
  best.residual = std::numeric_limits<double>::infinity();
  int total_evals = 0;

  Vec3 start{1.0, 1.0, 1.0};
  for (int run = 0; run <= opts.restarts; ++run) {
    Vec3 x0 = start;
    if (run > 0) {
      // restart around the best point found so far
      const Vec3& off = kOffsets[(run - 1) % kOffsets.size()];
      x0 = {best.params.b1 + off[0], best.params.b2 + off[1], best.params.b3 + off[2]};
    }
    const SimplexResult r =
        nelder_mead(objective, x0, 0.1, opts.diameter_tol, opts.max_evaluations);
    total_evals += r.evaluations;
    if (r.f < best.residual) {
      best.params = FitParams{r.x[0], r.x[1], r.x[2]};
      best.residual = r.f;
    }
  }
  best.evaluations = total_evals;

  if (!std::isfinite(best.residual))
    throw std::runtime_error("fit_channel: objective non-finite at every probe");
  return best;
}

}  // namespace molcom
