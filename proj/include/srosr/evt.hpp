#pragma once

// Generalized Pareto tail models (peaks over threshold).
//
//   G(z) = 1 - (1 + xi z / sigma)_+^(-1/xi),   z >= 0,
//
// with the exponential limit 1 - exp(-z / sigma) at xi = 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "srosr/error.hpp"

namespace srosr {

struct GpdModel {
  double sigma = 1.0;
  double xi = 0.0;
  double threshold_u = 0.0;
  double tail_fraction = 1.0;
  std::size_t n_exceedances = 0;

  bool operator==(const GpdModel&) const = default;
};

inline constexpr double kXiZeroBand = 1e-8;
inline constexpr std::size_t kMinExceedances = 20;

/// CDF of the exceedance distribution. Throws ConfigError for z < 0.
inline double gpd_cdf(double sigma, double xi, double z) {
  if (!(z >= 0.0)) throw ConfigError("GPD exceedance must be non-negative");
  if (std::abs(xi) < kXiZeroBand) return -std::expm1(-z / sigma);
  const double t = xi * z / sigma;
  if (t <= -1.0) return 1.0;
  return std::clamp(-std::expm1(-std::log1p(t) / xi), 0.0, 1.0);
}

inline double gpd_cdf(const GpdModel& model, double z) { return gpd_cdf(model.sigma, model.xi, z); }

/// 0 at or below the threshold, otherwise G(raw - u).
inline double tail_probability(const GpdModel& model, double raw_value) {
  if (!(raw_value > model.threshold_u)) return 0.0;
  return gpd_cdf(model, raw_value - model.threshold_u);
}

/// Sum of log GPD densities, or -infinity when an exceedance lies outside the support.
inline double gpd_log_likelihood(double sigma, double xi, std::span<const double> exceedances) {
  if (!(sigma > 0.0)) throw ConfigError("GPD scale must be positive");
  const double n = static_cast<double>(exceedances.size());
  double acc = 0.0;
  if (std::abs(xi) < kXiZeroBand) {
    for (const double z : exceedances) {
      if (z < 0.0) throw DataError("GPD exceedances must be non-negative");
      acc += z;
    }
    return -n * std::log(sigma) - acc / sigma;
  }
  for (const double z : exceedances) {
    if (z < 0.0) throw DataError("GPD exceedances must be non-negative");
    const double t = xi * z / sigma;
    if (t <= -1.0) return -std::numeric_limits<double>::infinity();
    acc += std::log1p(t);
  }
  return -n * std::log(sigma) - (1.0 + 1.0 / xi) * acc;
}

struct GpdFitOptions {
  double xi_min = -0.5;
  double xi_max = 0.5;
  double xi_grid_step = 0.05;
  std::size_t min_exceedances = kMinExceedances;
};

struct GpdFit {
  GpdModel model;
  double log_likelihood = 0.0;
  /// Log-likelihood of the moment-based starting point.
  double initializer_log_likelihood = 0.0;
  /// False when the optimizer failed and the moment estimate was returned instead.
  bool is_mle = true;
};

namespace detail {

struct MomentEstimate {
  double sigma;
  double xi;
};

// Method of moments, xi clamped to the search range and sigma then matched to the mean.
inline MomentEstimate gpd_moments(std::span<const double> z, const GpdFitOptions& opt) {
  const double n = static_cast<double>(z.size());
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / n;
  double var = 0.0;
  for (const double v : z) var += (v - mean) * (v - mean);
  var /= std::max(1.0, n - 1.0);
  const double ratio = mean * mean / var;
  double xi = 0.5 * (1.0 - ratio);
  double sigma = 0.5 * mean * (1.0 + ratio);
  if (xi < opt.xi_min || xi > opt.xi_max) {
    xi = std::clamp(xi, opt.xi_min, opt.xi_max);
    sigma = mean * (1.0 - xi);
  }
  return {sigma, xi};
}

// Maximizes the likelihood over sigma for a fixed xi. The score
//   -n + (1 + xi) sum z / (sigma + xi z)
// is strictly decreasing in sigma on the support, so a bracketed Newton
// iteration finds the unique root.
inline double profile_sigma(std::span<const double> z, double xi, double z_max, double guess) {
  const double n = static_cast<double>(z.size());
  const double lower = xi < 0.0 ? -xi * z_max : 0.0;
  auto score = [&](double s, double& slope) {
    double sum = 0.0, sum2 = 0.0;
    for (const double v : z) {
      const double d = s + xi * v;
      sum += v / d;
      sum2 += v / (d * d);
    }
    slope = -(1.0 + xi) * sum2;
    return -n + (1.0 + xi) * sum;
  };
  double lo = lower;
  double hi = std::max(guess, lower) * 2.0 + z_max;
  double slope = 0.0;
  while (score(hi, slope) > 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  double s = std::clamp(guess, lo, hi);
  if (!(s > lo)) s = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double g = score(s, slope);
    if (g > 0.0) lo = s; else hi = s;
    double next = s - g / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-13 * s) return next;
    s = next;
  }
  return s;
}

}  // namespace detail

/// Maximum likelihood GPD fit to exceedances (already threshold-subtracted).
/// Profiles sigma over a grid in xi, then refines xi by golden-section search
/// around the best grid point.
inline GpdFit fit_gpd_exceedances(std::span<const double> z, const GpdFitOptions& opt = {}) {
  if (z.size() < opt.min_exceedances) {
    throw DataError("GPD fit needs at least " + std::to_string(opt.min_exceedances) + " exceedances, got " +
                    std::to_string(z.size()));
  }
  const auto [zmin_it, zmax_it] = std::minmax_element(z.begin(), z.end());
  const double z_max = *zmax_it;
  if (*zmin_it < 0.0) throw DataError("GPD exceedances must be non-negative");
  if (!(z_max > *zmin_it)) throw DataError("GPD fit on degenerate (constant) exceedances");

  const auto init = detail::gpd_moments(z, opt);
  GpdFit fit;
  fit.initializer_log_likelihood = gpd_log_likelihood(init.sigma, init.xi, z);

  auto profile = [&](double xi, double& sigma) {
    sigma = detail::profile_sigma(z, xi, z_max, sigma);
    return gpd_log_likelihood(sigma, xi, z);
  };

  double best_xi = init.xi;
  double best_sigma = init.sigma;
  double best_ll = -std::numeric_limits<double>::infinity();
  double sigma = init.sigma;
  const int steps = static_cast<int>(std::ceil((opt.xi_max - opt.xi_min) / opt.xi_grid_step - 1e-9));
  for (int i = 0; i <= steps; ++i) {
    const double xi = std::min(opt.xi_min + i * opt.xi_grid_step, opt.xi_max);
    const double ll = profile(xi, sigma);
    if (ll > best_ll) {
      best_ll = ll;
      best_xi = xi;
      best_sigma = sigma;
    }
  }

  // Golden-section refinement of the profile likelihood.
  constexpr double kInvPhi = 0.6180339887498949;
  double a = std::max(opt.xi_min, best_xi - opt.xi_grid_step);
  double b = std::min(opt.xi_max, best_xi + opt.xi_grid_step);
  double s1 = best_sigma, s2 = best_sigma;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = profile(c, s1);
  double fd = profile(d, s2);
  for (int it = 0; it < 60 && b - a > 1e-9; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      s2 = s1;
      c = b - kInvPhi * (b - a);
      fc = profile(c, s1);
    } else {
      a = c;
      c = d;
      fc = fd;
      s1 = s2;
      d = a + kInvPhi * (b - a);
      fd = profile(d, s2);
    }
  }
  const double xi_ref = fc >= fd ? c : d;
  const double ll_ref = std::max(fc, fd);
  if (ll_ref > best_ll) {
    best_ll = ll_ref;
    best_xi = xi_ref;
    best_sigma = fc >= fd ? s1 : s2;
  }

  fit.model.n_exceedances = z.size();
  if (std::isfinite(best_ll) && best_sigma > 0.0 && best_ll >= fit.initializer_log_likelihood) {
    fit.model.sigma = best_sigma;
    fit.model.xi = best_xi;
    fit.log_likelihood = best_ll;
  } else {
    fit.model.sigma = init.sigma;
    fit.model.xi = init.xi;
    fit.log_likelihood = fit.initializer_log_likelihood;
    fit.is_mle = false;
  }
  return fit;
}

/// Lower empirical quantile: the order statistic at 1-based rank ceil(q n), at least 1.
inline double lower_quantile(std::vector<double> sorted_or_not, double q) {
  if (sorted_or_not.empty()) throw DataError("quantile of an empty sample");
  std::sort(sorted_or_not.begin(), sorted_or_not.end());
  const double n = static_cast<double>(sorted_or_not.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted_or_not.size());
  return sorted_or_not[rank - 1];
}

/// Peaks over threshold: u is the lower (1 - rho) quantile of the samples and
/// the GPD is fitted to the strict exceedances s - u, s > u.
inline GpdFit fit_gpd_tail(std::span<const double> samples, double rho, const GpdFitOptions& opt = {}) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("tail fraction rho must lie in (0, 1]");
  for (const double s : samples) {
    if (!std::isfinite(s)) throw DataError("non-finite sample in GPD tail fit");
  }
  const auto n_tail = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(samples.size()) - 1e-9));
  if (n_tail < opt.min_exceedances) {
    throw DataError("tail of " + std::to_string(n_tail) + " samples is below the minimum fit size " +
                    std::to_string(opt.min_exceedances));
  }
  const double u = lower_quantile({samples.begin(), samples.end()}, 1.0 - rho);
  std::vector<double> z;
  z.reserve(n_tail);
  for (const double s : samples) {
    if (s > u) z.push_back(s - u);
  }
  if (z.empty()) throw DataError("GPD fit on degenerate samples (all equal)");
  auto fit = fit_gpd_exceedances(z, opt);
  fit.model.threshold_u = u;
  fit.model.tail_fraction = rho;
  return fit;
}

}  // namespace srosr
