#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2st/rng.hpp"
#include "c2st/sample.hpp"

namespace c2st {

/// Standard normal cdf. erfc keeps full relative precision in the lower tail.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Standard normal upper tail 1 - Phi(x), accurate for large x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Inverse of normal_cdf on (0, 1).
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Halley step against normal_cdf, which brings it to near machine precision.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("normal_quantile: p must lie in (0, 1), got " +
                            std::to_string(p));
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement. In the upper tail work with the survival function so
  // the residual is not swamped by 1 - p cancellation.
  const double residual = (p > 0.5) ? (1.0 - p) - normal_sf(x) : normal_cdf(x) - p;
  const double u = residual / normal_pdf(x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Normal law N(mean, variance); used for the null and alternative
/// approximations of the accuracy statistic.
struct GaussianApprox {
  double mean = 0.0;
  double variance = 1.0;

  GaussianApprox(double m, double v) : mean(m), variance(v) {
    if (!(variance > 0.0) || !std::isfinite(variance)) {
      throw std::domain_error("GaussianApprox: variance must be positive");
    }
  }

  double sd() const { return std::sqrt(variance); }
  double cdf(double x) const { return normal_cdf((x - mean) / sd()); }
  double sf(double x) const { return normal_sf((x - mean) / sd()); }
};

inline Sample sample_normal(Rng& rng, std::size_t n, double mean = 0.0,
                            double sd = 1.0) {
  if (n == 0) throw std::invalid_argument("sample_normal: n must be >= 1");
  if (!(sd > 0.0)) throw std::domain_error("sample_normal: sd must be positive");
  std::vector<double> values(n);
  for (auto& v : values) v = mean + sd * rng.normal();
  return Sample::column(std::move(values));
}

/// Student-t draws as Z / sqrt(V / nu) with V ~ chi-square(nu).
inline Sample sample_student_t(Rng& rng, std::size_t n, double nu) {
  if (n == 0) throw std::invalid_argument("sample_student_t: n must be >= 1");
  if (!(nu > 0.0)) throw std::domain_error("sample_student_t: nu must be positive");
  std::vector<double> values(n);
  for (auto& v : values) {
    const double z = rng.normal();
    const double chi2 = rng.chi_square(nu);
    v = z / std::sqrt(chi2 / nu);
  }
  return Sample::column(std::move(values));
}

/// Per-column shift and scale to empirical mean 0 and population variance 1
/// (divide by n).
inline Sample standardize(const Sample& s) {
  if (s.rows() < 2) throw std::invalid_argument("standardize: need at least 2 rows");
  Sample out = s;
  const auto n = static_cast<double>(s.rows());
  for (std::size_t j = 0; j < s.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i) mean += s(i, j);
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i) {
      const double dv = s(i, j) - mean;
      ss += dv * dv;
    }
    const double var = ss / n;
    if (!(var > 0.0)) {
      throw DegenerateDataError("standardize: column " + std::to_string(j) +
                                " is constant");
    }
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < s.rows(); ++i) out(i, j) = (s(i, j) - mean) / sd;
    // Second pass removes the O(eps) residual mean left by rounding.
    double resid = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i) resid += out(i, j);
    resid /= n;
    for (std::size_t i = 0; i < s.rows(); ++i) out(i, j) -= resid;
  }
  return out;
}

/// Pairs (x, cos(delta * x) + eps) with x ~ N(0,1), eps ~ N(0, gamma^2).
inline Sample sample_sinusoid(Rng& rng, std::size_t n, double delta, double gamma) {
  if (n == 0) throw std::invalid_argument("sample_sinusoid: n must be >= 1");
  if (gamma < 0.0) throw std::domain_error("sample_sinusoid: gamma must be >= 0");
  Sample out(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double noise = gamma > 0.0 ? gamma * rng.normal() : 0.0;
    out(i, 0) = x;
    out(i, 1) = std::cos(delta * x) + noise;
  }
  return out;
}

}  // namespace c2st
