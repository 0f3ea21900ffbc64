#pragma once

// Univariate and bivariate standard normal probabilities.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace ptq {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Inverse of normal_cdf; +-infinity at 0 and 1.
inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace detail {

// Half-sets of Gauss-Legendre abscissae/weights for 6, 12 and 20 points.
struct GaussLegendreHalf {
  int size;
  std::array<double, 10> x;
  std::array<double, 10> w;
};

inline constexpr GaussLegendreHalf kGauss6{
    3,
    {-0.932469514203152, -0.6612093864662645, -0.23861918608319693},
    {0.17132449237916975, 0.36076157304813894, 0.46791393457269137}};
inline constexpr GaussLegendreHalf kGauss12{
    6,
    {-0.9815606342467192, -0.9041172563704748, -0.7699026741943047, -0.5873179542866175,
     -0.3678314989981802, -0.1252334085114689},
    {0.04717533638651202, 0.10693932599531888, 0.1600783285433461, 0.20316742672306565,
     0.23349253653835464, 0.2491470458134027}};
inline constexpr GaussLegendreHalf kGauss20{
    10,
    {-0.9931285991850949, -0.9639719272779138, -0.9122344282513258, -0.8391169718222188,
     -0.7463319064601508, -0.636053680726515, -0.5108670019508271, -0.37370608871541955,
     -0.2277858511416451, -0.07652652113349734},
    {0.01761400713915327, 0.04060142980038622, 0.06267204833410944, 0.08327674157670467,
     0.10193011981724026, 0.11819453196151825, 0.13168863844917653, 0.14209610931838187,
     0.14917298647260366, 0.15275338713072578}};

}  // namespace detail

// P(X > h, Y > k) for a standard bivariate normal with correlation rho.
//
// Drezner-Wesolowsky integration of the Plackett identity in the form given
// by Genz: Gauss-Legendre quadrature over asin(rho) for |rho| < 0.925, and a
// series-corrected integral around rho = +-1 otherwise. Accurate to roughly
// double precision; the rho = +-1 limits are exact.
inline double bvn_upper(double h, double k, double rho) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  rho = std::clamp(rho, -1.0, 1.0);
  if (std::isinf(h) || std::isinf(k)) {
    if (h == std::numeric_limits<double>::infinity() || k == std::numeric_limits<double>::infinity())
      return 0.0;
    if (h == -std::numeric_limits<double>::infinity()) return normal_cdf(-k);
    return normal_cdf(-h);
  }

  const auto& gl = std::abs(rho) < 0.3 ? detail::kGauss6
                   : std::abs(rho) < 0.75 ? detail::kGauss12
                                          : detail::kGauss20;
  double hk = h * k;
  double bvn = 0.0;

  if (std::abs(rho) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(rho);
    for (int i = 0; i < gl.size; ++i) {
      double sn = std::sin(asr * (gl.x[i] + 1.0) / 2.0);
      bvn += gl.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-gl.x[i] + 1.0) / 2.0);
      bvn += gl.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return std::clamp(bvn * asr / (2.0 * two_pi) + normal_cdf(-h) * normal_cdf(-k), 0.0, 1.0);
  }

  if (rho < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(rho) < 1.0) {
    const double as = (1.0 - rho) * (1.0 + rho);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * normal_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (int i = 0; i < gl.size; ++i) {
      double xs = a * (gl.x[i] + 1.0);
      xs *= xs;
      double rs = std::sqrt(1.0 - xs);
      bvn += a * gl.w[i] *
             (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
              std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
      xs = as * (-gl.x[i] + 1.0) * (-gl.x[i] + 1.0) / 4.0;
      rs = std::sqrt(1.0 - xs);
      bvn += a * gl.w[i] * std::exp(-(bs / xs + hk) / 2.0) *
             (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
    }
    bvn = -bvn / two_pi;
  }
  if (rho > 0.0)
    bvn += normal_cdf(-std::max(h, k));
  else
    bvn = -bvn + std::max(0.0, normal_cdf(-h) - normal_cdf(-k));
  return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace ptq
