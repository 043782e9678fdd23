#include "hdpca/limit_dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "hdpca/errors.hpp"

namespace hdpca {

namespace {

constexpr double kEpsilon = 1e-16;
constexpr int kMaxTerms = 200000;
constexpr double kTiny = 1e-300;

// exp(a ln x - x - lgamma(a)), the common prefactor of both expansions.
double gamma_prefactor(double a, double x) { return std::exp(a * std::log(x) - x - std::lgamma(a)); }

double lower_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int k = 1; k < kMaxTerms; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEpsilon) return sum * gamma_prefactor(a, x);
  }
  throw NumericError("incomplete gamma series did not converge");
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double upper_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEpsilon) return h * gamma_prefactor(a, x);
  }
  throw NumericError("incomplete gamma continued fraction did not converge");
}

void check_gamma_args(double a, double x) {
  if (!(a > 0.0)) throw DomainError("incomplete gamma requires a > 0");
  if (!(x >= 0.0)) throw DomainError("incomplete gamma requires x >= 0");
}

void check_dof(int n) {
  if (n < 1) throw DomainError("degrees of freedom must be >= 1");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return lower_series(a, x);
  return 1.0 - upper_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - lower_series(a, x);
  return upper_fraction(a, x);
}

double chi_square_cdf(double x, int n) {
  check_dof(n);
  if (!(x >= 0.0)) throw DomainError("chi-square CDF requires x >= 0");
  return regularized_gamma_p(0.5 * n, 0.5 * x);
}

double chi_square_pdf(double x, int n) {
  check_dof(n);
  if (!(x >= 0.0)) throw DomainError("chi-square density requires x >= 0");
  const double half = 0.5 * n;
  if (x == 0.0) {
    if (n == 1) return std::numeric_limits<double>::infinity();
    return n == 2 ? 0.5 : 0.0;
  }
  return std::exp((half - 1.0) * std::log(x) - 0.5 * x - half * std::numbers::ln2 - std::lgamma(half));
}

RLaw::RLaw(int degrees_of_freedom) : n_(degrees_of_freedom) { check_dof(n_); }

double r_cdf(double r, const RLaw& law) {
  if (!(r > 0.0)) throw DomainError("r_cdf requires r > 0");
  const double n = law.degrees_of_freedom();
  if (std::isinf(r)) return 1.0;
  // R <= r  <=>  chi2_n >= n / r^2
  return regularized_gamma_q(0.5 * n, 0.5 * n / (r * r));
}

double r_survival(double r, const RLaw& law) {
  if (!(r > 0.0)) throw DomainError("r_survival requires r > 0");
  const double n = law.degrees_of_freedom();
  if (std::isinf(r)) return 0.0;
  return regularized_gamma_p(0.5 * n, 0.5 * n / (r * r));
}

double r_quantile(double p, const RLaw& law) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("r_quantile requires 0 < p < 1");
  // Above the median compare upper tails; 1 - p is exact there.
  const bool upper = p > 0.5;
  const double q = 1.0 - p;
  const auto below = [&](double r) { return upper ? r_survival(r, law) > q : r_cdf(r, law) < p; };
  double lo = 1.0;
  double hi = 1.0;
  while (!below(lo)) lo *= 0.5;
  while (below(hi)) hi *= 2.0;
  for (int it = 0; it < 300 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (below(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double kolmogorov_survival(double lambda) {
  constexpr int kTerms = 100;
  if (!(lambda > 0.0)) return 1.0;
  double p = 0.0;
  if (lambda < 1.0) {
    // Theta-function form of the CDF; converges fast for small lambda.
    double cdf = 0.0;
    for (int k = 1; k <= kTerms; ++k) {
      const double odd = 2.0 * k - 1.0;
      cdf += std::exp(-odd * odd * std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    p = 1.0 - cdf;
  } else {
    double sign = 1.0;
    for (int k = 1; k <= kTerms; ++k) {
      p += sign * std::exp(-2.0 * k * k * lambda * lambda);
      sign = -sign;
    }
    p *= 2.0;
  }
  return std::clamp(p, 0.0, 1.0);
}

KsOutcome ks_test(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.size() < 10) throw InputError("KS test needs at least 10 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw InputError("KS test samples must be finite");
  }
  std::sort(sorted.begin(), sorted.end());

  const auto count = static_cast<double>(sorted.size());
  double statistic = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    const double above = static_cast<double>(i + 1) / count - f;
    const double below = f - static_cast<double>(i) / count;
    statistic = std::max({statistic, above, below});
  }

  KsOutcome out;
  out.statistic = statistic;
  out.sample_size = sorted.size();
  out.critical_value_01 = kKsCritical01 / std::sqrt(count);
  out.rejected_at_01 = statistic > out.critical_value_01;
  out.p_value_approx = kolmogorov_survival(std::sqrt(count) * statistic);
  return out;
}

}  // namespace hdpca
