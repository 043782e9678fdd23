#pragma once

// Chi-square distribution, the law of R = sqrt(n / chi2_n), and the
// one-sample Kolmogorov-Smirnov test.

#include <cstddef>
#include <functional>
#include <span>

namespace hdpca {

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
/// directly so that small upper tails keep full relative accuracy.
double regularized_gamma_q(double a, double x);

/// P(chi2_n <= x). Throws DomainError for x < 0 or n < 1.
double chi_square_cdf(double x, int n);
double chi_square_pdf(double x, int n);

/// Law of R = sqrt(n / chi2_n).
class RLaw {
 public:
  explicit RLaw(int degrees_of_freedom);
  int degrees_of_freedom() const { return n_; }

 private:
  int n_;
};

/// P(R <= r) = 1 - chi_square_cdf(n / r^2, n). Throws DomainError for r <= 0.
double r_cdf(double r, const RLaw& law);
/// P(R > r).
double r_survival(double r, const RLaw& law);
/// Inverse of r_cdf by bracketed bisection. Throws DomainError unless 0 < p < 1.
double r_quantile(double p, const RLaw& law);

/// Asymptotic Kolmogorov critical constant at alpha = 0.01.
inline constexpr double kKsCritical01 = 1.628;

struct KsOutcome {
  double statistic = 0.0;
  std::size_t sample_size = 0;
  double critical_value_01 = 0.0;
  bool rejected_at_01 = false;
  double p_value_approx = 1.0;
};

/// P(K > lambda) for the limiting Kolmogorov distribution (series truncated
/// at 100 terms).
double kolmogorov_survival(double lambda);

/// One-sample KS test of `samples` against `cdf`. Requires at least 10
/// finite samples (InputError otherwise).
KsOutcome ks_test(std::span<const double> samples, const std::function<double(double)>& cdf);

}  // namespace hdpca
