#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace dcmmi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// logistic(eta) = 1 / (1 + exp(-eta)), stable over the full double range.
inline double logistic(double eta) {
  if (eta >= 0.0) {
    const double z = std::exp(-eta);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(eta);
  return z / (1.0 + z);
}

// log logistic(eta); never returns -inf for finite eta.
inline double log_logistic(double eta) {
  if (eta >= 0.0) return -std::log1p(std::exp(-eta));
  return eta - std::log1p(std::exp(eta));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Elementwise array forms, usable inside Eigen expressions.
template <typename Derived>
auto logistic(const Eigen::ArrayBase<Derived>& eta) {
  return eta.derived().unaryExpr([](double x) { return logistic(x); });
}

template <typename Derived>
auto log_logistic(const Eigen::ArrayBase<Derived>& eta) {
  return eta.derived().unaryExpr([](double x) { return log_logistic(x); });
}

// Standard normal density / CDF / quantile.
double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);  // inverse CDF, p in (0,1)

// Upper tail of the chi-square distribution.
// df = 1 uses the erfc closed form; general df uses the regularized
// upper incomplete gamma function Q(df/2, x/2).
double chi2_upper_tail(double x, double df);

// Quantile of chi-square(1): smallest c with P(X > c) = alpha.
double chi2_quantile_1df(double alpha);

// Regularized incomplete gamma functions P(a, x) (lower) and Q(a, x) = 1 - P.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Row-wise log-sum-exp of a matrix; each row must contain at least one
// entry > -inf.  Returns a column vector.
Vector logsumexp_rows(const Eigen::Ref<const Matrix>& m);

}  // namespace dcmmi
