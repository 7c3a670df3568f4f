#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <string>

#include "gpsobol/errors.hpp"

namespace gpsobol {

enum class KernelFamily { matern52, squared_exponential };

inline KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "matern52") return KernelFamily::matern52;
  if (s == "squared_exponential" || s == "gauss")
    return KernelFamily::squared_exponential;
  throw input_error("unknown kernel family: " + s);
}

inline std::string to_string(KernelFamily f) {
  return f == KernelFamily::matern52 ? "matern52" : "squared_exponential";
}

/// Anisotropic tensorized stationary correlation kernel.
struct KernelSpec {
  KernelFamily family = KernelFamily::matern52;
  Eigen::VectorXd length_scales;  // theta_i > 0, one per dimension

  int dim() const { return static_cast<int>(length_scales.size()); }

  void validate() const {
    if (length_scales.size() == 0) throw input_error("empty length scales");
    if ((length_scales.array() <= 0.0).any())
      throw input_error("length scales must be positive");
  }
};

namespace detail {

inline double rho1d(KernelFamily family, double h) {
  if (family == KernelFamily::matern52) {
    const double a = std::sqrt(5.0) * h;
    return (1.0 + a + a * a / 3.0) * std::exp(-a);
  }
  return std::exp(-0.5 * h * h);
}

}  // namespace detail

/// Correlation between two points: product over dimensions of the
/// one-dimensional correlation at scaled distance |x_i - y_i| / theta_i.
template <class DerivedA, class DerivedB>
double correlation(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& x,
                   const Eigen::MatrixBase<DerivedB>& y) {
  if (x.size() != spec.dim() || y.size() != spec.dim())
    throw input_error("correlation: point dimension mismatch");
  double rho = 1.0;
  for (int i = 0; i < spec.dim(); ++i) {
    const double h = std::abs(x[i] - y[i]) / spec.length_scales[i];
    rho *= detail::rho1d(spec.family, h);
  }
  return rho;
}

/// Correlation matrix of a point set, unit diagonal inflated by the nugget.
inline Eigen::MatrixXd corr_matrix(const KernelSpec& spec,
                                   const Eigen::MatrixXd& points,
                                   double nugget) {
  if (points.rows() < 1) throw input_error("corr_matrix: empty point set");
  if (points.cols() != spec.dim())
    throw input_error("corr_matrix: dimension mismatch");
  if (nugget < 0.0) throw input_error("corr_matrix: negative nugget");
  const int n = static_cast<int>(points.rows());
  Eigen::MatrixXd R(n, n);
  for (int i = 0; i < n; ++i) {
    R(i, i) = 1.0 + nugget;
    for (int j = i + 1; j < n; ++j) {
      R(i, j) = R(j, i) = correlation(spec, points.row(i), points.row(j));
    }
  }
  return R;
}

/// Cross-correlation vector r(x) against the rows of a design.
template <class Derived>
Eigen::VectorXd cross_corr(const KernelSpec& spec,
                           const Eigen::MatrixBase<Derived>& x,
                           const Eigen::MatrixXd& design) {
  if (design.rows() > 0 && design.cols() != spec.dim())
    throw input_error("cross_corr: dimension mismatch");
  Eigen::VectorXd r(design.rows());
  for (int i = 0; i < design.rows(); ++i)
    r[i] = correlation(spec, x, design.row(i));
  return r;
}

/// Cross-correlation block between two point sets (rows of a / rows of b).
inline Eigen::MatrixXd cross_corr_matrix(const KernelSpec& spec,
                                         const Eigen::MatrixXd& a,
                                         const Eigen::MatrixXd& b) {
  Eigen::MatrixXd K(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.rows(); ++j)
      K(i, j) = correlation(spec, a.row(i), b.row(j));
  return K;
}

/// Cholesky factor of the correlation matrix. The nugget is escalated by
/// factors of 10 up to `max_nugget` when the factorization fails.
struct CorrFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double nugget_used = 0.0;
};

inline CorrFactor factorize_corr(const KernelSpec& spec,
                                 const Eigen::MatrixXd& points, double nugget,
                                 double max_nugget = 1e-4) {
  std::vector<double> tried;
  double eta = nugget;
  Eigen::MatrixXd base = corr_matrix(spec, points, 0.0);
  while (true) {
    tried.push_back(eta);
    Eigen::MatrixXd R = base;
    R.diagonal().array() += eta;
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() == Eigen::Success) return {std::move(llt), eta};
    if (eta >= max_nugget) break;
    eta = (eta == 0.0) ? 1e-8 : eta * 10.0;
    if (eta > max_nugget) eta = max_nugget;
  }
  throw conditioning_error("correlation matrix not positive definite", tried);
}

}  // namespace gpsobol
