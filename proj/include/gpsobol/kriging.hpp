#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "gpsobol/design.hpp"
#include "gpsobol/errors.hpp"
#include "gpsobol/kernel.hpp"
#include "gpsobol/optim.hpp"
#include "gpsobol/rng.hpp"

namespace gpsobol {

enum class TrendKind { constant, linear };

inline TrendKind trend_from_string(const std::string& s) {
  if (s == "constant") return TrendKind::constant;
  if (s == "linear") return TrendKind::linear;
  throw input_error("unknown trend: " + s);
}

inline std::string to_string(TrendKind t) {
  return t == TrendKind::constant ? "constant" : "linear";
}

/// Regression basis f(x) for the universal-kriging trend.
struct TrendBasis {
  TrendKind kind = TrendKind::constant;

  int size(int dim) const { return kind == TrendKind::constant ? 1 : 1 + dim; }

  template <class Derived>
  Eigen::VectorXd eval(const Eigen::MatrixBase<Derived>& x) const {
    Eigen::VectorXd f(size(static_cast<int>(x.size())));
    f[0] = 1.0;
    if (kind == TrendKind::linear)
      for (int i = 0; i < x.size(); ++i) f[i + 1] = x[i];
    return f;
  }

  Eigen::MatrixXd matrix(const Eigen::MatrixXd& points) const {
    Eigen::MatrixXd F(points.rows(), size(static_cast<int>(points.cols())));
    F.col(0).setOnes();
    if (kind == TrendKind::linear) F.rightCols(points.cols()) = points;
    return F;
  }
};

struct FitOptions {
  KernelFamily family = KernelFamily::matern52;
  std::optional<Eigen::VectorXd> fixed_length_scales;  // skips optimization
  double nugget = 1e-8;
  int optimizer_budget = 5;  // multi-start count
  int optimizer_iters = 150;
  std::uint64_t seed = 0;
};

/// Fitted universal-kriging surrogate with cached factorizations.
struct KrigingModel {
  Design design;
  Eigen::VectorXd z;
  KernelSpec kernel;
  double nugget = 0.0;  // value actually used in R
  TrendBasis trend;
  Eigen::VectorXd beta;
  double sigma2 = 0.0;

  // cached
  Eigen::LLT<Eigen::MatrixXd> lltR;
  Eigen::MatrixXd F;
  Eigen::MatrixXd RinvF;                 // R^{-1} F
  Eigen::LDLT<Eigen::MatrixXd> gls;      // F' R^{-1} F
  Eigen::VectorXd alpha;                 // R^{-1} (z - F beta)

  int n() const { return static_cast<int>(z.size()); }
  int dim() const { return design.dim(); }
};

namespace detail {

struct GlsSolve {
  Eigen::LLT<Eigen::MatrixXd> lltR;
  Eigen::MatrixXd F, RinvF;
  Eigen::LDLT<Eigen::MatrixXd> gls;
  Eigen::VectorXd beta, alpha;
  double quad = 0.0;   // residual' R^{-1} residual
  double logdetR = 0.0, logdetG = 0.0;
  double nugget_used = 0.0;
};

/// Shared GLS machinery: factorizes R, solves the trend normal equations,
/// returns the pieces both the fit objective and the final model need.
/// `F` may carry extra regression columns (co-kriging prepends one).
inline GlsSolve gls_solve(const KernelSpec& spec, const Eigen::MatrixXd& pts,
                          const Eigen::MatrixXd& F, const Eigen::VectorXd& z,
                          double nugget) {
  GlsSolve out;
  auto cf = factorize_corr(spec, pts, nugget);
  out.lltR = std::move(cf.llt);
  out.nugget_used = cf.nugget_used;
  out.F = F;
  out.RinvF = out.lltR.solve(F);
  Eigen::MatrixXd G = F.transpose() * out.RinvF;
  out.gls.compute(G);
  if (out.gls.info() != Eigen::Success ||
      (out.gls.vectorD().array() <= 0.0).any())
    throw fit_error("singular F' R^{-1} F (rank-deficient trend)");
  out.beta = out.gls.solve(out.RinvF.transpose() * z);
  Eigen::VectorXd resid = z - F * out.beta;
  out.alpha = out.lltR.solve(resid);
  out.quad = resid.dot(out.alpha);
  out.logdetR =
      2.0 * out.lltR.matrixLLT().diagonal().array().log().sum();
  out.logdetG = out.gls.vectorD().array().log().sum();
  return out;
}

/// Concentrated REML criterion in theta (beta and sigma^2 profiled out).
inline double reml_objective(const GlsSolve& g, int n, int p) {
  if (!(g.quad > 0.0) || !std::isfinite(g.quad))
    return std::numeric_limits<double>::infinity();
  return (n - p) * std::log(g.quad) + g.logdetR + g.logdetG;
}

/// Multi-start maximization of the concentrated likelihood over log theta.
inline Eigen::VectorXd optimize_length_scales(
    const std::function<double(const Eigen::VectorXd&)>& objective_logtheta,
    const Eigen::MatrixXd& pts, int budget, int iters, std::uint64_t seed) {
  const int d = static_cast<int>(pts.cols());
  Eigen::VectorXd lo(d), hi(d);
  for (int j = 0; j < d; ++j) {
    double range = pts.col(j).maxCoeff() - pts.col(j).minCoeff();
    if (!(range > 0.0)) range = 1.0;
    lo[j] = std::log(1e-2 * range);
    hi[j] = std::log(10.0 * range);
  }
  budget = std::max(1, budget);
  Eigen::VectorXd best;
  double best_val = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  for (int s = 0; s < budget; ++s) {
    Eigen::VectorXd x0(d);
    if (s == 0) {
      x0 = 0.5 * (lo + hi);  // first start at the box center
    } else {
      for (int j = 0; j < d; ++j)
        x0[j] = lo[j] + (hi[j] - lo[j]) *
                            std::uniform_real_distribution<double>(0, 1)(rng);
    }
    Eigen::VectorXd xs =
        nelder_mead(objective_logtheta, x0, lo, hi, iters);
    const double v = objective_logtheta(xs);
    if (v < best_val) {
      best_val = v;
      best = xs;
    }
  }
  if (!std::isfinite(best_val))
    throw fit_error("length-scale optimization: objective never finite");
  return best.array().exp();
}

}  // namespace detail

/// Fits a universal-kriging model: length scales by maximum likelihood
/// (multi-start, concentrated criterion), then GLS trend and REML variance.
inline KrigingModel fit(const Design& design, const Eigen::VectorXd& z,
                        TrendBasis trend, const FitOptions& opt = {}) {
  const int n = design.n();
  const int p = trend.size(design.dim());
  if (n != z.size()) throw input_error("fit: design/observation size mismatch");
  if (n <= p) throw input_error("fit: need n > p");
  const Eigen::MatrixXd F = trend.matrix(design.points);

  Eigen::VectorXd theta;
  if (opt.fixed_length_scales) {
    theta = *opt.fixed_length_scales;
  } else {
    auto objective = [&](const Eigen::VectorXd& logtheta) {
      KernelSpec spec{opt.family, logtheta.array().exp()};
      try {
        return detail::reml_objective(
            detail::gls_solve(spec, design.points, F, z, opt.nugget), n, p);
      } catch (const conditioning_error&) {
        return std::numeric_limits<double>::infinity();
      } catch (const fit_error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    theta = detail::optimize_length_scales(objective, design.points,
                                           opt.optimizer_budget,
                                           opt.optimizer_iters, opt.seed);
  }

  KernelSpec spec{opt.family, theta};
  spec.validate();
  auto g = detail::gls_solve(spec, design.points, F, z, opt.nugget);
  KrigingModel model;
  model.design = design;
  model.z = z;
  model.kernel = spec;
  model.nugget = g.nugget_used;
  model.trend = trend;
  model.beta = g.beta;
  model.sigma2 = g.quad / (n - p);
  if (!(model.sigma2 > 0.0))
    model.sigma2 = std::numeric_limits<double>::min();
  model.lltR = std::move(g.lltR);
  model.F = std::move(g.F);
  model.RinvF = std::move(g.RinvF);
  model.gls = std::move(g.gls);
  model.alpha = std::move(g.alpha);
  return model;
}

template <class Derived>
double predict_mean(const KrigingModel& m, const Eigen::MatrixBase<Derived>& x) {
  const Eigen::VectorXd r = cross_corr(m.kernel, x, m.design.points);
  return m.trend.eval(x).dot(m.beta) + r.dot(m.alpha);
}

inline Eigen::VectorXd predict_mean_batch(const KrigingModel& m,
                                          const Eigen::MatrixXd& points) {
  Eigen::VectorXd out(points.rows());
  for (int i = 0; i < points.rows(); ++i) out[i] = predict_mean(m, points.row(i));
  return out;
}

/// Predictive covariance s_n^2(x, y), trend-parameter uncertainty included
/// (equivalent to the bordered-matrix form).
template <class DerivedA, class DerivedB>
double predict_cov(const KrigingModel& m, const Eigen::MatrixBase<DerivedA>& x,
                   const Eigen::MatrixBase<DerivedB>& y) {
  const Eigen::VectorXd rx = cross_corr(m.kernel, x, m.design.points);
  const Eigen::VectorXd ry = cross_corr(m.kernel, y, m.design.points);
  const double r0 = correlation(m.kernel, x, y);
  const Eigen::VectorXd w = m.lltR.solve(ry);
  const Eigen::VectorXd ux = m.trend.eval(x) - m.RinvF.transpose() * rx;
  const Eigen::VectorXd uy = m.trend.eval(y) - m.RinvF.transpose() * ry;
  return m.sigma2 * (r0 - rx.dot(w) + ux.dot(m.gls.solve(uy)));
}

inline Eigen::MatrixXd predict_cov_matrix(const KrigingModel& m,
                                          const Eigen::MatrixXd& points) {
  const int k = static_cast<int>(points.rows());
  Eigen::MatrixXd C(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j)
      C(i, j) = C(j, i) = predict_cov(m, points.row(i), points.row(j));
  return C;
}

/// Nash-Sutcliffe efficiency on a test set (1 = perfect prediction).
inline double efficiency(const Eigen::VectorXd& predictions,
                         const Eigen::VectorXd& outputs) {
  if (predictions.size() != outputs.size() || outputs.size() == 0)
    throw input_error("efficiency: bad test set");
  const double mean = outputs.mean();
  const double denom = (outputs.array() - mean).square().sum();
  if (!(denom > 0.0))
    throw degenerate_output_error("efficiency: constant test outputs");
  return 1.0 - (predictions - outputs).squaredNorm() / denom;
}

inline double efficiency(const KrigingModel& m,
                         const Eigen::MatrixXd& test_inputs,
                         const Eigen::VectorXd& test_outputs) {
  return efficiency(predict_mean_batch(m, test_inputs), test_outputs);
}

/// Leave-one-out predictive means via the closed-form identity on the
/// projected precision C = R^{-1} - R^{-1} F (F'R^{-1}F)^{-1} F'R^{-1};
/// the LOO residual at point i is alpha_i / C_ii.
inline Eigen::VectorXd loo_means(const KrigingModel& m) {
  const int n = m.n();
  if (n < 3) throw input_error("loo: need n >= 3");
  Eigen::MatrixXd Rinv = m.lltR.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd C = Rinv - m.RinvF * m.gls.solve(m.RinvF.transpose());
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = m.z[i] - m.alpha[i] / C(i, i);
  return out;
}

inline double loo_efficiency(const KrigingModel& m) {
  return efficiency(loo_means(m), m.z);
}

}  // namespace gpsobol
