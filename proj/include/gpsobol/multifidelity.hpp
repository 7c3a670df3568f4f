#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "gpsobol/design.hpp"
#include "gpsobol/errors.hpp"
#include "gpsobol/gp_path.hpp"
#include "gpsobol/kriging.hpp"
#include "gpsobol/kriging_sobol.hpp"
#include "gpsobol/sobol_mc.hpp"

namespace gpsobol {

/// One co-kriging level t >= 2: a discrepancy GP regressed on the trend
/// basis plus the previous-level outputs column (the adjustment rho).
struct CokrigingLevel {
  Design design;
  Eigen::VectorXd z;
  Eigen::VectorXd z_prev;  // observed previous-level outputs at this design
  KernelSpec kernel;
  double nugget = 0.0;
  TrendBasis trend;
  Eigen::MatrixXd H;     // [z_prev  F]
  Eigen::VectorXd coef;  // (rho, beta)
  double sigma2 = 0.0;   // REML, divisor n - p - 1
  double rho2hat = 0.0;  // rho^2 + sigma2 [(H'R^{-1}H)^{-1}]_{00}

  Eigen::LLT<Eigen::MatrixXd> lltR;
  Eigen::MatrixXd RinvH;
  Eigen::LDLT<Eigen::MatrixXd> glsH;
  Eigen::VectorXd alpha;  // R^{-1} (z - H coef)

  double rho() const { return coef[0]; }
  Eigen::VectorXd beta() const { return coef.tail(coef.size() - 1); }
  int n() const { return static_cast<int>(z.size()); }
};

/// Recursive multi-fidelity co-kriging stack: a plain kriging level plus
/// adjustment/discrepancy levels on nested designs.
struct MultiFidelityModel {
  KrigingModel base;                 // level 1
  std::vector<CokrigingLevel> upper; // levels 2..s

  int levels() const { return 1 + static_cast<int>(upper.size()); }
  int dim() const { return base.dim(); }
};

namespace detail {

/// Index of each row of `sub` inside `super` (exact within tol).
inline std::vector<int> nested_row_map(const Eigen::MatrixXd& sub,
                                       const Eigen::MatrixXd& super,
                                       double tol = 1e-12) {
  std::vector<int> map(sub.rows(), -1);
  for (int i = 0; i < sub.rows(); ++i) {
    for (int j = 0; j < super.rows(); ++j) {
      if ((sub.row(i) - super.row(j)).lpNorm<Eigen::Infinity>() <= tol) {
        map[i] = j;
        break;
      }
    }
    if (map[i] < 0)
      throw input_error("designs are not nested: level-t point missing from "
                        "the coarser design");
  }
  return map;
}

}  // namespace detail

/// Fits the recursive co-kriging stack. Designs must be nested
/// (D_s subset of ... subset of D_1); previous-level observations at the
/// finer designs are taken from the data, never predicted.
inline MultiFidelityModel mf_fit(const std::vector<Design>& designs,
                                 const std::vector<Eigen::VectorXd>& obs,
                                 const std::vector<TrendBasis>& trends,
                                 const std::vector<FitOptions>& opts) {
  const size_t s = designs.size();
  if (s == 0 || obs.size() != s || trends.size() != s || opts.size() != s)
    throw input_error("mf_fit: per-level inputs of unequal length");
  MultiFidelityModel model;
  model.base = fit(designs[0], obs[0], trends[0], opts[0]);

  for (size_t t = 1; t < s; ++t) {
    const Design& D = designs[t];
    const Eigen::VectorXd& z = obs[t];
    const int n = D.n();
    const int p = trends[t].size(D.dim());
    if (n != z.size()) throw input_error("mf_fit: design/observation mismatch");
    if (n <= p + 1) throw input_error("mf_fit: need n_t > p_t + 1");
    const auto map = detail::nested_row_map(D.points, designs[t - 1].points);
    Eigen::VectorXd z_prev(n);
    for (int i = 0; i < n; ++i) z_prev[i] = obs[t - 1][map[i]];

    Eigen::MatrixXd H(n, p + 1);
    H.col(0) = z_prev;
    H.rightCols(p) = trends[t].matrix(D.points);

    const FitOptions& opt = opts[t];
    Eigen::VectorXd theta;
    if (opt.fixed_length_scales) {
      theta = *opt.fixed_length_scales;
    } else {
      auto objective = [&](const Eigen::VectorXd& logtheta) {
        KernelSpec spec{opt.family, logtheta.array().exp()};
        try {
          return detail::reml_objective(
              detail::gls_solve(spec, D.points, H, z, opt.nugget), n, p + 1);
        } catch (const conditioning_error&) {
          return std::numeric_limits<double>::infinity();
        } catch (const fit_error&) {
          return std::numeric_limits<double>::infinity();
        }
      };
      theta = detail::optimize_length_scales(objective, D.points,
                                             opt.optimizer_budget,
                                             opt.optimizer_iters, opt.seed);
    }

    KernelSpec spec{opt.family, theta};
    auto g = detail::gls_solve(spec, D.points, H, z, opt.nugget);
    CokrigingLevel lvl;
    lvl.design = D;
    lvl.z = z;
    lvl.z_prev = std::move(z_prev);
    lvl.kernel = spec;
    lvl.nugget = g.nugget_used;
    lvl.trend = trends[t];
    lvl.H = std::move(g.F);
    lvl.coef = g.beta;
    lvl.sigma2 = g.quad / (n - p - 1);
    if (!(lvl.sigma2 > 0.0)) lvl.sigma2 = std::numeric_limits<double>::min();
    const Eigen::MatrixXd Ginv =
        g.gls.solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
    lvl.rho2hat = lvl.coef[0] * lvl.coef[0] + lvl.sigma2 * Ginv(0, 0);
    lvl.lltR = std::move(g.lltR);
    lvl.RinvH = std::move(g.RinvF);
    lvl.glsH = std::move(g.gls);
    lvl.alpha = std::move(g.alpha);
    model.upper.push_back(std::move(lvl));
  }
  return model;
}

/// Per-level predictive means at the rows of `points`: column t-1 holds
/// the level-t mean (cumulative recursion).
inline Eigen::MatrixXd mf_level_means(const MultiFidelityModel& model,
                                      const Eigen::MatrixXd& points) {
  Eigen::MatrixXd out(points.rows(), model.levels());
  out.col(0) = predict_mean_batch(model.base, points);
  for (size_t t = 0; t < model.upper.size(); ++t) {
    const CokrigingLevel& lvl = model.upper[t];
    Eigen::MatrixXd K = cross_corr_matrix(lvl.kernel, points,
                                          lvl.design.points);
    Eigen::MatrixXd Fp = lvl.trend.matrix(points);
    out.col(t + 1) = lvl.rho() * out.col(t) + Fp * lvl.beta() + K * lvl.alpha;
  }
  return out;
}

namespace detail {

template <class Derived>
Eigen::MatrixXd as_row(const Eigen::MatrixBase<Derived>& x) {
  Eigen::MatrixXd pt(1, x.size());
  for (int i = 0; i < x.size(); ++i) pt(0, i) = x[i];
  return pt;
}

}  // namespace detail

template <class Derived>
double mf_predict_mean(const MultiFidelityModel& model,
                       const Eigen::MatrixBase<Derived>& x) {
  return mf_level_means(model, detail::as_row(x))(0, model.levels() - 1);
}

/// Predictive covariance of the finest level, parameter uncertainty
/// included: k^s = rho2hat * k^{s-1} + k_delta_s with the bordered
/// discrepancy form.
template <class DerivedA, class DerivedB>
double mf_predict_cov(const MultiFidelityModel& model,
                      const Eigen::MatrixBase<DerivedA>& x,
                      const Eigen::MatrixBase<DerivedB>& y) {
  double k = predict_cov(model.base, x, y);
  if (model.upper.empty()) return k;
  Eigen::MatrixXd px = detail::as_row(x), py = detail::as_row(y);
  const Eigen::MatrixXd mx = mf_level_means(model, px);
  const Eigen::MatrixXd my = mf_level_means(model, py);
  for (size_t t = 0; t < model.upper.size(); ++t) {
    const CokrigingLevel& lvl = model.upper[t];
    const Eigen::VectorXd rx = cross_corr(lvl.kernel, x, lvl.design.points);
    const Eigen::VectorXd ry = cross_corr(lvl.kernel, y, lvl.design.points);
    Eigen::VectorXd hx(lvl.coef.size()), hy(lvl.coef.size());
    hx[0] = mx(0, t);
    hy[0] = my(0, t);
    hx.tail(hx.size() - 1) = lvl.trend.eval(x);
    hy.tail(hy.size() - 1) = lvl.trend.eval(y);
    const Eigen::VectorXd gx = hx - lvl.RinvH.transpose() * rx;
    const Eigen::VectorXd gy = hy - lvl.RinvH.transpose() * ry;
    const double kd =
        lvl.sigma2 * (correlation(lvl.kernel, x, y) -
                      rx.dot(lvl.lltR.solve(ry)) + gx.dot(lvl.glsH.solve(gy)));
    k = lvl.rho2hat * k + kd;
  }
  return k;
}

inline Eigen::MatrixXd mf_predict_cov_matrix(const MultiFidelityModel& model,
                                             const Eigen::MatrixXd& points) {
  const int k = static_cast<int>(points.rows());
  Eigen::MatrixXd C(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j)
      C(i, j) = C(j, i) =
          mf_predict_cov(model, points.row(i), points.row(j));
  return C;
}

/// Exact Gaussian draw of (rho, beta) from the level posterior.
inline Eigen::VectorXd sample_rho_beta(const CokrigingLevel& lvl,
                                       std::uint64_t seed) {
  const int q = static_cast<int>(lvl.coef.size());
  const Eigen::MatrixXd cov =
      lvl.sigma2 * lvl.glsH.solve(Eigen::MatrixXd::Identity(q, q));
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw conditioning_error("posterior covariance not positive definite",
                             {lvl.nugget});
  Rng rng(seed);
  return lvl.coef + llt.matrixL() * standard_normal(rng, q);
}

/// Samples the (non-Gaussian) finest-level predictive distribution on a
/// fixed point set, retaining each intermediate level's path. Level-t
/// update: z <- rho* z + f'(x) beta* + conditional discrepancy residual
/// around the (rho*, beta*)-based discrepancy mean.
class MfPathSampler {
 public:
  MfPathSampler(const MultiFidelityModel& model, Eigen::MatrixXd points,
                PathSamplerOptions opt = {})
      : model_(&model),
        base_(model.base, points, ConditioningMode::universal, opt),
        opt_(opt) {
    for (const CokrigingLevel& lvl : model.upper) {
      LevelMachinery mech;
      mech.residual = std::make_unique<ConditionalPathSampler>(
          lvl.kernel, lvl.design.points, lvl.lltR, lvl.sigma2, lvl.nugget,
          points, opt);
      Eigen::MatrixXd K = cross_corr_matrix(lvl.kernel, points,
                                            lvl.design.points);
      const Eigen::MatrixXd A = lvl.lltR.solve(K.transpose()).transpose();
      mech.c_z = A * lvl.z;
      mech.c_prev = A * lvl.z_prev;
      mech.C_F = A * lvl.trend.matrix(lvl.design.points);
      mech.Fp = lvl.trend.matrix(points);
      const int q = static_cast<int>(lvl.coef.size());
      const Eigen::MatrixXd cov =
          lvl.sigma2 * lvl.glsH.solve(Eigen::MatrixXd::Identity(q, q));
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success)
        throw conditioning_error("posterior covariance not positive definite",
                                 {lvl.nugget});
      mech.post_chol = llt.matrixL();
      machinery_.push_back(std::move(mech));
    }
  }

  /// One draw per level; element t-1 is the level-t path (element s-1 is
  /// the finest). Deterministic in the seed.
  std::vector<Eigen::VectorXd> sample(std::uint64_t seed) const {
    auto blocks = sample_block(seed, 1);
    std::vector<Eigen::VectorXd> out;
    out.reserve(blocks.size());
    for (auto& b : blocks) out.push_back(b.col(0));
    return out;
  }

  /// Blocked draws: per-level M x count matrices, column k from substream
  /// k of the master seed.
  std::vector<Eigen::MatrixXd> sample_block(std::uint64_t seed,
                                            int count) const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(1 + machinery_.size());
    out.push_back(base_.sample_block(substream_seed(seed, 2), count));
    for (size_t t = 0; t < machinery_.size(); ++t) {
      const LevelMachinery& mech = machinery_[t];
      const CokrigingLevel& lvl = model_->upper[t];
      const std::uint64_t rho_master = substream_seed(seed, 3 + 2 * t);
      const std::uint64_t res_master = substream_seed(seed, 4 + 2 * t);
      const Eigen::MatrixXd resid =
          mech.residual->sample_block(res_master, count);
      Eigen::MatrixXd level(resid.rows(), count);
      for (int k = 0; k < count; ++k) {
        Rng rng(substream_seed(rho_master, k));
        const Eigen::VectorXd rb =
            lvl.coef + mech.post_chol *
                           standard_normal(rng, lvl.coef.size());
        const double rho_star = rb[0];
        const Eigen::VectorXd beta_star = rb.tail(rb.size() - 1);
        level.col(k) = rho_star * out[t].col(k) + mech.Fp * beta_star +
                       mech.c_z - mech.C_F * beta_star -
                       rho_star * mech.c_prev + resid.col(k);
      }
      out.push_back(std::move(level));
    }
    return out;
  }

 private:
  struct LevelMachinery {
    std::unique_ptr<ConditionalPathSampler> residual;
    Eigen::VectorXd c_z, c_prev;  // K_px R^{-1} z, K_px R^{-1} z_prev
    Eigen::MatrixXd C_F, Fp;
    Eigen::MatrixXd post_chol;
  };
  const MultiFidelityModel* model_;
  ConditionalPathSampler base_;
  PathSamplerOptions opt_;
  std::vector<LevelMachinery> machinery_;
};

/// One finest-level realization plus the retained per-level paths.
inline std::vector<GPPath> algorithm2_sample(const MultiFidelityModel& model,
                                             const Eigen::MatrixXd& points,
                                             std::uint64_t seed,
                                             PathSamplerOptions opt = {}) {
  MfPathSampler sampler(model, points, opt);
  auto values = sampler.sample(seed);
  std::vector<GPPath> out;
  out.reserve(values.size());
  for (auto& v : values) out.push_back({points, std::move(v), seed});
  return out;
}

/// Algorithm-1 driver over the multi-fidelity sampler: one index sample
/// matrix per code level. With a single level this reproduces the kriging
/// driver exactly (same substreams).
inline std::vector<IndexSampleMatrix> mf_algorithm1(
    const MultiFidelityModel& model, const InputDistribution& dist,
    const std::vector<int>& u, int m, int N_Z, int B, EstimatorKind estimator,
    std::uint64_t seed, Algorithm1Options opt = {}) {
  if (m < 2 || N_Z < 1 || B < 1)
    throw input_error("mf_algorithm1: need m >= 2, N_Z >= 1, B >= 1");
  const bool mauntz = estimator == EstimatorKind::mauntz;
  const PickFreezeDesign pf =
      pick_freeze(dist, u, m, substream_seed(seed, 0), mauntz);
  const auto rows = bootstrap_indices(m, B, substream_seed(seed, 1));

  PathSamplerOptions popt = opt.path;
  popt.threads = opt.threads;
  Eigen::MatrixXd stacked = detail::stack_pick_freeze(pf, mauntz);
  detail::RowDedup dd = detail::dedup_rows(stacked);
  if (!dd.trivial) stacked = std::move(dd.unique);
  MfPathSampler sampler(model, std::move(stacked), popt);
  auto blocks = sampler.sample_block(seed, N_Z);
  if (!dd.trivial)
    for (auto& b : blocks) b = detail::expand_rows(b, dd.map);

  std::vector<IndexSampleMatrix> out(model.levels());
  for (int t = 0; t < model.levels(); ++t) {
    out[t].values.resize(N_Z, B);
    out[t].u = u;
    out[t].m = m;
    out[t].estimator = estimator;
    out[t].seed = seed;
    std::vector<int> degenerate(N_Z, 0);
    parallel_chunks(N_Z, opt.threads, [&](int lo, int hi) {
      for (int k = lo; k < hi; ++k)
        detail::estimator_rows(estimator, blocks[t].col(k), m, rows,
                               out[t].values, k, degenerate[k]);
    });
    for (int d : degenerate) out[t].degenerate_cells += d;
    if (out[t].degenerate_cells >
        opt.max_degenerate_fraction * static_cast<double>(N_Z) * B)
      throw degenerate_output_error(
          "mf_algorithm1: too many degenerate estimator cells");
  }
  return out;
}

/// Multi-fidelity ratio-of-expectations index (the U/D sums). Evaluated
/// through the recursive identities: the per-level sums collapse onto the
/// composite predictive mean and the rho2hat-weighted discrepancy
/// covariances.
inline double mf_first_approach(const MultiFidelityModel& model,
                                const PickFreezeDesign& pf, int threads = 1) {
  const int m = pf.m();
  const Eigen::MatrixXd meanX = mf_level_means(model, pf.X);
  const Eigen::MatrixXd meanXt = mf_level_means(model, pf.X_tilde);
  const int s = model.levels();
  const Eigen::VectorXd mx = meanX.col(s - 1);
  const Eigen::VectorXd mxt = meanXt.col(s - 1);

  // prod_{j=t..s-1} rho2hat_j for each level t (1-based), empty product = 1
  std::vector<double> q(s, 1.0);
  for (int t = s - 2; t >= 0; --t)
    q[t] = q[t + 1] * model.upper[t].rho2hat;

  auto cov_sums = [&](const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& meansA,
                      const Eigen::MatrixXd& meansB) {
    detail::CovSums total = detail::predictive_cov_sums(model.base, A, B,
                                                        threads);
    total.diag *= q[0];
    total.full *= q[0];
    for (size_t t = 0; t < model.upper.size(); ++t) {
      const CokrigingLevel& lvl = model.upper[t];
      const int p = static_cast<int>(lvl.coef.size());
      Eigen::MatrixXd Ha(A.rows(), p), Hb(B.rows(), p);
      Ha.col(0) = meansA.col(t);
      Hb.col(0) = meansB.col(t);
      Ha.rightCols(p - 1) = lvl.trend.matrix(A);
      Hb.rightCols(p - 1) = lvl.trend.matrix(B);
      const auto cs = detail::bordered_cov_sums(
          lvl.kernel, lvl.design.points, lvl.lltR, lvl.RinvH, lvl.glsH,
          lvl.sigma2, A, B, Ha, Hb, threads);
      total.diag += q[t + 1] * cs.diag;
      total.full += q[t + 1] * cs.full;
    }
    return total;
  };

  const auto num_cov = cov_sums(pf.X, pf.X_tilde, meanX, meanXt);
  const auto den_cov = cov_sums(pf.X, pf.X, meanX, meanX);
  const double num = num_cov.diag + mx.dot(mxt) / m - num_cov.full -
                     (mx.sum() / m) * (mxt.sum() / m);
  const double den = den_cov.diag + mx.dot(mx) / m - den_cov.full -
                     (mx.sum() / m) * (mx.sum() / m);
  if (std::abs(den) < 1e-12 * std::max(mx.squaredNorm() / m, 1e-300))
    throw degenerate_output_error("mf_first_approach: zero denominator");
  return num / den;
}

}  // namespace gpsobol
