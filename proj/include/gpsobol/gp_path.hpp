#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <utility>

#include "gpsobol/design.hpp"
#include "gpsobol/errors.hpp"
#include "gpsobol/kernel.hpp"
#include "gpsobol/kriging.hpp"
#include "gpsobol/parallel.hpp"
#include "gpsobol/rng.hpp"

namespace gpsobol {

enum class SampleMethod { automatic, cholesky, nystrom };
enum class ConditioningMode { universal, simple };

/// One realization of a (co-)kriging predictive process on a point set.
struct GPPath {
  Eigen::MatrixXd points;
  Eigen::VectorXd values;
  std::uint64_t seed = 0;
};

struct PathSamplerOptions {
  SampleMethod method = SampleMethod::automatic;
  int cholesky_max = 4000;   // automatic: Cholesky while M + n <= this
  int nystrom_anchor = 1000; // anchor set size for larger problems
  int nystrom_rank = 0;      // 0 = keep 99.9% of eigenvalue mass
  int anchor_opt_iters = 200;
  int threads = 1;
};

/// Samples realizations of the conditional process by kriging conditioning:
/// an unconditioned path on points + design is corrected by the difference
/// of the data-based and path-based kriging means, so the near-singular
/// conditional covariance is never factorized.
class ConditionalPathSampler {
 public:
  /// Conditional sampling for a fitted kriging model. Universal mode
  /// re-estimates the trend from each unconditioned path; simple mode
  /// fixes it to zero.
  ConditionalPathSampler(const KrigingModel& model, Eigen::MatrixXd points,
                         ConditioningMode mode = ConditioningMode::universal,
                         PathSamplerOptions opt = {})
      : ConditionalPathSampler(model.kernel, model.design.points, model.lltR,
                               model.sigma2, model.nugget, std::move(points),
                               opt) {
    mode_ = mode;
    mean_ = predict_mean_batch(model, points_);
    if (mode == ConditioningMode::universal) {
      Fp_ = model.trend.matrix(points_);
      F_ = model.F;
      RinvF_ = model.RinvF;
      gls_ = model.gls;
    }
  }

  /// Zero-mean simple-kriging residual sampler (co-kriging discrepancies):
  /// draws have covariance sigma2 * (r - r' R^{-1} r).
  ConditionalPathSampler(const KernelSpec& kernel,
                         const Eigen::MatrixXd& design_points,
                         const Eigen::LLT<Eigen::MatrixXd>& lltR, double sigma2,
                         double nugget, Eigen::MatrixXd points,
                         PathSamplerOptions opt = {})
      : kernel_(kernel),
        design_(design_points),
        sigma_(std::sqrt(sigma2)),
        nugget_(nugget),
        points_(std::move(points)),
        opt_(opt),
        mode_(ConditioningMode::simple) {
    const int M = num_points(), n = static_cast<int>(design_.rows());
    mean_ = Eigen::VectorXd::Zero(M);
    if (M > 0 && points_.cols() != design_.cols())
      throw input_error("path sampler: point dimension mismatch");
    Eigen::MatrixXd Kpx = cross_corr_matrix(kernel_, points_, design_);
    A_ = lltR.solve(Kpx.transpose()).transpose();  // M x n
    all_points_.resize(M + n, design_.cols());
    all_points_.topRows(M) = points_;
    all_points_.bottomRows(n) = design_;
    use_cholesky_ = opt_.method == SampleMethod::cholesky ||
                    (opt_.method == SampleMethod::automatic &&
                     M + n <= opt_.cholesky_max);
    if (use_cholesky_) {
      auto cf = factorize_corr(kernel_, all_points_, nugget_);
      lltFull_ = std::move(cf.llt);
    } else {
      build_nystrom();
    }
  }

  int num_points() const { return static_cast<int>(points_.rows()); }

  /// One conditional path; deterministic in the seed.
  Eigen::VectorXd sample(std::uint64_t seed) const {
    return condition(draw_unconditioned(seed, 1)).col(0);
  }

  /// `count` paths, column k drawn from substream k of the master seed.
  Eigen::MatrixXd sample_block(std::uint64_t master_seed, int count) const {
    return condition(draw_unconditioned(master_seed, count));
  }

  /// Unconditioned draws on points + design (used by tests and by
  /// condition_path callers).
  Eigen::MatrixXd draw_unconditioned(std::uint64_t master_seed,
                                     int count) const {
    const int N = static_cast<int>(all_points_.rows());
    Eigen::MatrixXd W(N, count);
    if (use_cholesky_) {
      parallel_chunks(count, opt_.threads, [&](int lo, int hi) {
        for (int k = lo; k < hi; ++k) {
          Rng rng(substream_seed(master_seed, k));
          const Eigen::VectorXd xi = standard_normal(rng, N);
          W.col(k) = sigma_ * (lltFull_.matrixL() * xi).eval();
        }
      });
    } else {
      const int r = static_cast<int>(weights_.cols());
      const int na = static_cast<int>(weights_.rows());
      Eigen::MatrixXd C(na, count);         // per-anchor path coefficients
      Eigen::MatrixXd jitter(N, count);
      parallel_chunks(count, opt_.threads, [&](int lo, int hi) {
        for (int k = lo; k < hi; ++k) {
          Rng rng(substream_seed(master_seed, k));
          C.col(k) = sigma_ * (weights_ * standard_normal(rng, r));
          jitter.col(k) =
              sigma_ * sqrt_defect_.cwiseProduct(standard_normal(rng, N));
        }
      });
      W = jitter;
      // stream the (N x anchor) cross-correlation block-wise
      const int nb = static_cast<int>(anchor_.rows());
      const int block = std::max(1, (1 << 22) / std::max(nb, 1));
      parallel_chunks((N + block - 1) / block, opt_.threads, [&](int blo,
                                                                int bhi) {
        for (int b = blo; b < bhi; ++b) {
          const int lo = b * block, hi = std::min(N, lo + block);
          Eigen::MatrixXd Kb = cross_corr_matrix(
              kernel_, all_points_.middleRows(lo, hi - lo), anchor_);
          W.middleRows(lo, hi - lo) += Kb * C;
        }
      });
    }
    return W;
  }

  /// Prop.-2 correction of unconditioned draws (columns of W, laid out as
  /// [points; design]): value = mean + w_points - tilde_m(points).
  Eigen::MatrixXd condition(const Eigen::MatrixXd& W) const {
    const int M = num_points();
    const int n = static_cast<int>(design_.rows());
    const Eigen::MatrixXd WD = W.bottomRows(n);
    Eigen::MatrixXd out = W.topRows(M);
    if (mode_ == ConditioningMode::universal) {
      Eigen::MatrixXd Bt = gls_.solve(RinvF_.transpose() * WD);
      out -= Fp_ * Bt + A_ * (WD - F_ * Bt);
    } else {
      out -= A_ * WD;
    }
    out.colwise() += mean_;
    return out;
  }

  const Eigen::MatrixXd& points() const { return points_; }

 private:
  void build_nystrom() {
    const int N = static_cast<int>(all_points_.rows());
    const int d = static_cast<int>(all_points_.cols());
    const int m0 = std::min(opt_.nystrom_anchor, N);
    if (opt_.nystrom_rank > m0)
      throw input_error("nystrom rank exceeds anchor size");
    if (N <= opt_.nystrom_anchor) {
      anchor_ = all_points_;  // exact representation on the target set
    } else {
      // the anchor must contain the design: conditioning treats the draw at
      // the design points as exact observations, so those directions have to
      // be represented exactly or the conditional spread is distorted
      const int nd = static_cast<int>(design_.rows());
      const int fill = std::max(m0 - nd, 0);
      Eigen::VectorXd lo(d), hi(d);
      for (int j = 0; j < d; ++j) {
        lo[j] = all_points_.col(j).minCoeff();
        hi[j] = all_points_.col(j).maxCoeff();
        if (!(hi[j] > lo[j])) hi[j] = lo[j] + 1.0;
      }
      anchor_.resize(nd + fill, d);
      anchor_.topRows(nd) = design_;
      if (fill > 0) {
        Design a =
            optimize_lhs(fill, d, 0x4e5374524f4dULL, opt_.anchor_opt_iters);
        for (int j = 0; j < d; ++j)
          anchor_.col(j).tail(fill) =
              lo[j] + (hi[j] - lo[j]) * a.points.col(j).array();
      }
    }
    Eigen::MatrixXd Kaa =
        corr_matrix(kernel_, anchor_, std::max(nugget_, 1e-12));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Kaa);
    if (eig.info() != Eigen::Success)
      throw conditioning_error("anchor eigendecomposition failed",
                               {nugget_});
    // eigenvalues ascending; keep every numerically meaningful direction.
    // Truncating by eigen-mass is tempting but dangerous: once the draw
    // space has lower rank than the design the conditioned paths collapse
    // to near-deterministic functions and every downstream variance is
    // silently underestimated.
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const int na = static_cast<int>(ev.size());
    int rank = opt_.nystrom_rank;
    if (rank == 0) {
      const double cutoff = 1e-12 * ev[na - 1];
      rank = na;
      for (int i = na - 1; i >= 0; --i)
        if (ev[i] < cutoff) {
          rank = na - 1 - i;
          break;
        }
      rank = std::max(rank, 1);
    }
    weights_.resize(na, rank);
    for (int j = 0; j < rank; ++j) {
      const int idx = na - 1 - j;
      weights_.col(j) =
          eig.eigenvectors().col(idx) / std::sqrt(std::max(ev[idx], 1e-300));
    }

    // Nystrom defect: the anchor representation carries only
    // k(x,a) Kaa^{-1} k(a,x) of each point's unit prior variance. Make the
    // marginal exact by topping the draw up with independent noise of the
    // leftover variance (reduces to the plain nugget jitter on the anchors).
    sqrt_defect_.resize(N);
    const int block = std::max(1, (1 << 22) / std::max(na, 1));
    parallel_chunks((N + block - 1) / block, opt_.threads,
                    [&](int blo, int bhi) {
      for (int b = blo; b < bhi; ++b) {
        const int lo = b * block, hi = std::min(N, lo + block);
        const Eigen::MatrixXd Kb = cross_corr_matrix(
            kernel_, all_points_.middleRows(lo, hi - lo), anchor_);
        const Eigen::MatrixXd Phi = Kb * weights_;
        sqrt_defect_.segment(lo, hi - lo) =
            (1.0 + nugget_ - Phi.rowwise().squaredNorm().array())
                .max(0.0)
                .sqrt()
                .matrix();
      }
    });
  }

  KernelSpec kernel_;
  Eigen::MatrixXd design_;
  double sigma_ = 1.0;
  double nugget_ = 0.0;
  Eigen::MatrixXd points_, all_points_;
  PathSamplerOptions opt_;
  ConditioningMode mode_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd A_;  // K_px R^{-1}
  // universal-mode trend machinery
  Eigen::MatrixXd Fp_, F_, RinvF_;
  Eigen::LDLT<Eigen::MatrixXd> gls_;
  // unconditioned draw machinery
  bool use_cholesky_ = true;
  Eigen::LLT<Eigen::MatrixXd> lltFull_;
  Eigen::MatrixXd anchor_;      // Nystrom anchor points
  Eigen::MatrixXd weights_;     // U_r diag(lambda_r^{-1/2})
  Eigen::VectorXd sqrt_defect_; // per-point top-up noise scale
};

/// Draw from the zero-mean Gaussian with covariance sigma2 * r(. , .) on a
/// point set.
inline Eigen::VectorXd sample_unconditioned(const KernelSpec& kernel,
                                            double sigma2,
                                            const Eigen::MatrixXd& points,
                                            std::uint64_t seed,
                                            PathSamplerOptions opt = {}) {
  if (points.rows() < 1)
    throw input_error("sample_unconditioned: empty point set");
  Eigen::MatrixXd empty(0, points.cols());
  Eigen::LLT<Eigen::MatrixXd> no_design;
  ConditionalPathSampler s(kernel, empty,
                           Eigen::LLT<Eigen::MatrixXd>(Eigen::MatrixXd(0, 0)),
                           sigma2, 1e-12, points, opt);
  return s.draw_unconditioned(seed, 1).col(0);
}

/// Applies the Prop.-2 correction to externally supplied unconditioned
/// values laid out as [points; design].
inline GPPath condition_path(const KrigingModel& model,
                             const Eigen::MatrixXd& points,
                             const Eigen::VectorXd& unconditioned,
                             ConditioningMode mode,
                             std::uint64_t seed = 0) {
  if (unconditioned.size() != points.rows() + model.n())
    throw input_error(
        "condition_path: need unconditioned values at points and design");
  ConditionalPathSampler s(model, points, mode);
  return {points, s.condition(unconditioned).col(0), seed};
}

/// Unconditioned draw on points + design followed by conditioning.
inline GPPath sample_conditional(const KrigingModel& model,
                                 const Eigen::MatrixXd& points,
                                 std::uint64_t seed,
                                 PathSamplerOptions opt = {},
                                 ConditioningMode mode =
                                     ConditioningMode::universal) {
  if (points.rows() == 0) return {points, Eigen::VectorXd(0), seed};
  ConditionalPathSampler s(model, points, mode, opt);
  return {points, s.sample(seed), seed};
}

}  // namespace gpsobol
