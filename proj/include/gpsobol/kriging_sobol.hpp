#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gpsobol/design.hpp"
#include "gpsobol/errors.hpp"
#include "gpsobol/gp_path.hpp"
#include "gpsobol/kriging.hpp"
#include "gpsobol/parallel.hpp"
#include "gpsobol/sobol_mc.hpp"

namespace gpsobol {

/// N_Z x B matrix of index estimates: row k = GP realization, column l =
/// bootstrap replicate, column 0 = the un-resampled pairing. Degenerate
/// estimator cells are stored as NaN and counted.
struct IndexSampleMatrix {
  Eigen::MatrixXd values;
  std::vector<int> u;
  int m = 0;
  EstimatorKind estimator = EstimatorKind::janon;
  std::uint64_t seed = 0;
  int degenerate_cells = 0;

  int n_z() const { return static_cast<int>(values.rows()); }
  int b() const { return static_cast<int>(values.cols()); }
};

enum class VarianceRegime { metamodel_dominated, mc_dominated, balanced };

inline std::string to_string(VarianceRegime r) {
  switch (r) {
    case VarianceRegime::metamodel_dominated: return "metamodel-dominated";
    case VarianceRegime::mc_dominated: return "mc-dominated";
    default: return "balanced";
  }
}

struct UncertaintyBudget {
  double var_total = 0.0;
  double var_metamodel = 0.0;
  double var_mc = 0.0;
  VarianceRegime regime = VarianceRegime::balanced;
};

struct Algorithm1Options {
  PathSamplerOptions path;
  int threads = 1;
  double max_degenerate_fraction = 0.01;
};

namespace detail {

template <class Fn>
void for_each_finite(const Eigen::MatrixXd& v, Fn&& fn) {
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      if (std::isfinite(v(i, j))) fn(v(i, j));
}

}  // namespace detail

/// Grand mean over all cells of the index sample.
inline double mean_index(const IndexSampleMatrix& s) {
  double sum = 0.0;
  long count = 0;
  detail::for_each_finite(s.values, [&](double v) {
    sum += v;
    ++count;
  });
  if (count == 0) throw input_error("mean_index: empty sample");
  return sum / count;
}

/// Sample variance over all cells, divisor N_Z * B - 1.
inline double var_total(const IndexSampleMatrix& s) {
  const double mean = mean_index(s);
  double acc = 0.0;
  long count = 0;
  detail::for_each_finite(s.values, [&](double v) {
    acc += (v - mean) * (v - mean);
    ++count;
  });
  if (count < 2) throw input_error("var_total: need at least 2 cells");
  return acc / (count - 1);
}

/// Metamodel variance share: mean over bootstrap columns of the
/// across-realization variance.
inline double var_metamodel(const IndexSampleMatrix& s) {
  if (s.n_z() < 2) throw input_error("var_metamodel: need N_Z >= 2");
  double acc = 0.0;
  for (int l = 0; l < s.b(); ++l) {
    const double mean = s.values.col(l).mean();
    acc += (s.values.col(l).array() - mean).square().sum() / (s.n_z() - 1);
  }
  return acc / s.b();
}

/// Monte-Carlo variance share: mean over realizations of the
/// across-bootstrap variance.
inline double var_mc(const IndexSampleMatrix& s) {
  if (s.b() < 2) throw input_error("var_mc: need B >= 2");
  double acc = 0.0;
  for (int k = 0; k < s.n_z(); ++k) {
    const double mean = s.values.row(k).mean();
    acc += (s.values.row(k).array() - mean).square().sum() / (s.b() - 1);
  }
  return acc / s.n_z();
}

inline UncertaintyBudget uncertainty_budget(const IndexSampleMatrix& s) {
  UncertaintyBudget b;
  b.var_total = var_total(s);
  b.var_metamodel = var_metamodel(s);
  b.var_mc = var_mc(s);
  if (b.var_metamodel > 1.2 * b.var_mc)
    b.regime = VarianceRegime::metamodel_dominated;
  else if (b.var_mc > 1.2 * b.var_metamodel)
    b.regime = VarianceRegime::mc_dominated;
  else
    b.regime = VarianceRegime::balanced;
  return b;
}

enum class QuantileMode { full, metamodel_only };

/// Empirical quantiles (linear interpolation between order statistics)
/// from all cells, or from the un-bootstrapped column only.
inline std::vector<double> quantiles(const IndexSampleMatrix& s,
                                     const std::vector<double>& levels,
                                     QuantileMode mode = QuantileMode::full) {
  std::vector<double> cells;
  if (mode == QuantileMode::full) {
    cells.reserve(static_cast<size_t>(s.n_z()) * s.b());
    detail::for_each_finite(s.values, [&](double v) { cells.push_back(v); });
  } else {
    for (int k = 0; k < s.n_z(); ++k)
      if (std::isfinite(s.values(k, 0))) cells.push_back(s.values(k, 0));
  }
  if (cells.empty()) throw input_error("quantiles: empty selection");
  std::sort(cells.begin(), cells.end());
  std::vector<double> out;
  out.reserve(levels.size());
  for (double q : levels) {
    if (q < 0.0 || q > 1.0) throw input_error("quantiles: level outside [0,1]");
    const double pos = q * (cells.size() - 1);
    const size_t i = static_cast<size_t>(pos);
    const double frac = pos - i;
    out.push_back(i + 1 < cells.size()
                      ? cells[i] * (1.0 - frac) + cells[i + 1] * frac
                      : cells[i]);
  }
  return out;
}

namespace detail {

/// Estimator rows for the stacked path values of one realization; shared
/// by the kriging and multi-fidelity drivers.
inline void estimator_rows(EstimatorKind kind, const Eigen::VectorXd& path,
                           int m, const std::vector<std::vector<int>>& rows,
                           Eigen::MatrixXd& out, int k, int& degenerate) {
  PairedEvaluations ev;
  ev.zX = path.head(m);
  ev.zX_tilde = path.segment(m, m);
  if (kind == EstimatorKind::mauntz) ev.zX_tilde2 = path.segment(2 * m, m);
  for (size_t l = 0; l < rows.size(); ++l) {
    try {
      out(k, static_cast<int>(l)) = estimate(kind, ev, rows[l].data());
    } catch (const degenerate_output_error&) {
      out(k, static_cast<int>(l)) = std::numeric_limits<double>::quiet_NaN();
      ++degenerate;
    }
  }
}

inline Eigen::MatrixXd stack_pick_freeze(const PickFreezeDesign& pf,
                                         bool mauntz) {
  const int m = pf.m();
  Eigen::MatrixXd pts((mauntz ? 3 : 2) * m, pf.X.cols());
  pts.topRows(m) = pf.X;
  pts.middleRows(m, m) = pf.X_tilde;
  if (mauntz) pts.bottomRows(m) = pf.X_tilde2;
  return pts;
}

/// Collapse bitwise-identical rows (a full freeze duplicates the whole X
/// block). Sampling on unique rows keeps the duplicate pairs perfectly
/// coupled instead of decorrelating them through the nugget jitter, and
/// spares the sampler a numerically singular correlation matrix.
struct RowDedup {
  Eigen::MatrixXd unique;
  std::vector<int> map;  // original row -> unique row
  bool trivial = true;
};

inline RowDedup dedup_rows(const Eigen::MatrixXd& pts) {
  struct Hash {
    size_t operator()(const std::string& s) const {
      return std::hash<std::string>{}(s);
    }
  };
  RowDedup out;
  const int n = static_cast<int>(pts.rows());
  const int d = static_cast<int>(pts.cols());
  out.map.resize(n);
  std::unordered_map<std::string, int, Hash> seen;
  seen.reserve(n);
  std::vector<int> keep;
  keep.reserve(n);
  std::string key(static_cast<size_t>(d) * sizeof(double), '\0');
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j)
      std::memcpy(key.data() + j * sizeof(double), &pts(i, j),
                  sizeof(double));
    auto [it, inserted] = seen.emplace(key, static_cast<int>(keep.size()));
    if (inserted) keep.push_back(i);
    out.map[i] = it->second;
  }
  out.trivial = static_cast<int>(keep.size()) == n;
  if (!out.trivial) {
    out.unique.resize(keep.size(), d);
    for (size_t k = 0; k < keep.size(); ++k)
      out.unique.row(static_cast<int>(k)) = pts.row(keep[k]);
  }
  return out;
}

inline Eigen::MatrixXd expand_rows(const Eigen::MatrixXd& values,
                                   const std::vector<int>& map) {
  Eigen::MatrixXd out(map.size(), values.cols());
  for (size_t i = 0; i < map.size(); ++i)
    out.row(static_cast<int>(i)) = values.row(map[i]);
  return out;
}

}  // namespace detail

/// Distribution of the kriging-based Sobol index estimator: one
/// pick-freeze design, N_Z conditional GP realizations on it, B shared
/// bootstrap re-pairings per realization.
inline IndexSampleMatrix algorithm1(const KrigingModel& model,
                                    const InputDistribution& dist,
                                    const std::vector<int>& u, int m, int N_Z,
                                    int B, EstimatorKind estimator,
                                    std::uint64_t seed,
                                    Algorithm1Options opt = {}) {
  if (m < 2 || N_Z < 1 || B < 1)
    throw input_error("algorithm1: need m >= 2, N_Z >= 1, B >= 1");
  const bool mauntz = estimator == EstimatorKind::mauntz;
  const PickFreezeDesign pf =
      pick_freeze(dist, u, m, substream_seed(seed, 0), mauntz);
  const auto rows = bootstrap_indices(m, B, substream_seed(seed, 1));

  PathSamplerOptions popt = opt.path;
  popt.threads = opt.threads;
  Eigen::MatrixXd stacked = detail::stack_pick_freeze(pf, mauntz);
  detail::RowDedup dd = detail::dedup_rows(stacked);
  if (!dd.trivial) stacked = std::move(dd.unique);
  ConditionalPathSampler sampler(model, std::move(stacked),
                                 ConditioningMode::universal, popt);
  Eigen::MatrixXd paths = sampler.sample_block(substream_seed(seed, 2), N_Z);
  if (!dd.trivial) paths = detail::expand_rows(paths, dd.map);

  IndexSampleMatrix out;
  out.values.resize(N_Z, B);
  out.u = u;
  out.m = m;
  out.estimator = estimator;
  out.seed = seed;
  std::vector<int> degenerate(N_Z, 0);
  parallel_chunks(N_Z, opt.threads, [&](int lo, int hi) {
    for (int k = lo; k < hi; ++k)
      detail::estimator_rows(estimator, paths.col(k), m, rows, out.values, k,
                             degenerate[k]);
  });
  for (int d : degenerate) out.degenerate_cells += d;
  if (out.degenerate_cells >
      opt.max_degenerate_fraction * static_cast<double>(N_Z) * B)
    throw degenerate_output_error(
        "algorithm1: too many degenerate estimator cells (" +
        std::to_string(out.degenerate_cells) + ")");
  return out;
}

struct BalanceResult {
  int m = 0;
  bool balanced = false;
  std::vector<std::pair<int, UncertaintyBudget>> trace;
};

/// Grows m until the metamodel variance share is no longer dominated by
/// the Monte-Carlo share (the minimal-particles rule).
inline BalanceResult balance_m(const KrigingModel& model,
                               const InputDistribution& dist,
                               const std::vector<int>& u, int m0,
                               double growth, int N_Z, int B,
                               EstimatorKind estimator, std::uint64_t seed,
                               int m_max, Algorithm1Options opt = {}) {
  if (m0 < 2 || !(growth > 1.0))
    throw input_error("balance_m: need m0 >= 2, growth > 1");
  BalanceResult res;
  int m = std::min(m0, m_max);
  while (true) {
    const IndexSampleMatrix s =
        algorithm1(model, dist, u, m, N_Z, B, estimator, seed, opt);
    const UncertaintyBudget b = uncertainty_budget(s);
    res.trace.emplace_back(m, b);
    if (b.var_metamodel >= b.var_mc) {
      res.m = m;
      res.balanced = true;
      return res;
    }
    if (m >= m_max) {
      res.m = m_max;
      res.balanced = false;
      return res;
    }
    m = std::min(static_cast<int>(std::ceil(m * growth)), m_max);
  }
}

namespace detail {

/// Sum of all pairwise correlations between two point sets, blocked to
/// avoid materializing the m x m matrix.
inline double sum_cross_corr(const KernelSpec& spec, const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b, int threads = 1) {
  const int na = static_cast<int>(a.rows());
  std::vector<double> partial(std::max(1, threads), 0.0);
  const int chunks = std::max(1, threads);
  parallel_chunks(chunks, threads, [&](int clo, int chi) {
    for (int c = clo; c < chi; ++c) {
      const int lo = static_cast<int>(static_cast<long>(na) * c / chunks);
      const int hi = static_cast<int>(static_cast<long>(na) * (c + 1) / chunks);
      double acc = 0.0;
      for (int i = lo; i < hi; ++i)
        for (int j = 0; j < b.rows(); ++j)
          acc += correlation(spec, a.row(i), b.row(j));
      partial[c] = acc;
    }
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

/// Pieces of sum_i s2(A_i, B_i) and sum_{ij} s2(A_i, B_j) for one model,
/// computed through the cached factorization with batched right-hand
/// sides.
struct CovSums {
  double diag = 0.0;       // (1/m) sum_i s2(A_i, B_i)
  double full = 0.0;       // (1/m^2) sum_ij s2(A_i, B_j)
};

/// Generic bordered-covariance sums for a level with regression matrix H
/// (plain kriging: H = F, Ha/Hb = trend values). Ha/Hb are the regression
/// function values at the rows of A/B.
inline CovSums bordered_cov_sums(
    const KernelSpec& kernel, const Eigen::MatrixXd& design_points,
    const Eigen::LLT<Eigen::MatrixXd>& lltR, const Eigen::MatrixXd& RinvH,
    const Eigen::LDLT<Eigen::MatrixXd>& glsH, double sigma2,
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
    const Eigen::MatrixXd& Ha, const Eigen::MatrixXd& Hb, int threads = 1) {
  const int m = static_cast<int>(A.rows());
  const Eigen::MatrixXd Ka = cross_corr_matrix(kernel, A, design_points);
  const Eigen::MatrixXd Kb = cross_corr_matrix(kernel, B, design_points);
  const Eigen::MatrixXd Ua = Ha - Ka * RinvH;  // m x p
  const Eigen::MatrixXd Ub = Hb - Kb * RinvH;
  const Eigen::MatrixXd RinvKb = lltR.solve(Kb.transpose());  // n x m
  const Eigen::MatrixXd GinvUb = glsH.solve(Ub.transpose());  // p x m

  CovSums out;
  double diag = 0.0;
  for (int i = 0; i < m; ++i) {
    diag += correlation(kernel, A.row(i), B.row(i)) -
            Ka.row(i).dot(RinvKb.col(i)) + Ua.row(i).dot(GinvUb.col(i));
  }
  out.diag = sigma2 * diag / m;

  const Eigen::VectorXd ka_sum = Ka.colwise().sum();
  const Eigen::VectorXd kb_sum = Kb.colwise().sum();
  const Eigen::VectorXd ua_sum = Ua.colwise().sum();
  const Eigen::VectorXd ub_sum = Ub.colwise().sum();
  const double full = sum_cross_corr(kernel, A, B, threads) -
                      ka_sum.dot(lltR.solve(kb_sum)) +
                      ua_sum.dot(glsH.solve(ub_sum));
  out.full = sigma2 * full / (static_cast<double>(m) * m);
  return out;
}

inline CovSums predictive_cov_sums(const KrigingModel& model,
                                   const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& B, int threads = 1) {
  return bordered_cov_sums(model.kernel, model.design.points, model.lltR,
                           model.RinvF, model.gls, model.sigma2, A, B,
                           model.trend.matrix(A), model.trend.matrix(B),
                           threads);
}

}  // namespace detail

/// Ratio-of-expectations index: predictive covariance plus mean-product
/// double sums, evaluated through vectorized identities instead of the
/// naive O(m^2) expansion.
inline double first_approach_estimate(const KrigingModel& model,
                                      const PickFreezeDesign& pf,
                                      int threads = 1) {
  const int m = pf.m();
  const Eigen::VectorXd mx = predict_mean_batch(model, pf.X);
  const Eigen::VectorXd mxt = predict_mean_batch(model, pf.X_tilde);
  const auto num_cov = detail::predictive_cov_sums(model, pf.X, pf.X_tilde,
                                                   threads);
  const auto den_cov = detail::predictive_cov_sums(model, pf.X, pf.X, threads);
  const double num = num_cov.diag + mx.dot(mxt) / m - num_cov.full -
                     (mx.sum() / m) * (mxt.sum() / m);
  const double den = den_cov.diag + mx.dot(mx) / m - den_cov.full -
                     (mx.sum() / m) * (mx.sum() / m);
  if (std::abs(den) < 1e-12 * std::max(mx.squaredNorm() / m, 1e-300))
    throw degenerate_output_error("first_approach: zero denominator");
  return num / den;
}

/// Janon estimator applied to predictive-mean evaluations.
inline double plugin_estimate(const KrigingModel& model,
                              const PickFreezeDesign& pf) {
  PairedEvaluations ev;
  ev.zX = predict_mean_batch(model, pf.X);
  ev.zX_tilde = predict_mean_batch(model, pf.X_tilde);
  return estimate_janon(ev);
}

}  // namespace gpsobol
