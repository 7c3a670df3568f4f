#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "gpsobol/errors.hpp"
#include "gpsobol/rng.hpp"

namespace gpsobol {

/// Set of experiment points in the normalized cube [0,1]^d, one per row.
struct Design {
  Eigen::MatrixXd points;

  int n() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

/// Product measure with uniform(a_i, b_i) marginals.
struct InputDistribution {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static InputDistribution unit_cube(int d) {
    return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
  }

  int dim() const { return static_cast<int>(lower.size()); }

  void validate() const {
    if (lower.size() != upper.size() || lower.size() == 0)
      throw input_error("distribution: bad marginal vectors");
    if ((lower.array() >= upper.array()).any())
      throw input_error("distribution: requires a_i < b_i");
  }

  Eigen::MatrixXd sample(int m, Rng& rng) const {
    Eigen::MatrixXd x(m, dim());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < dim(); ++j)
        x(i, j) = lower[j] +
                  (upper[j] - lower[j]) *
                      std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return x;
  }

  /// Maps unit-cube coordinates to the native space, row-wise.
  Eigen::MatrixXd from_unit(const Eigen::MatrixXd& u) const {
    Eigen::MatrixXd x = u;
    for (int j = 0; j < dim(); ++j)
      x.col(j) = lower[j] + (upper[j] - lower[j]) * u.col(j).array();
    return x;
  }
};

/// Paired pick-freeze point sets: X and X_tilde share the columns in the
/// frozen subset u exactly; the optional third set redraws the u block
/// independently (used by the Mauntz-style estimator).
struct PickFreezeDesign {
  std::vector<int> frozen;  // 0-based column indices
  Eigen::MatrixXd X;
  Eigen::MatrixXd X_tilde;
  Eigen::MatrixXd X_tilde2;  // 0 rows when absent
  bool has_mauntz() const { return X_tilde2.rows() > 0; }
  int m() const { return static_cast<int>(X.rows()); }
};

/// Latin hypercube sample: each column has exactly one point per stratum.
inline Design lhs(int n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw input_error("lhs: n and d must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd pts(n, d);
  std::vector<int> perm(n);
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int i = 0; i < n; ++i) pts(i, j) = (perm[i] + ud(rng)) / n;
  }
  return {std::move(pts)};
}

/// Centered L2 discrepancy (Hickernell closed form), returned as the
/// square root of the discrepancy functional.
inline double centered_l2_discrepancy(const Design& design) {
  const int n = design.n(), d = design.dim();
  const Eigen::MatrixXd& x = design.points;
  double sum1 = 0.0;
  for (int i = 0; i < n; ++i) {
    double prod = 1.0;
    for (int k = 0; k < d; ++k) {
      const double a = std::abs(x(i, k) - 0.5);
      prod *= 1.0 + 0.5 * a - 0.5 * a * a;
    }
    sum1 += prod;
  }
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double prod = 1.0;
      for (int k = 0; k < d; ++k) {
        const double ai = std::abs(x(i, k) - 0.5);
        const double aj = std::abs(x(j, k) - 0.5);
        prod *= 1.0 + 0.5 * ai + 0.5 * aj - 0.5 * std::abs(x(i, k) - x(j, k));
      }
      sum2 += prod;
    }
  }
  const double val = std::pow(13.0 / 12.0, d) - (2.0 / n) * sum1 +
                     sum2 / (static_cast<double>(n) * n);
  return std::sqrt(std::max(0.0, val));
}

/// LHS optimization by random column-wise pair exchanges with greedy
/// accept; exchanges permute stratum assignments so the LHS property is
/// preserved.
inline Design optimize_lhs(int n, int d, std::uint64_t seed, int iterations) {
  if (iterations < 0) throw input_error("optimize_lhs: negative iterations");
  Design best = lhs(n, d, seed);
  if (n < 2) return best;
  Rng rng(seed ^ 0x5eedc0ffeeULL);
  double best_disc = centered_l2_discrepancy(best);
  std::uniform_int_distribution<int> col(0, d - 1), row(0, n - 1);
  for (int it = 0; it < iterations; ++it) {
    const int j = col(rng);
    int i1 = row(rng), i2 = row(rng);
    if (i1 == i2) continue;
    std::swap(best.points(i1, j), best.points(i2, j));
    const double disc = centered_l2_discrepancy(best);
    if (disc <= best_disc) {
      best_disc = disc;
    } else {
      std::swap(best.points(i1, j), best.points(i2, j));
    }
  }
  return best;
}

/// Builds nested designs from a candidate coarse design and a fine design:
/// for each fine point in row order, its nearest remaining candidate point
/// (Euclidean, ties to the lowest index) is removed; the coarse design is
/// the fine design concatenated with the survivors.
inline std::pair<Design, Design> nested_union(const Design& coarse_candidate,
                                              const Design& fine) {
  if (fine.n() > 0 && coarse_candidate.dim() != fine.dim())
    throw input_error("nested_union: dimension mismatch");
  if (coarse_candidate.n() < fine.n())
    throw input_error("nested_union: candidate smaller than fine design");
  std::vector<bool> removed(coarse_candidate.n(), false);
  for (int f = 0; f < fine.n(); ++f) {
    int arg = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < coarse_candidate.n(); ++c) {
      if (removed[c]) continue;
      const double dist =
          (coarse_candidate.points.row(c) - fine.points.row(f)).squaredNorm();
      if (dist < best) {
        best = dist;
        arg = c;
      }
    }
    removed[arg] = true;
  }
  const int survivors =
      coarse_candidate.n() - static_cast<int>(fine.n());
  Eigen::MatrixXd d1(fine.n() + survivors, coarse_candidate.dim());
  d1.topRows(fine.n()) = fine.points;
  int k = fine.n();
  for (int c = 0; c < coarse_candidate.n(); ++c)
    if (!removed[c]) d1.row(k++) = coarse_candidate.points.row(c);
  return {Design{std::move(d1)}, fine};
}

/// Draws the paired pick-freeze point sets from the input measure.
inline PickFreezeDesign pick_freeze(const InputDistribution& dist,
                                    const std::vector<int>& frozen, int m,
                                    std::uint64_t seed, bool with_mauntz) {
  dist.validate();
  if (frozen.empty()) throw input_error("pick_freeze: empty frozen subset");
  if (m < 2) throw input_error("pick_freeze: m must be >= 2");
  std::set<int> u(frozen.begin(), frozen.end());
  for (int j : u)
    if (j < 0 || j >= dist.dim())
      throw input_error("pick_freeze: frozen index out of range");
  Rng rng(seed);
  Eigen::MatrixXd X = dist.sample(m, rng);
  Eigen::MatrixXd Xt = dist.sample(m, rng);
  for (int j : u) Xt.col(j) = X.col(j);  // bit-identical shared block
  PickFreezeDesign pf{std::vector<int>(u.begin(), u.end()), std::move(X),
                      std::move(Xt), Eigen::MatrixXd(0, dist.dim())};
  if (with_mauntz) {
    Eigen::MatrixXd Xtt = dist.sample(m, rng);
    // complement block shared with X_tilde, frozen block redrawn
    for (int j = 0; j < dist.dim(); ++j)
      if (!u.count(j)) Xtt.col(j) = pf.X_tilde.col(j);
    pf.X_tilde2 = std::move(Xtt);
  }
  return pf;
}

}  // namespace gpsobol
