#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gpsobol/design.hpp"
#include "gpsobol/errors.hpp"
#include "gpsobol/rng.hpp"

namespace gpsobol {

enum class EstimatorKind { sobol93, janon, mauntz };

inline EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "sobol93") return EstimatorKind::sobol93;
  if (s == "janon") return EstimatorKind::janon;
  if (s == "mauntz") return EstimatorKind::mauntz;
  throw input_error("unknown estimator: " + s);
}

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::sobol93: return "sobol93";
    case EstimatorKind::janon: return "janon";
    default: return "mauntz";
  }
}

/// Function values on the paired pick-freeze point sets.
struct PairedEvaluations {
  Eigen::VectorXd zX;
  Eigen::VectorXd zX_tilde;
  Eigen::VectorXd zX_tilde2;  // empty unless the Mauntz estimator is used
  int m() const { return static_cast<int>(zX.size()); }
};

namespace detail {

inline void check_denominator(double denom, double scale) {
  if (std::abs(denom) < 1e-12 * std::max(scale, 1e-300))
    throw degenerate_output_error("sobol estimator: zero output variance");
}

/// Accumulated sums over (possibly resampled) pick-freeze pairs. The same
/// index row is applied to every vector, preserving the pairing.
struct PairSums {
  double sx = 0, sxt = 0, sxx = 0, sxtxt = 0, sxxt = 0, sxxtt = 0;
  int m = 0;
};

inline PairSums accumulate(const PairedEvaluations& ev, const int* idx,
                           int count) {
  PairSums s;
  s.m = count;
  const bool third = ev.zX_tilde2.size() > 0;
  for (int i = 0; i < count; ++i) {
    const int j = idx ? idx[i] : i;
    const double a = ev.zX[j], b = ev.zX_tilde[j];
    s.sx += a;
    s.sxt += b;
    s.sxx += a * a;
    s.sxtxt += b * b;
    s.sxxt += a * b;
    if (third) s.sxxtt += a * ev.zX_tilde2[j];
  }
  return s;
}

inline double sobol93(const PairSums& s) {
  const double m = s.m;
  const double num = s.sxxt / m - (s.sx / m) * (s.sxt / m);
  const double den = s.sxx / m - (s.sx / m) * (s.sx / m);
  check_denominator(den, s.sxx / m);
  return num / den;
}

inline double janon(const PairSums& s) {
  const double m = s.m;
  const double pooled = (s.sx + s.sxt) / (2.0 * m);
  const double num = s.sxxt / m - pooled * pooled;
  const double den = (s.sxx + s.sxtxt) / (2.0 * m) - pooled * pooled;
  check_denominator(den, s.sxx / m);
  return num / den;
}

inline double mauntz(const PairSums& s) {
  const double m = s.m;
  const double num = (s.sxxt - s.sxxtt) / m;
  const double den = s.sxx / m - (s.sx / m) * (s.sx / m);
  check_denominator(den, s.sxx / m);
  return num / den;
}

}  // namespace detail

/// Estimate on a resampled pairing; `idx` = nullptr means the original
/// sample order.
inline double estimate(EstimatorKind kind, const PairedEvaluations& ev,
                       const int* idx = nullptr) {
  if (ev.m() < 2) throw input_error("sobol estimator: m must be >= 2");
  if (ev.zX_tilde.size() != ev.m())
    throw input_error("sobol estimator: unequal vector lengths");
  if (kind == EstimatorKind::mauntz && ev.zX_tilde2.size() != ev.m())
    throw input_error("mauntz estimator: third sample missing");
  const auto s = detail::accumulate(ev, idx, ev.m());
  switch (kind) {
    case EstimatorKind::sobol93: return detail::sobol93(s);
    case EstimatorKind::janon: return detail::janon(s);
    default: return detail::mauntz(s);
  }
}

inline double estimate_sobol93(const PairedEvaluations& ev) {
  return estimate(EstimatorKind::sobol93, ev);
}
inline double estimate_janon(const PairedEvaluations& ev) {
  return estimate(EstimatorKind::janon, ev);
}
inline double estimate_mauntz(const PairedEvaluations& ev) {
  return estimate(EstimatorKind::mauntz, ev);
}

/// Bootstrap index rows: row 0 is the identity (the un-resampled
/// estimate), rows 1..B-1 are i.i.d. uniform draws with replacement.
inline std::vector<std::vector<int>> bootstrap_indices(int m, int B,
                                                       std::uint64_t seed) {
  if (m < 1 || B < 1) throw input_error("bootstrap_indices: m, B >= 1");
  std::vector<std::vector<int>> rows(B, std::vector<int>(m));
  for (int i = 0; i < m; ++i) rows[0][i] = i;
  Rng rng(seed);
  std::uniform_int_distribution<int> ui(0, m - 1);
  for (int l = 1; l < B; ++l)
    for (int i = 0; i < m; ++i) rows[l][i] = ui(rng);
  return rows;
}

/// Numerical check of the pick-freeze identity
/// V(E[z(X)|X^u]) = cov(z(X), z(X~)): the left side by grid quadrature,
/// the right side by sampled paired evaluations. Only meant for cheap
/// analytic functions in low dimension.
inline std::pair<double, double> prop1_check(
    const std::function<double(const Eigen::VectorXd&)>& z,
    const InputDistribution& dist, const std::vector<int>& u, int m,
    std::uint64_t seed, int grid_points_per_dim = 64) {
  dist.validate();
  const int d = dist.dim();
  std::vector<bool> in_u(d, false);
  for (int j : u) in_u[j] = true;
  std::vector<int> ud, cd;
  for (int j = 0; j < d; ++j) (in_u[j] ? ud : cd).push_back(j);
  if (ud.empty()) throw input_error("prop1_check: empty frozen subset");

  // midpoint-rule grid over the u block and the complement block
  const int G = grid_points_per_dim;
  auto grid_iterate = [&](const std::vector<int>& dims,
                          const std::function<void(const Eigen::VectorXd&)>&
                              visit) {
    const int k = static_cast<int>(dims.size());
    std::vector<int> c(k, 0);
    Eigen::VectorXd x(k);
    while (true) {
      for (int i = 0; i < k; ++i) {
        const int j = dims[i];
        x[i] = dist.lower[j] +
               (dist.upper[j] - dist.lower[j]) * (c[i] + 0.5) / G;
      }
      visit(x);
      int i = 0;
      for (; i < k; ++i) {
        if (++c[i] < G) break;
        c[i] = 0;
      }
      if (i == k) break;
    }
  };

  double mean_all = 0.0, mean_sq = 0.0;
  long count = 0;
  grid_iterate(ud, [&](const Eigen::VectorXd& xu) {
    double cond = 0.0;
    long inner = 0;
    Eigen::VectorXd full(d);
    if (cd.empty()) {
      for (size_t i = 0; i < ud.size(); ++i) full[ud[i]] = xu[i];
      cond = z(full);
      inner = 1;
    } else {
      grid_iterate(cd, [&](const Eigen::VectorXd& xc) {
        for (size_t i = 0; i < ud.size(); ++i) full[ud[i]] = xu[i];
        for (size_t i = 0; i < cd.size(); ++i) full[cd[i]] = xc[i];
        cond += z(full);
        ++inner;
      });
      cond /= inner;
    }
    mean_all += cond;
    mean_sq += cond * cond;
    ++count;
  });
  mean_all /= count;
  mean_sq /= count;
  const double lhs = mean_sq - mean_all * mean_all;

  PickFreezeDesign pf = pick_freeze(dist, u, m, seed, false);
  double sa = 0, sb = 0, sab = 0;
  for (int i = 0; i < m; ++i) {
    const double a = z(pf.X.row(i).transpose());
    const double b = z(pf.X_tilde.row(i).transpose());
    sa += a;
    sb += b;
    sab += a * b;
  }
  const double rhs = sab / m - (sa / m) * (sb / m);
  return {lhs, rhs};
}

}  // namespace gpsobol
