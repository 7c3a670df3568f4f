#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace gpsobol {

/// Box-constrained Nelder-Mead. Good enough for the small smooth
/// likelihood surfaces fitted here (d <= 10); multi-start handles the
/// multimodality.
inline Eigen::VectorXd nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    Eigen::VectorXd x0, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
    int max_iter = 200, double tol = 1e-8) {
  const int d = static_cast<int>(x0.size());
  auto clamp = [&](Eigen::VectorXd x) {
    return x.cwiseMax(lo).cwiseMin(hi).eval();
  };
  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> fval;
  simplex.push_back(clamp(x0));
  fval.push_back(f(simplex[0]));
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd xi = simplex[0];
    const double step = 0.1 * (hi[i] - lo[i]);
    xi[i] += (xi[i] + step <= hi[i]) ? step : -step;
    simplex.push_back(clamp(xi));
    fval.push_back(f(simplex.back()));
  }
  auto order = [&] {
    for (size_t i = 1; i < simplex.size(); ++i)
      for (size_t j = i; j > 0 && fval[j] < fval[j - 1]; --j) {
        std::swap(fval[j], fval[j - 1]);
        std::swap(simplex[j], simplex[j - 1]);
      }
  };
  order();
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(fval.back() - fval.front()) <
        tol * (1.0 + std::abs(fval.front())))
      break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) centroid += simplex[i];
    centroid /= d;
    const Eigen::VectorXd& worst = simplex.back();
    Eigen::VectorXd xr = clamp(centroid + (centroid - worst));
    const double fr = f(xr);
    if (fr < fval.front()) {
      Eigen::VectorXd xe = clamp(centroid + 2.0 * (centroid - worst));
      const double fe = f(xe);
      if (fe < fr) {
        simplex.back() = xe;
        fval.back() = fe;
      } else {
        simplex.back() = xr;
        fval.back() = fr;
      }
    } else if (fr < fval[d - 1]) {
      simplex.back() = xr;
      fval.back() = fr;
    } else {
      Eigen::VectorXd xc = clamp(centroid + 0.5 * (worst - centroid));
      const double fc = f(xc);
      if (fc < fval.back()) {
        simplex.back() = xc;
        fval.back() = fc;
      } else {
        for (int i = 1; i <= d; ++i) {
          simplex[i] = clamp(simplex[0] + 0.5 * (simplex[i] - simplex[0]));
          fval[i] = f(simplex[i]);
        }
      }
    }
    order();
  }
  return simplex.front();
}

}  // namespace gpsobol
