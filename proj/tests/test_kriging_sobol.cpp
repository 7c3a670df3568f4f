#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "gpsobol/design.hpp"
#include "gpsobol/kriging.hpp"
#include "gpsobol/kriging_sobol.hpp"

using namespace gpsobol;

namespace {

KrigingModel coordinate_model(int n = 120, std::uint64_t seed = 2) {
  // data from z(x) = x1 in d = 2; the index of x1 is 1, of x2 is 0
  Design d = lhs(n, 2, seed);
  Eigen::VectorXd z = d.points.col(0);
  FitOptions opt;
  opt.fixed_length_scales = Eigen::VectorXd::Constant(2, 1.0);
  return fit(d, z, TrendBasis{TrendKind::linear}, opt);
}

IndexSampleMatrix synthetic_matrix(int nz, int b, std::uint64_t seed) {
  IndexSampleMatrix s;
  s.values.resize(nz, b);
  Rng rng(seed);
  std::normal_distribution<double> nd;
  for (int k = 0; k < nz; ++k)
    for (int l = 0; l < b; ++l) s.values(k, l) = nd(rng);
  return s;
}

}  // namespace

TEST_CASE("mean and variance summaries match direct summation") {
  IndexSampleMatrix s = synthetic_matrix(13, 7, 5);
  double sum = 0;
  for (int k = 0; k < 13; ++k)
    for (int l = 0; l < 7; ++l) sum += s.values(k, l);
  const double mean = sum / (13 * 7);
  CHECK(mean_index(s) == doctest::Approx(mean).epsilon(1e-13));
  double ss = 0;
  for (int k = 0; k < 13; ++k)
    for (int l = 0; l < 7; ++l)
      ss += (s.values(k, l) - mean) * (s.values(k, l) - mean);
  CHECK(var_total(s) == doctest::Approx(ss / (13 * 7 - 1)).epsilon(1e-12));

  // var_metamodel: mean over columns of the across-k variance
  double vm = 0;
  for (int l = 0; l < 7; ++l) {
    const double cm = s.values.col(l).mean();
    vm += (s.values.col(l).array() - cm).square().sum() / (13 - 1);
  }
  CHECK(var_metamodel(s) == doctest::Approx(vm / 7).epsilon(1e-12));
  double vc = 0;
  for (int k = 0; k < 13; ++k) {
    const double rm = s.values.row(k).mean();
    vc += (s.values.row(k).array() - rm).square().sum() / (7 - 1);
  }
  CHECK(var_mc(s) == doctest::Approx(vc / 13).epsilon(1e-12));
}

TEST_CASE("additively structured matrices satisfy the variance "
          "decomposition exactly") {
  // values(k, l) = a_k + c_l: across-k variance is var(a) in every
  // column, across-l variance is var(c) in every row, and the total
  // splits exactly
  const int nz = 9, b = 11;
  IndexSampleMatrix s;
  s.values.resize(nz, b);
  Rng rng(3);
  std::normal_distribution<double> nd;
  Eigen::VectorXd a(nz), c(b);
  for (int k = 0; k < nz; ++k) a[k] = nd(rng);
  for (int l = 0; l < b; ++l) c[l] = nd(rng);
  for (int k = 0; k < nz; ++k)
    for (int l = 0; l < b; ++l) s.values(k, l) = a[k] + c[l];
  const double va = (a.array() - a.mean()).square().sum() / (nz - 1);
  const double vc = (c.array() - c.mean()).square().sum() / (b - 1);
  CHECK(var_metamodel(s) == doctest::Approx(va).epsilon(1e-12));
  CHECK(var_mc(s) == doctest::Approx(vc).epsilon(1e-12));
  // grand-total identity for the additive structure
  const double expected_total =
      (va * (nz - 1) * b + vc * (b - 1) * nz) / (nz * b - 1);
  CHECK(var_total(s) == doctest::Approx(expected_total).epsilon(1e-12));
}

TEST_CASE("uncertainty budget labels the dominant source") {
  IndexSampleMatrix s;
  s.values.resize(4, 4);
  Eigen::VectorXd a(4);
  a << 0, 10, 20, 30;
  for (int k = 0; k < 4; ++k)
    for (int l = 0; l < 4; ++l) s.values(k, l) = a[k] + 0.01 * l;
  CHECK(uncertainty_budget(s).regime == VarianceRegime::metamodel_dominated);
  s.values.transposeInPlace();
  CHECK(uncertainty_budget(s).regime == VarianceRegime::mc_dominated);
}

TEST_CASE("quantiles against the sorted-order oracle") {
  IndexSampleMatrix s = synthetic_matrix(10, 10, 9);
  std::vector<double> sorted(s.values.data(), s.values.data() + 100);
  std::sort(sorted.begin(), sorted.end());
  auto q = quantiles(s, {0.0, 0.5, 1.0});
  CHECK(q[0] == sorted.front());
  CHECK(q[2] == sorted.back());
  CHECK(q[1] == doctest::Approx((sorted[49] + sorted[50]) / 2));
  // metamodel-only mode uses the first column
  std::vector<double> col0(s.values.col(0).data(),
                           s.values.col(0).data() + 10);
  std::sort(col0.begin(), col0.end());
  auto qm = quantiles(s, {0.0, 1.0}, QuantileMode::metamodel_only);
  CHECK(qm[0] == col0.front());
  CHECK(qm[1] == col0.back());
  // constant matrix: every quantile equals the constant
  IndexSampleMatrix cs;
  cs.values = Eigen::MatrixXd::Constant(3, 3, 0.7);
  for (double v : quantiles(cs, {0.025, 0.5, 0.975}))
    CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("algorithm1 on a coordinate function finds index 1 and 0") {
  KrigingModel m = coordinate_model(200);
  InputDistribution dist = InputDistribution::unit_cube(2);
  IndexSampleMatrix s1 = algorithm1(m, dist, {0}, 4000, 30, 30,
                                    EstimatorKind::janon, 11);
  CHECK(mean_index(s1) == doctest::Approx(1.0).epsilon(0.05));
  IndexSampleMatrix s2 = algorithm1(m, dist, {1}, 4000, 30, 30,
                                    EstimatorKind::janon, 11);
  CHECK(std::abs(mean_index(s2)) < 0.05);
}

TEST_CASE("full freeze gives the constant-1 matrix") {
  KrigingModel m = coordinate_model(40);
  InputDistribution dist = InputDistribution::unit_cube(2);
  for (auto kind : {EstimatorKind::sobol93, EstimatorKind::janon}) {
    IndexSampleMatrix s = algorithm1(m, dist, {0, 1}, 200, 5, 8, kind, 3);
    CHECK((s.values.array() - 1.0).abs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("algorithm1 is deterministic and thread-count independent") {
  KrigingModel m = coordinate_model(40);
  InputDistribution dist = InputDistribution::unit_cube(2);
  Algorithm1Options o1, o4;
  o1.threads = 1;
  o4.threads = 4;
  IndexSampleMatrix a = algorithm1(m, dist, {0}, 300, 6, 10,
                                   EstimatorKind::janon, 42, o1);
  IndexSampleMatrix b = algorithm1(m, dist, {0}, 300, 6, 10,
                                   EstimatorKind::janon, 42, o4);
  CHECK(a.values == b.values);
  IndexSampleMatrix c = algorithm1(m, dist, {0}, 300, 6, 10,
                                   EstimatorKind::janon, 43, o1);
  CHECK(a.values != c.values);
}

TEST_CASE("N_Z = 1, B = 1 reduces to a single estimator evaluation") {
  KrigingModel m = coordinate_model(40);
  InputDistribution dist = InputDistribution::unit_cube(2);
  IndexSampleMatrix s = algorithm1(m, dist, {0}, 100, 1, 1,
                                   EstimatorKind::janon, 7);
  CHECK(s.values.rows() == 1);
  CHECK(s.values.cols() == 1);
  CHECK(std::isfinite(s.values(0, 0)));
}

TEST_CASE("balance_m returns a trace and respects m_max") {
  // near-exact surrogate: metamodel variance tiny, loop runs to m_max
  KrigingModel m = coordinate_model(200);
  InputDistribution dist = InputDistribution::unit_cube(2);
  BalanceResult r = balance_m(m, dist, {0}, 50, 2.0, 4, 8,
                              EstimatorKind::janon, 5, 200);
  CHECK(!r.trace.empty());
  CHECK(r.trace.back().first <= 200);
  if (!r.balanced) CHECK(r.m == 0);
  for (size_t i = 1; i < r.trace.size(); ++i)
    CHECK(r.trace[i].first > r.trace[i - 1].first);
}

TEST_CASE("first_approach m = 2 equals the hand-computed double sums") {
  KrigingModel m = coordinate_model(25);
  PickFreezeDesign pf;
  pf.frozen = {0};
  pf.X.resize(2, 2);
  pf.X << 0.2, 0.3, 0.7, 0.9;
  pf.X_tilde = pf.X;
  pf.X_tilde(0, 1) = 0.55;
  pf.X_tilde(1, 1) = 0.15;
  pf.X_tilde2.resize(0, 2);

  auto mn = [&](const Eigen::RowVector2d& x) {
    return predict_mean(m, x);
  };
  auto s2 = [&](const Eigen::RowVector2d& x, const Eigen::RowVector2d& y) {
    return predict_cov(m, x, y);
  };
  Eigen::RowVector2d X0 = pf.X.row(0), X1 = pf.X.row(1);
  Eigen::RowVector2d T0 = pf.X_tilde.row(0), T1 = pf.X_tilde.row(1);
  const double mm = 2.0;
  double num = (s2(X0, T0) + mn(X0) * mn(T0) + s2(X1, T1) +
                mn(X1) * mn(T1)) / mm;
  num -= (s2(X0, T0) + mn(X0) * mn(T0) + s2(X0, T1) + mn(X0) * mn(T1) +
          s2(X1, T0) + mn(X1) * mn(T0) + s2(X1, T1) + mn(X1) * mn(T1)) /
         (mm * mm);
  double den = (s2(X0, X0) + mn(X0) * mn(X0) + s2(X1, X1) +
                mn(X1) * mn(X1)) / mm;
  den -= (s2(X0, X0) + mn(X0) * mn(X0) + s2(X0, X1) + mn(X0) * mn(X1) +
          s2(X1, X0) + mn(X1) * mn(X0) + s2(X1, X1) + mn(X1) * mn(X1)) /
         (mm * mm);
  CHECK(first_approach_estimate(m, pf) ==
        doctest::Approx(num / den).epsilon(1e-10));
}

TEST_CASE("zero-variance model: first_approach reduces to sobol93 on the "
          "predictive mean") {
  // fit on samples of the model's own smooth predictive mean with a
  // dense design: s_n^2 is numerically negligible there
  KrigingModel m = coordinate_model(150);
  InputDistribution dist = InputDistribution::unit_cube(2);
  PickFreezeDesign pf = pick_freeze(dist, {0}, 400, 19, false);
  PairedEvaluations ev;
  ev.zX = predict_mean_batch(m, pf.X);
  ev.zX_tilde = predict_mean_batch(m, pf.X_tilde);
  CHECK(first_approach_estimate(m, pf) ==
        doctest::Approx(estimate_sobol93(ev)).epsilon(1e-3));
}

TEST_CASE("plugin_estimate is janon on the predictive means") {
  KrigingModel m = coordinate_model(60);
  InputDistribution dist = InputDistribution::unit_cube(2);
  PickFreezeDesign pf = pick_freeze(dist, {0}, 300, 23, false);
  PairedEvaluations ev;
  ev.zX = predict_mean_batch(m, pf.X);
  ev.zX_tilde = predict_mean_batch(m, pf.X_tilde);
  CHECK(plugin_estimate(m, pf) == doctest::Approx(estimate_janon(ev)));
}

TEST_CASE("bordered covariance sums match naive double loops") {
  KrigingModel m = coordinate_model(20);
  Design a = lhs(15, 2, 31);
  Design b = lhs(15, 2, 32);
  auto cs = detail::predictive_cov_sums(m, a.points, b.points);
  double diag = 0, full = 0;
  for (int i = 0; i < 15; ++i) {
    diag += predict_cov(m, a.points.row(i), b.points.row(i));
    for (int j = 0; j < 15; ++j)
      full += predict_cov(m, a.points.row(i), b.points.row(j));
  }
  CHECK(cs.diag == doctest::Approx(diag / 15).epsilon(1e-9));
  CHECK(cs.full == doctest::Approx(full / 225).epsilon(1e-9));
}

TEST_CASE("summary input validation") {
  KrigingModel m = coordinate_model(30);
  InputDistribution dist = InputDistribution::unit_cube(2);
  CHECK_THROWS_AS(algorithm1(m, dist, {0}, 1, 2, 2, EstimatorKind::janon, 1),
                  input_error);
  IndexSampleMatrix s = synthetic_matrix(3, 3, 1);
  CHECK_THROWS_AS(quantiles(s, {1.5}), input_error);
}
