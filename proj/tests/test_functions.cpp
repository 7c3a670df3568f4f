#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "gpsobol/design.hpp"
#include "gpsobol/functions.hpp"
#include "gpsobol/kriging.hpp"
#include "gpsobol/multifidelity.hpp"
#include "gpsobol/serialize.hpp"

using namespace gpsobol;

TEST_CASE("ishigami closed-form values") {
  const double pi = 3.14159265358979323846;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  CHECK(ishigami(x) == doctest::Approx(0.0));
  x << pi / 2, 0.0, 0.0;
  CHECK(ishigami(x) == doctest::Approx(1.0));
  x << pi / 2, pi / 2, 0.0;
  CHECK(ishigami(x) == doctest::Approx(8.0));
  x << pi / 2, 0.0, 1.0;
  CHECK(ishigami(x) == doctest::Approx(1.1));
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(ishigami(bad), input_error);
  InputDistribution d = ishigami_distribution();
  CHECK(d.lower[0] == doctest::Approx(-pi));
  CHECK(d.upper[2] == doctest::Approx(pi));
}

TEST_CASE("tank_cheap matches the direct formula and ignores the other "
          "five inputs") {
  Eigen::VectorXd x(8);
  x << 30, 1500, 300, 100, 63, 189, 200, 400;
  const double rt3 = std::pow(1800.0, 3);
  CHECK(tank_cheap(x) ==
        doctest::Approx(1.5 * rt3 / (rt3 - std::pow(1500.0, 3)) * 30.0));
  Eigen::VectorXd y = x;
  y[3] = 300;   // T_cap
  y[4] = 77;    // E_shell
  y[5] = 231;   // E_cap
  y[6] = 300;
  y[7] = 800;   // doubled sigma_y_cap
  CHECK(tank_cheap(y) == tank_cheap(x));
}

TEST_CASE("tank stub: zero bias collapses to rho * cheap, bias brings "
          "T_cap in") {
  Eigen::VectorXd x(8);
  x << 42, 2100, 410, 180, 70, 210, 260, 600;
  TankStubConfig cfg;
  cfg.bias_scale = 0.0;
  CHECK(tank_expensive_stub(x, cfg) ==
        doctest::Approx(cfg.rho * tank_cheap(x)));
  TankStubConfig biased;
  Eigen::VectorXd y = x;
  y[3] = 120;
  CHECK(tank_expensive_stub(x, biased) != tank_expensive_stub(y, biased));
  // and the cheap level still ignores T_cap
  CHECK(tank_cheap(x) == tank_cheap(y));
}

TEST_CASE("stub correlation with the cheap level is strong by construction") {
  InputDistribution dist = tank_distribution();
  Rng rng(4);
  Eigen::MatrixXd pts = dist.sample(10000, rng);
  Eigen::VectorXd z1(10000), z2(10000);
  for (int i = 0; i < 10000; ++i) {
    z1[i] = tank_cheap(pts.row(i));
    z2[i] = tank_expensive_stub(pts.row(i));
  }
  const double c = ((z1.array() - z1.mean()) * (z2.array() - z2.mean()))
                       .sum() /
                   std::sqrt((z1.array() - z1.mean()).square().sum() *
                             (z2.array() - z2.mean()).square().sum());
  CHECK(c > 0.85);
}

TEST_CASE("kriging JSON round trip reproduces predictions") {
  Design d = lhs(25, 2, 6);
  Eigen::VectorXd z(25);
  for (int i = 0; i < 25; ++i)
    z[i] = std::sin(3.0 * d.points(i, 0)) * d.points(i, 1);
  FitOptions opt;
  opt.optimizer_budget = 2;
  KrigingModel m = fit(d, z, TrendBasis{TrendKind::linear}, opt);
  json doc = to_json(m);
  KrigingModel m2 = kriging_from_json(json::parse(doc.dump()));
  Design probe = lhs(15, 2, 81);
  for (int i = 0; i < probe.n(); ++i) {
    const double a = predict_mean(m, probe.points.row(i));
    const double b = predict_mean(m2, probe.points.row(i));
    CHECK(std::abs(a - b) < 1e-9 * (1.0 + std::abs(a)));
    const double ca = predict_cov(m, probe.points.row(i), probe.points.row(i));
    const double cb = predict_cov(m2, probe.points.row(i),
                                  probe.points.row(i));
    CHECK(std::abs(ca - cb) < 1e-9 * (1.0 + std::abs(ca)));
  }
}

TEST_CASE("multifidelity JSON round trip reproduces predictions") {
  auto [d1, d2] = nested_union(lhs(30, 2, 2), lhs(10, 2, 3));
  Eigen::VectorXd z1(d1.n()), z2(d2.n());
  auto f = [](const Eigen::RowVector2d& x) {
    return std::cos(2.0 * x[0]) + x[1] * x[1];
  };
  for (int i = 0; i < d1.n(); ++i) z1[i] = f(d1.points.row(i));
  for (int i = 0; i < d2.n(); ++i)
    z2[i] = 1.3 * f(d2.points.row(i)) - 0.5;
  FitOptions o;
  o.fixed_length_scales = Eigen::VectorXd::Constant(2, 0.6);
  MultiFidelityModel m = mf_fit(
      {d1, d2}, {z1, z2}, {TrendBasis{}, TrendBasis{}}, {o, o});
  MultiFidelityModel m2 =
      multifidelity_from_json(json::parse(to_json(m).dump()));
  REQUIRE(m2.levels() == 2);
  CHECK(m2.upper[0].rho() == doctest::Approx(m.upper[0].rho()).epsilon(1e-12));
  Design probe = lhs(10, 2, 44);
  for (int i = 0; i < probe.n(); ++i) {
    const double a = mf_predict_mean(m, probe.points.row(i));
    const double b = mf_predict_mean(m2, probe.points.row(i));
    CHECK(std::abs(a - b) < 1e-9 * (1.0 + std::abs(a)));
  }
}

TEST_CASE("schema version and type mismatches are rejected") {
  json j;
  j["schema_version"] = 999;
  CHECK_THROWS_AS(kriging_from_json(j), input_error);
  Design d = lhs(10, 1, 1);
  FitOptions o;
  o.fixed_length_scales = Eigen::VectorXd::Constant(1, 0.5);
  KrigingModel m = fit(d, Eigen::VectorXd(d.points.col(0)), TrendBasis{}, o);
  json doc = to_json(m);
  CHECK_THROWS_AS(multifidelity_from_json(doc), input_error);
}

TEST_CASE("design CSV round trip is lossless") {
  Design d = lhs(12, 3, 5);
  std::ostringstream os;
  write_design_csv(os, d.points);
  std::istringstream is(os.str());
  Eigen::MatrixXd back = read_design_csv(is);
  CHECK(back == d.points);
}

TEST_CASE("index-sample and budget CSV formats") {
  IndexSampleMatrix s;
  s.values.resize(2, 2);
  s.values << 0.5, 0.25, 1.0, 0.125;
  std::ostringstream os;
  write_index_samples_csv(os, s);
  CHECK(os.str() == "k,l,value\n0,0,0.5\n0,1,0.25\n1,0,1\n1,1,0.125\n");

  std::vector<std::pair<int, UncertaintyBudget>> trace;
  trace.push_back({100, {1.0, 0.75, 0.25, VarianceRegime::metamodel_dominated}});
  std::ostringstream ob;
  write_budget_trace_csv(ob, trace);
  CHECK(ob.str() ==
        "m,var_meta,var_mc,regime\n100,0.75,0.25,metamodel-dominated\n");
}
