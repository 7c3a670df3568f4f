#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gpsobol/kernel.hpp"
#include "gpsobol/rng.hpp"

using namespace gpsobol;

TEST_CASE("matern52 closed form against a high-precision reference") {
  KernelSpec spec{KernelFamily::matern52, Eigen::VectorXd::Ones(1)};
  Eigen::VectorXd x(1), y(1);
  x << 0.0;
  y << 1.0;
  // (1 + sqrt5 + 5/3) exp(-sqrt5) at h = 1, evaluated with 30-digit
  // arithmetic
  const double ref = 0.52399410883182031059271325076050;
  CHECK(correlation(spec, x, y) == doctest::Approx(ref).epsilon(1e-14));

  y << 0.0;
  CHECK(correlation(spec, x, y) == 1.0);
}

TEST_CASE("squared exponential closed form") {
  KernelSpec spec{KernelFamily::squared_exponential, Eigen::VectorXd::Ones(1)};
  Eigen::VectorXd x(1), y(1);
  x << 0.0;
  y << 2.0;
  CHECK(correlation(spec, x, y) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
}

TEST_CASE("anisotropic product structure") {
  Eigen::VectorXd theta(3);
  theta << 0.5, 1.0, 2.0;
  KernelSpec spec{KernelFamily::matern52, theta};
  Eigen::VectorXd x(3), y(3);
  x << 0.1, 0.2, 0.3;
  y << 0.9, 0.1, 0.7;
  double prod = 1.0;
  for (int i = 0; i < 3; ++i) {
    KernelSpec s1{KernelFamily::matern52, theta.segment(i, 1)};
    prod *= correlation(s1, x.segment(i, 1), y.segment(i, 1));
  }
  CHECK(correlation(spec, x, y) == doctest::Approx(prod).epsilon(1e-15));
}

TEST_CASE("larger length scale means slower decay") {
  Eigen::VectorXd t1 = Eigen::VectorXd::Constant(1, 0.5);
  Eigen::VectorXd t2 = Eigen::VectorXd::Constant(1, 2.0);
  Eigen::VectorXd x(1), y(1);
  x << 0.0;
  y << 1.0;
  CHECK(correlation(KernelSpec{KernelFamily::matern52, t1}, x, y) <
        correlation(KernelSpec{KernelFamily::matern52, t2}, x, y));
}

TEST_CASE("corr_matrix matches element-wise evaluation and stays symmetric") {
  Eigen::VectorXd theta(2);
  theta << 0.7, 1.3;
  KernelSpec spec{KernelFamily::matern52, theta};
  Eigen::MatrixXd pts(5, 2);
  pts << 0.1, 0.9, 0.4, 0.2, 0.8, 0.8, 0.3, 0.5, 0.6, 0.1;
  const double nugget = 1e-6;
  Eigen::MatrixXd R = corr_matrix(spec, pts, nugget);
  for (int i = 0; i < 5; ++i) {
    CHECK(R(i, i) == doctest::Approx(1.0 + nugget));
    for (int j = 0; j < 5; ++j) {
      if (i == j) continue;
      CHECK(R(i, j) ==
            doctest::Approx(correlation(spec, pts.row(i), pts.row(j)))
                .epsilon(1e-15));
      CHECK(R(i, j) == R(j, i));
    }
  }
}

TEST_CASE("correlation matrices are positive definite on random sets") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Rng rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    Eigen::MatrixXd pts(40, 3);
    for (int i = 0; i < pts.size(); ++i)
      pts(i / 3, i % 3) = ud(rng);
    Eigen::VectorXd theta = Eigen::VectorXd::Constant(3, 0.4);
    for (auto fam : {KernelFamily::matern52,
                     KernelFamily::squared_exponential}) {
      KernelSpec spec{fam, theta};
      Eigen::MatrixXd R = corr_matrix(spec, pts, 1e-8);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("cross_corr_matrix against per-entry evaluation") {
  Eigen::VectorXd theta(2);
  theta << 1.0, 0.5;
  KernelSpec spec{KernelFamily::squared_exponential, theta};
  Eigen::MatrixXd a(3, 2), b(4, 2);
  a << 0, 0, 1, 0, 0, 1;
  b << 0.5, 0.5, 0.1, 0.2, 0.9, 0.9, 0.3, 0.7;
  Eigen::MatrixXd K = cross_corr_matrix(spec, a, b);
  REQUIRE(K.rows() == 3);
  REQUIRE(K.cols() == 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(K(i, j) ==
            doctest::Approx(correlation(spec, a.row(i), b.row(j))));
}

TEST_CASE("duplicate points without escalation raise a conditioning error") {
  KernelSpec spec{KernelFamily::matern52, Eigen::VectorXd::Ones(1)};
  Eigen::MatrixXd pts(2, 1);
  pts << 0.5, 0.5;
  CHECK_THROWS_AS(factorize_corr(spec, pts, 0.0, 0.0), conditioning_error);
}

TEST_CASE("nugget escalation recovers a barely singular matrix") {
  KernelSpec spec{KernelFamily::squared_exponential,
                  Eigen::VectorXd::Constant(1, 10.0)};
  Eigen::MatrixXd pts(30, 1);
  for (int i = 0; i < 30; ++i) pts(i, 0) = i / 29.0;
  auto cf = factorize_corr(spec, pts, 0.0);
  CHECK(cf.nugget_used > 0.0);
  CHECK(cf.nugget_used <= 1e-4);
  CHECK(cf.llt.info() == Eigen::Success);
}

TEST_CASE("invalid specs are rejected") {
  KernelSpec bad{KernelFamily::matern52, Eigen::VectorXd::Zero(2)};
  CHECK_THROWS_AS(bad.validate(), input_error);
  CHECK_THROWS_AS(kernel_family_from_string("cubic"), input_error);
  CHECK(kernel_family_from_string("matern52") == KernelFamily::matern52);
  CHECK(to_string(KernelFamily::squared_exponential) ==
        "squared_exponential");
}
