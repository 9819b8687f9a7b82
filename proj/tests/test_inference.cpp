#include <doctest.h>

#include <random>

#include "fusebound/inference.hpp"

using namespace fusebound;

TEST_CASE("normal quantile and cdf") {
  CHECK(normal_quantile(0.95) == doctest::Approx(1.6449).epsilon(1e-4));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.9600).epsilon(1e-4));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(normal_quantile(0.31)) == doctest::Approx(0.31).epsilon(1e-9));
}

TEST_CASE("stoye critical value limits and monotonicity") {
  double z95 = normal_quantile(0.95);
  double z975 = normal_quantile(0.975);
  CHECK(stoye_critical_value(0.0, 1.0, 0.05) == doctest::Approx(z975).epsilon(1e-6));
  CHECK(stoye_critical_value(100.0, 1.0, 0.05) == doctest::Approx(z95).epsilon(1e-6));
  CHECK(stoye_critical_value(1.0, 0.0, 0.05) == doctest::Approx(z95).epsilon(1e-6));
  double prev = z975;
  for (double delta : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    double c = stoye_critical_value(delta, 1.0, 0.05);
    CHECK(c <= prev + 1e-10);
    CHECK(c >= z95 - 1e-10);
    CHECK(c <= z975 + 1e-10);
    prev = c;
  }
}

TEST_CASE("hhat step-function averaging") {
  SUBCASE("below the G support") {
    EmpiricalQuantile F(std::vector<double>{1.0, 2.0, 3.0});
    EmpiricalQuantile G(std::vector<double>{0.5, 0.7});
    CHECK(hhat(-10.0, F, G) == doctest::Approx(1.0));  // Finv at 0+ -> min
  }
  SUBCASE("equal sizes, no ties: order statistics match") {
    EmpiricalQuantile F(std::vector<double>{10.0, 20.0, 30.0});
    EmpiricalQuantile G(std::vector<double>{-1.0, 0.0, 1.0});
    CHECK(hhat(-1.0, F, G) == doctest::Approx(10.0));
    CHECK(hhat(0.0, F, G) == doctest::Approx(20.0));
    CHECK(hhat(1.0, F, G) == doctest::Approx(30.0));
  }
  SUBCASE("an atom of mass 2/m spans two F steps") {
    // G puts mass 1/4 on 0 and 2/4 on 1 and 1/4 on 2; F has 4 atoms
    EmpiricalQuantile F(std::vector<double>{1.0, 2.0, 3.0, 4.0});
    EmpiricalQuantile G(std::vector<double>{0.0, 1.0, 1.0, 2.0});
    // G(1^-) = 1/4, G(1) = 3/4: average of Finv over (1/4, 3/4] = (2+3)/2
    CHECK(hhat(1.0, F, G) == doctest::Approx(2.5));
  }
  SUBCASE("non-atom falls back to Finv(G(x))") {
    EmpiricalQuantile F(std::vector<double>{1.0, 2.0});
    EmpiricalQuantile G(std::vector<double>{0.0, 10.0});
    CHECK(hhat(5.0, F, G) == doctest::Approx(1.0));  // G(5)=0.5, Finv(0.5)=1
  }
}

namespace {

struct Pair {
  OutcomeSample s1;
  RegressorSample s2;
};

Pair gaussian_pair(Eigen::Index n, Eigen::Index m, Eigen::Index po, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Pair pr;
  pr.s1.y.resize(n);
  pr.s1.W.resize(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) pr.s1.y(i) = 2.0 * nd(rng) + 1.0;
  pr.s2.Xo.resize(m, po);
  pr.s2.W.resize(m, 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < po; ++j) pr.s2.Xo(i, j) = nd(rng);
  }
  return pr;
}

ProblemSpec slope_spec(Eigen::Index po) {
  ProblemSpec spec;
  spec.intercept = true;
  spec.d = Eigen::VectorXd::Zero(spec.p(po));
  spec.d(0) = 1.0;
  return spec;
}

// brute-force Riemann version of the psi3-style integral for one value
double riemann_crossing(double v, const EmpiricalQuantile& G,
                        const EmpiricalQuantile& F) {
  double lo = G.values().front() - 1.0, hi = G.values().back() + 1.0;
  const int N = 1000000;
  double h = (hi - lo) / N, acc = 0.0;
  for (int i = 0; i < N; ++i) {
    double t = lo + (i + 0.5) * h;
    double g = G.cdf(t);
    acc += ((v <= t ? 1.0 : 0.0) - g) * F.quantile(g) * h;
  }
  return -acc;
}

}  // namespace

TEST_CASE("psi3 segment sums match a fine Riemann oracle") {
  std::mt19937_64 rng(211);
  std::normal_distribution<double> nd;
  std::vector<double> gv(6), fv(5);
  for (auto& v : gv) v = nd(rng);
  for (auto& v : fv) v = nd(rng);
  EmpiricalQuantile G(gv), F(fv);

  Pair pr = gaussian_pair(5, 6, 1, 223);
  pr.s1.y = Eigen::Map<Eigen::VectorXd>(fv.data(), 5);
  pr.s2.Xo.col(0) = Eigen::Map<Eigen::VectorXd>(gv.data(), 6);
  ProblemSpec spec = slope_spec(1);
  BoundsEstimate b = bounds_no_common(pr.s1, pr.s2, spec);
  InfluenceSet inf = influence_no_common(pr.s1, pr.s2, b.resid, b);

  // recompute psi3 for each eta value (uncentered) by brute force
  const Eigen::VectorXd& eta = b.resid.eta;
  EmpiricalQuantile Ge(std::vector<double>(eta.data(), eta.data() + eta.size()));
  EmpiricalQuantile Fy(fv);
  Eigen::VectorXd direct(eta.size());
  for (Eigen::Index j = 0; j < eta.size(); ++j) {
    direct(j) = riemann_crossing(eta(j), Ge, Fy);
  }
  direct.array() -= direct.mean();
  for (Eigen::Index j = 0; j < eta.size(); ++j) {
    CHECK(inf.s2_cols(j, 2) == doctest::Approx(direct(j)).epsilon(1e-5));
  }
}

TEST_CASE("influence columns are centered and variance is nonnegative") {
  Pair pr = gaussian_pair(80, 100, 2, 227);
  ProblemSpec spec = slope_spec(2);
  BoundsEstimate b = bounds_no_common(pr.s1, pr.s2, spec);
  InfluenceSet inf = influence_no_common(pr.s1, pr.s2, b.resid, b);
  CHECK(inf.variance >= 0.0);
  CHECK(inf.lambda_hat == doctest::Approx(80.0 / 180.0));
  for (Eigen::Index c = 0; c < inf.s2_cols.cols(); ++c) {
    double rmsc = std::sqrt(inf.s2_cols.col(c).squaredNorm() / 100.0);
    CHECK(std::abs(inf.s2_cols.col(c).mean()) <= 1e-6 * (1.0 + rmsc));
  }
  CHECK(std::abs(inf.s1_cols.col(0).mean()) <= 1e-8);
}

TEST_CASE("constant y kills psi4") {
  Pair pr = gaussian_pair(50, 60, 1, 229);
  pr.s1.y.setConstant(2.0);
  ProblemSpec spec = slope_spec(1);
  BoundsEstimate b = bounds_no_common(pr.s1, pr.s2, spec);
  InfluenceSet inf = influence_no_common(pr.s1, pr.s2, b.resid, b);
  CHECK(inf.s1_cols.col(0).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero variance makes the CI equal the bounds") {
  BoundsEstimate b;
  b.lower = -0.4;
  b.upper = 1.2;
  b.n = 50;
  b.m = 60;
  InfluenceSet none;
  none.variance = 0.0;
  ConfidenceInterval ci = confidence_interval(b, none, none, 0.05, CiMethod::stoye);
  CHECK(ci.lower == doctest::Approx(b.lower));
  CHECK(ci.upper == doctest::Approx(b.upper));
  CHECK_THROWS_AS(confidence_interval(b, none, none, 1.5, CiMethod::stoye),
                  ValidationError);
}

TEST_CASE("variance is invariant to the scale of d") {
  Pair pr = gaussian_pair(120, 140, 2, 233);
  ProblemSpec spec = slope_spec(2);
  spec.d << 0.5, -1.0, 0.25;
  BoundsEstimate b = bounds_no_common(pr.s1, pr.s2, spec);
  InfluenceSet inf = influence_no_common(pr.s1, pr.s2, b.resid, b);
  // se of b_d scales like c under d -> c d, so V scales like c^2
  ProblemSpec spec2 = spec;
  spec2.d *= 3.0;
  BoundsEstimate b2 = bounds_no_common(pr.s1, pr.s2, spec2);
  InfluenceSet inf2 = influence_no_common(pr.s1, pr.s2, b2.resid, b2);
  CHECK(inf2.variance == doctest::Approx(9.0 * inf.variance).epsilon(1e-8));
}

TEST_CASE("eleven-term variance approaches the four-term one under a trivial W") {
  // constant grouping, W = intercept only: the two plug-ins estimate the same
  // asymptotic variance but center the h-term differently, so they agree only
  // up to higher-order sampling error.
  std::mt19937_64 rng(239);
  std::normal_distribution<double> nd;
  Eigen::Index n = 500, m = 600;
  Pair pr = gaussian_pair(n, m, 2, 241);
  OutcomeSample s1w = pr.s1;
  RegressorSample s2w = pr.s2;
  s1w.W = Eigen::MatrixXd::Ones(n, 1);
  s2w.W = Eigen::MatrixXd::Ones(m, 1);
  ProblemSpec spec = slope_spec(2);

  BoundsEstimate bn = bounds_no_common(pr.s1, pr.s2, spec);
  InfluenceSet in_plain = influence_no_common(pr.s1, pr.s2, bn.resid, bn);
  Grouping g = constant_grouping(n, m);
  BoundsEstimate bc = bounds_with_common(s1w, s2w, spec, g);
  InfluenceSet in_grouped = influence_common(s1w, s2w, spec, g, bc);

  CHECK(bc.upper == doctest::Approx(bn.upper).epsilon(1e-10));
  CHECK(in_grouped.variance ==
        doctest::Approx(in_plain.variance).epsilon(2e-3));
  (void)rng;
  (void)nd;
}

TEST_CASE("analyze end-to-end: CI brackets the bounds, stoye c in range") {
  Pair pr = gaussian_pair(300, 300, 1, 251);
  ProblemSpec spec = slope_spec(1);
  AnalysisOptions opt;
  opt.ci_method = CiMethod::stoye;
  Analysis a = analyze(pr.s1, pr.s2, spec, opt);
  CHECK(a.ci.lower <= a.bounds.lower);
  CHECK(a.ci.upper >= a.bounds.upper);
  CHECK(a.ci.critical_value >= normal_quantile(0.95) - 1e-9);
  CHECK(a.ci.critical_value <= normal_quantile(0.975) + 1e-9);
  CHECK(a.se_upper > 0.0);
  CHECK(a.se_lower > 0.0);
}
