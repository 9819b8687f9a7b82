// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "fusebound/bounds.hpp"
#include "fusebound/inference.hpp"
#include "fusebound/otcore.hpp"
#include "fusebound/simulate.hpp"

using namespace fusebound;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("criterion %2d (%s): %s  [%s]\n", id, name, ok ? "PASS" : "FAIL",
              detail.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// --- 1: quantile inner product vs permutation brute force ------------------

void criterion_coupling_oracle() {
  auto t0 = clock_type::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> size(1, 6);
  double worst = 0.0;
  bool ok = true;
  for (int inst = 0; inst < 500; ++inst) {
    int n = size(rng);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = nd(rng);
    for (auto& v : b) v = nd(rng);
    if (inst % 5 == 0 && n > 1) b[1] = b[0];  // ties
    double qip = quantile_inner_product(EmpiricalQuantile(a), EmpiricalQuantile(b));
    std::vector<int> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end());
    double best = -1e300;
    do {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
      best = std::max(best, s / n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    double err = std::abs(qip - best);
    worst = std::max(worst, err);
    if (err > 1e-12 * std::max(1.0, std::abs(best))) ok = false;
  }
  double dt = seconds_since(t0);
  ok = ok && dt < 10.0;
  report(1, "coupling oracle", ok, fmt("max err %.2e over 500 instances, %.1f s", worst, dt));
}

// --- 2: QIP = (mean(a^2)+mean(b^2)-W2^2)/2 ---------------------------------

void criterion_w2_identity() {
  std::mt19937_64 rng(103);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> size(1, 60);
  double worst = 0.0;
  bool ok = true;
  for (int inst = 0; inst < 1000; ++inst) {
    int n = size(rng), m = size(rng);
    if (n == m) m = m % 60 + 1;
    std::vector<double> a(n), b(m);
    for (auto& v : a) v = 2.0 * nd(rng) + 0.3;
    for (auto& v : b) v = nd(rng) - 0.1;
    if (inst % 4 == 0) {
      for (auto& v : a) v = std::round(v * 4.0) / 4.0;  // duplicates
    }
    EmpiricalQuantile qa(a), qb(b);
    double qip = quantile_inner_product(qa, qb);
    double w2 = wasserstein2(qa, qb);
    double rhs = 0.5 * (qa.mean_sq() + qb.mean_sq() - w2 * w2);
    double err = std::abs(qip - rhs) / (1.0 + std::abs(qip));
    worst = std::max(worst, err);
    if (err > 1e-10) ok = false;
  }
  report(2, "W2 identity", ok, fmt("max rel err %.2e over 1000 pairs", worst));
}

// --- 3: oracle identified sets -------------------------------------------

struct OracleTruths {
  Interval p1, p2, p3;
};

void criterion_identified_sets(OracleTruths& out) {
  const double targets[3][2] = {{-1.624, 1.626}, {-1.583, 1.585}, {0.196, 1.405}};
  const ObservedSet obs[3] = {ObservedSet::none, ObservedSet::xc, ObservedSet::xc_wa};
  bool ok = true;
  std::string detail;
  for (int p = 0; p < 3; ++p) {
    DgpConfig cfg;
    cfg.observed = obs[p];
    auto t0 = clock_type::now();
    OracleResult o = oracle_identified_set(cfg, 1000000);
    double dt = seconds_since(t0);
    Interval tr = o.has_analytic ? o.analytic : o.simulated;
    if (p == 0) out.p1 = tr;
    if (p == 1) out.p2 = tr;
    if (p == 2) out.p3 = tr;
    bool okp = std::abs(tr.lower - targets[p][0]) <= 0.02 &&
               std::abs(tr.upper - targets[p][1]) <= 0.02 && dt < 60.0;
    ok = ok && okp;
    detail += fmt("P%d [%.4f,%.4f] %.0fs ", p + 1, tr.lower, tr.upper, dt);
  }
  report(3, "identified sets", ok, detail);
}

// --- 4: coverage at n=m=800 ------------------------------------------------

void criterion_coverage(const OracleTruths& truths) {
  auto t0 = clock_type::now();
  const ObservedSet obs[3] = {ObservedSet::none, ObservedSet::xc, ObservedSet::xc_wa};
  const Interval tr[3] = {truths.p1, truths.p2, truths.p3};
  bool ok = true;
  std::string detail;
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  for (int p = 0; p < 3; ++p) {
    DgpConfig cfg;
    cfg.observed = obs[p];
    cfg.n = cfg.m = 800;
    MonteCarloOptions o;
    o.have_truth = true;
    o.truth = tr[p];
    o.workers = static_cast<int>(hw);
    MonteCarloReport r = run_monte_carlo(cfg, 1000, o);
    bool okp = r.min_coverage >= 0.92 && r.min_coverage <= 0.975;
    ok = ok && okp;
    detail += fmt("P%d covg %.3f ", p + 1, r.min_coverage);
  }
  double dt = seconds_since(t0);
  ok = ok && dt < 900.0;
  report(4, "coverage n=800", ok, detail + fmt("(%.0f s)", dt));
}

// --- 5: excess length decay ------------------------------------------------

void criterion_excess_decay(const OracleTruths& truths) {
  const ObservedSet obs[3] = {ObservedSet::none, ObservedSet::xc, ObservedSet::xc_wa};
  const Interval tr[3] = {truths.p1, truths.p2, truths.p3};
  bool ok = true;
  std::string detail;
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  for (int p = 0; p < 3; ++p) {
    double ex[2] = {0.0, 0.0};
    const Eigen::Index sizes[2] = {1200, 4800};
    for (int s = 0; s < 2; ++s) {
      DgpConfig cfg;
      cfg.observed = obs[p];
      cfg.n = cfg.m = sizes[s];
      MonteCarloOptions o;
      o.have_truth = true;
      o.truth = tr[p];
      o.workers = static_cast<int>(hw);
      ex[s] = run_monte_carlo(cfg, 400, o).excess_length;
    }
    double ratio = ex[1] / ex[0];
    bool okp = ratio < 0.55;
    ok = ok && okp;
    detail += fmt("P%d %.3f/%.3f=%.2f ", p + 1, ex[1], ex[0], ratio);
  }
  report(5, "excess length decay", ok, detail);
}

// --- 6: K sensitivity ------------------------------------------------------

void criterion_k_sensitivity() {
  DgpConfig cfg;
  cfg.observed = ObservedSet::xc_wa;
  cfg.n = cfg.m = 1200;
  Interval tr = analytic_bounds_xc_wa(cfg);
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  double cov[2];
  const int ks[2] = {3, 100};
  for (int i = 0; i < 2; ++i) {
    MonteCarloOptions o;
    o.have_truth = true;
    o.truth = tr;
    o.K_override = ks[i];
    o.workers = static_cast<int>(hw);
    cov[i] = run_monte_carlo(cfg, 500, o).min_coverage;
  }
  bool ok = cov[0] > 0.93 && cov[1] < 0.80;
  report(6, "K sensitivity", ok, fmt("K=3 covg %.3f, K=100 covg %.3f", cov[0], cov[1]));
}

// --- 7: pacini ratio study -------------------------------------------------

void criterion_pacini_ratio() {
  auto rows = pacini_ratio_study({0.0, 0.9}, 100000, 555);
  bool ok = rows.size() == 2 && rows[0].ratio >= 0.95 && rows[0].ratio <= 1.05 &&
            rows[1].ratio > 4.0;
  report(7, "pacini ratio", ok,
         fmt("R(0)=%.3f R(0.9)=%.2f", rows[0].ratio, rows[1].ratio));
}

// --- 8: gaussian auxiliary closed form ------------------------------------

void criterion_gaussian_auxiliary() {
  const Eigen::Index N = 100000;
  const double rho = 0.8;
  std::mt19937_64 rng(20240808);
  std::normal_distribution<double> nd;
  OutcomeSample s1;
  RegressorSample s2;
  s1.y.resize(N);
  s1.W.resize(N, 2);
  s2.Xo.resize(N, 1);
  s2.W.resize(N, 2);
  for (Eigen::Index i = 0; i < N; ++i) {
    double xc = nd(rng);
    s1.y(i) = rho * xc + std::sqrt(1.0 - rho * rho) * nd(rng);
    s1.W(i, 0) = xc;
    s1.W(i, 1) = 1.0;
  }
  for (Eigen::Index j = 0; j < N; ++j) {
    double xc = nd(rng);
    s2.Xo(j, 0) = rho * xc + std::sqrt(1.0 - rho * rho) * nd(rng);
    s2.W(j, 0) = xc;
    s2.W(j, 1) = 1.0;
  }
  ProblemSpec spec;
  spec.intercept = true;  // auxiliary variable only: no common regressors
  spec.d.resize(2);
  spec.d << 1.0, 0.0;
  Analysis a = analyze(s1, s2, spec);
  bool ok = std::abs(a.bounds.lower - 0.28) <= 0.02 &&
            std::abs(a.bounds.upper - 1.00) <= 0.02;
  report(8, "gaussian auxiliary", ok,
         fmt("bounds [%.4f,%.4f] vs [0.28,1.00]", a.bounds.lower, a.bounds.upper));
}

// --- 9: variance calibration ----------------------------------------------

void criterion_variance_calibration() {
  DgpConfig cfg;
  cfg.observed = ObservedSet::none;
  cfg.n = cfg.m = 2400;
  ProblemSpec spec = dgp_problem_spec(cfg);
  const int reps = 2000, vreps = 60;
  std::vector<double> uppers;
  uppers.reserve(reps);
  double implied = 0.0;
  for (int r = 0; r < reps; ++r) {
    auto [s1, s2] = draw_dgp(cfg, static_cast<std::uint64_t>(r + 1));
    BoundsEstimate b = bounds_no_common(s1, s2, spec);
    uppers.push_back(b.upper);
    if (r < vreps) {
      InfluenceSet inf = influence_no_common(s1, s2, b.resid, b);
      double rate = static_cast<double>(b.n + b.m) /
                    (static_cast<double>(b.n) * static_cast<double>(b.m));
      implied += rate * inf.variance;
    }
  }
  implied /= vreps;
  double mu = std::accumulate(uppers.begin(), uppers.end(), 0.0) / reps;
  double emp = 0.0;
  for (double u : uppers) emp += (u - mu) * (u - mu);
  emp /= (reps - 1);
  double ratio = implied / emp;
  bool ok = ratio >= 0.85 && ratio <= 1.15;
  report(9, "variance calibration", ok, fmt("implied/empirical = %.3f", ratio));
}

// --- 10: performance at n=m=120,000 ---------------------------------------

void criterion_performance() {
  DgpConfig cfg;
  cfg.observed = ObservedSet::xc_wa;
  cfg.n = cfg.m = 120000;
  auto [s1, s2] = draw_dgp(cfg, 1);
  ProblemSpec spec = dgp_problem_spec(cfg);
  auto t0 = clock_type::now();
  Analysis a = analyze(s1, s2, spec);
  double dt = seconds_since(t0);
  bool ok = dt < 120.0 && a.bounds.lower < a.bounds.upper;
  report(10, "performance 120k", ok,
         fmt("%.1f s single-threaded, bounds [%.3f,%.3f]", dt, a.bounds.lower,
             a.bounds.upper));
}

// --- 11: exactness invariants ---------------------------------------------

void criterion_invariants() {
  std::mt19937_64 rng(211);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> psize(1, 3), nsize(30, 90);
  double worst = 0.0;
  bool ok = true;
  for (int inst = 0; inst < 200; ++inst) {
    int po = psize(rng);
    Eigen::Index n = nsize(rng), m = nsize(rng) + 10;
    OutcomeSample s1;
    RegressorSample s2;
    s1.y.resize(n);
    s1.W.resize(n, 0);
    for (Eigen::Index i = 0; i < n; ++i) s1.y(i) = 2.0 * nd(rng);
    s2.Xo.resize(m, po);
    s2.W.resize(m, 0);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (int c = 0; c < po; ++c) s2.Xo(j, c) = nd(rng) + 0.2 * c;
    }
    ProblemSpec spec;
    spec.intercept = true;
    spec.d.resize(po + 1);
    for (int c = 0; c <= po; ++c) spec.d(c) = nd(rng);
    if (spec.d.cwiseAbs().maxCoeff() < 0.1) spec.d(0) = 1.0;

    BoundsEstimate b = bounds_no_common(s1, s2, spec);
    double scale = 1.0 + std::abs(b.upper) + std::abs(b.lower);

    double c = 0.25 + 3.0 * std::abs(nd(rng));
    ProblemSpec scaled = spec;
    scaled.d *= c;
    BoundsEstimate bs = bounds_no_common(s1, s2, scaled);
    worst = std::max(worst, std::abs(bs.upper - c * b.upper) / (c * scale));

    ProblemSpec neg = spec;
    neg.d = -spec.d;
    BoundsEstimate bn = bounds_no_common(s1, s2, neg);
    worst = std::max(worst, std::abs(bn.upper + b.lower) / scale);
    worst = std::max(worst, std::abs(bn.lower + b.upper) / scale);

    // eta does not depend on the completion of d into a basis
    Eigen::MatrixXd X = design_matrix(s2, spec);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
    Eigen::Index p = X.cols();
    if (p > 1) {
      Eigen::MatrixXd R(p, p);
      R.col(0) = spec.d;
      for (Eigen::Index cidx = 1; cidx < p; ++cidx) {
        for (Eigen::Index ridx = 0; ridx < p; ++ridx) R(ridx, cidx) = nd(rng);
      }
      Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(R).householderQ();
      Eigen::MatrixXd M(p, p);
      M.col(0) = spec.d;
      M.rightCols(p - 1) = Q.rightCols(p - 1);  // well-conditioned completion
      Eigen::MatrixXd T = M.partialPivLu().solve(X.transpose()).transpose();
      Eigen::VectorXd eta2 = ols_fit(T.rightCols(p - 1), T.col(0), w).residuals;
      double es = 1.0 + b.resid.eta.cwiseAbs().maxCoeff();
      worst = std::max(worst, (eta2 - b.resid.eta).cwiseAbs().maxCoeff() / es);
    }
    if (worst > 1e-10) ok = false;
  }
  report(11, "exactness invariants", ok, fmt("max rel err %.2e over 200 instances", worst));
}

// --- 12: pacini outer bound contains the sharp one -------------------------

void criterion_pacini_contains_sharp() {
  std::mt19937_64 rng(223);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> psize(2, 4), nsize(40, 120);
  bool ok = true;
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    int po = psize(rng);
    Eigen::Index n = nsize(rng), m = nsize(rng);
    OutcomeSample s1;
    RegressorSample s2;
    s1.y.resize(n);
    s1.W.resize(n, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      s1.y(i) = inst % 3 == 0 ? std::exp(nd(rng)) : 2.0 * nd(rng) + 0.5;
    }
    Eigen::MatrixXd mix = Eigen::MatrixXd::NullaryExpr(po, po, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
    mix += 1.5 * Eigen::MatrixXd::Identity(po, po);
    s2.Xo.resize(m, po);
    s2.W.resize(m, 0);
    for (Eigen::Index j = 0; j < m; ++j) {
      Eigen::VectorXd z = Eigen::VectorXd::NullaryExpr(po, [&](Eigen::Index) { return nd(rng); });
      s2.Xo.row(j) = (mix * z).transpose();
    }
    ProblemSpec spec;
    spec.intercept = true;
    spec.d = Eigen::VectorXd::Zero(po + 1);
    spec.d(static_cast<Eigen::Index>(inst % po)) = 1.0;
    BoundsEstimate sharp = bounds_no_common(s1, s2, spec);
    Interval pac = pacini_bounds(s1, s2, spec);
    double slack = (pac.upper - pac.lower) - (sharp.upper - sharp.lower);
    worst = std::min(worst, slack);
    if (slack < -1e-12 * (1.0 + std::abs(sharp.upper))) ok = false;
  }
  report(12, "pacini contains sharp", ok, fmt("min width slack %.2e", worst));
}

}  // namespace

int main() {
  criterion_coupling_oracle();
  criterion_w2_identity();
  OracleTruths truths;
  criterion_identified_sets(truths);
  criterion_coverage(truths);
  criterion_excess_decay(truths);
  criterion_k_sensitivity();
  criterion_pacini_ratio();
  criterion_gaussian_auxiliary();
  criterion_variance_calibration();
  criterion_performance();
  criterion_invariants();
  criterion_pacini_contains_sharp();
  std::printf("%d of 12 criteria failed\n", g_failures);
  return g_failures;
}
