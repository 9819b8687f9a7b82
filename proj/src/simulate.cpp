#include "fusebound/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

namespace fusebound {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(index)));
}

struct JointDraw {
  Eigen::VectorXd wa, xc, xo, y;
};

JointDraw draw_joint(const DgpConfig& c, Eigen::Index N, std::mt19937_64& rng) {
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  JointDraw d;
  d.wa.resize(N);
  d.xc.resize(N);
  d.xo.resize(N);
  d.y.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    double wa = unif(rng);
    double xc = stdnorm(rng);
    double eta = c.sigma_eta * stdnorm(rng);
    double eps = c.sigma_eps * stdnorm(rng);
    double xo = xc * c.a1 + wa * c.a2 + (1.0 + wa * c.d1) * eta;
    d.wa(i) = wa;
    d.xc(i) = xc;
    d.xo(i) = xo;
    d.y(i) = xo * c.b1 + xc * c.b2 + wa * c.d2 + eps;
  }
  return d;
}

Eigen::MatrixXd common_matrix(const DgpConfig& c, const JointDraw& d) {
  Eigen::Index N = d.wa.size();
  switch (c.observed) {
    case ObservedSet::none:
      return Eigen::MatrixXd(N, 0);
    case ObservedSet::xc: {
      Eigen::MatrixXd W(N, 2);
      W.col(0) = d.xc;
      W.col(1).setOnes();
      return W;
    }
    case ObservedSet::xc_wa: {
      Eigen::MatrixXd W(N, 3);
      W.col(0) = d.wa;
      W.col(1) = d.xc;
      W.col(2).setOnes();
      return W;
    }
  }
  return {};
}

}  // namespace

ProblemSpec dgp_problem_spec(const DgpConfig& config) {
  ProblemSpec spec;
  spec.intercept = true;
  if (config.observed == ObservedSet::none) {
    spec.d = Eigen::VectorXd::Zero(2);
  } else {
    spec.d = Eigen::VectorXd::Zero(3);
    // X_c is W column 0 (xc) or 1 (xc_wa)
    spec.common_regressor_columns = {config.observed == ObservedSet::xc ? 0 : 1};
  }
  spec.d(0) = 1.0;
  return spec;
}

std::pair<OutcomeSample, RegressorSample> draw_dgp(const DgpConfig& config,
                                                   std::uint64_t replication_index) {
  auto rng = stream(config.seed, replication_index);
  JointDraw d1 = draw_joint(config, config.n, rng);
  JointDraw d2 = draw_joint(config, config.m, rng);
  OutcomeSample s1;
  s1.y = d1.y;
  s1.W = common_matrix(config, d1);
  RegressorSample s2;
  s2.Xo = d2.xo;
  s2.W = common_matrix(config, d2);
  return {std::move(s1), std::move(s2)};
}

Interval analytic_bounds_xc_wa(const DgpConfig& c) {
  // eta_d = a2 (Wa - 1/2) + (1 + d1 Wa) eta given X = (Xo, Xc, 1), d = e1;
  // conditional on W both residuals are Gaussian, so the cell-wise coupling
  // integrates the product of conditional standard deviations over Wa.
  double s2eta = c.sigma_eta * c.sigma_eta;
  double e_s2 = 1.0 + c.d1 + c.d1 * c.d1 / 3.0;  // E[(1+d1 Wa)^2], Wa~U[0,1]
  double mean_sq_eta = c.a2 * c.a2 / 12.0 + s2eta * e_s2;

  Eigen::Vector3d delta_d(c.a2, 0.0, -c.a2 / 2.0);
  Eigen::Vector3d delta_Y(c.b1 * c.a2 + c.d2, c.b1 * c.a1 + c.b2, 0.0);
  Eigen::Matrix3d eww;
  eww << 1.0 / 3.0, 0.0, 0.5,
         0.0,       1.0, 0.0,
         0.5,       0.0, 1.0;
  double cross = delta_d.dot(eww * delta_Y);

  // integral of (1+d1 w) sqrt(b1^2 s2eta (1+d1 w)^2 + sigma_eps^2) over [0,1]
  double a = c.b1 * c.b1 * s2eta;
  double se2 = c.sigma_eps * c.sigma_eps;
  double css;
  if (std::abs(c.d1) > 1e-14 && a > 1e-14) {
    auto anti = [&](double u) { return std::pow(a * u * u + se2, 1.5) / (3.0 * a); };
    css = (anti(1.0 + c.d1) - anti(1.0)) / c.d1;
  } else if (std::abs(c.d1) > 1e-14) {
    auto anti = [&](double u) { return 0.5 * u * u * std::sqrt(se2); };
    css = (anti(1.0 + c.d1) - anti(1.0)) / c.d1;
  } else {
    css = std::sqrt(a + se2);
  }
  css *= c.sigma_eta;

  Interval out;
  out.upper = (cross + css) / mean_sq_eta;
  out.lower = (cross - css) / mean_sq_eta;
  return out;
}

OracleResult oracle_identified_set(const DgpConfig& config, Eigen::Index N_big) {
  auto rng = stream(config.seed, 0xfadeULL);
  JointDraw d = draw_joint(config, N_big, rng);

  OutcomeSample s1;
  s1.y = d.y;
  s1.W = common_matrix(config, d);
  RegressorSample s2;
  s2.Xo = d.xo;
  s2.W = s1.W;
  ProblemSpec spec = dgp_problem_spec(config);

  OracleResult out;
  switch (config.observed) {
    case ObservedSet::none: {
      BoundsEstimate b = bounds_no_common(s1, s2, spec);
      out.simulated = {b.lower, b.upper};
      break;
    }
    case ObservedSet::xc: {
      // residuals are independent of (Xc,1) here, so the constant grouping
      // already attains the sharp bound
      Grouping g = constant_grouping(N_big, N_big);
      BoundsEstimate b = bounds_with_common(s1, s2, spec, g);
      out.simulated = {b.lower, b.upper};
      break;
    }
    case ObservedSet::xc_wa: {
      // condition on fine quantile bins of Wa (the scale variable)
      const int B = 200;
      std::vector<int> assign(static_cast<std::size_t>(N_big));
      for (Eigen::Index i = 0; i < N_big; ++i) {
        int bin = static_cast<int>(d.wa(i) * B);
        assign[static_cast<std::size_t>(i)] = std::clamp(bin, 0, B - 1);
      }
      Grouping g = grouping_from_assignments(assign, assign,
                                             Eigen::VectorXd::Ones(N_big),
                                             Eigen::VectorXd::Ones(N_big));
      BoundsEstimate b = bounds_with_common(s1, s2, spec, g);
      out.simulated = {b.lower, b.upper};
      out.analytic = analytic_bounds_xc_wa(config);
      out.has_analytic = true;
      break;
    }
  }
  return out;
}

MonteCarloReport run_monte_carlo(const DgpConfig& config, int replications,
                                 const MonteCarloOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  MonteCarloReport rep;
  rep.replications = replications;

  Interval truth;
  if (opt.have_truth) {
    truth = opt.truth;
  } else if (config.observed == ObservedSet::xc_wa) {
    truth = analytic_bounds_xc_wa(config);
  } else {
    truth = oracle_identified_set(config, opt.oracle_N).simulated;
  }
  rep.true_lower = truth.lower;
  rep.true_upper = truth.upper;

  struct RepResult {
    double lo = 0, up = 0, ci_lo = 0, ci_up = 0;
    bool ok = false;
  };
  std::vector<RepResult> results(static_cast<std::size_t>(replications));

  auto run_range = [&](int begin, int step) {
    for (int r = begin; r < replications; r += step) {
      try {
        auto [s1, s2] = draw_dgp(config, static_cast<std::uint64_t>(r) + 1);
        ProblemSpec spec = dgp_problem_spec(config);
        AnalysisOptions aopt;
        aopt.alpha = opt.alpha;
        aopt.K = opt.K_override;
        aopt.seed = splitmix64(config.seed + static_cast<std::uint64_t>(r) * 7919ULL);
        aopt.ci_method = config.observed == ObservedSet::none ? CiMethod::one_sided_z
                                                              : CiMethod::stoye;
        Analysis a = analyze(s1, s2, spec, aopt);
        results[static_cast<std::size_t>(r)] =
            {a.bounds.lower, a.bounds.upper, a.ci.lower, a.ci.upper, true};
      } catch (const std::runtime_error&) {
        results[static_cast<std::size_t>(r)].ok = false;
      }
    }
  };

  int workers = std::max(1, opt.workers);
  if (workers == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_range, w, workers);
    for (auto& t : pool) t.join();
  }

  double slo = 0, sup = 0, scil = 0, sciu = 0;
  int ok = 0;
  for (const auto& r : results) {
    if (!r.ok) continue;
    ++ok;
    slo += r.lo;
    sup += r.up;
    scil += r.ci_lo;
    sciu += r.ci_up;
  }
  rep.failures = replications - ok;
  if (ok > 0) {
    rep.avg_lower = slo / ok;
    rep.avg_upper = sup / ok;
    rep.avg_ci_lower = scil / ok;
    rep.avg_ci_upper = sciu / ok;
    rep.excess_length = (sciu - scil) / ok - (truth.upper - truth.lower);
  }

  // minimum coverage over a grid spanning the true identified set
  int Gp = std::max(2, opt.coverage_grid);
  double min_cov = 1.0;
  for (int g = 0; g < Gp; ++g) {
    double b = truth.lower + (truth.upper - truth.lower) * g / (Gp - 1);
    int hit = 0;
    for (const auto& r : results) {
      if (r.ok && r.ci_lo <= b && b <= r.ci_up) ++hit;
    }
    if (ok > 0) min_cov = std::min(min_cov, static_cast<double>(hit) / ok);
  }
  rep.min_coverage = ok > 0 ? min_cov : 0.0;

  rep.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::vector<PaciniRatioRow> pacini_ratio_study(const std::vector<double>& rho_grid,
                                               Eigen::Index N, std::uint64_t seed) {
  std::vector<PaciniRatioRow> rows;
  for (std::size_t g = 0; g < rho_grid.size(); ++g) {
    double rho = rho_grid[g];
    if (!(rho >= 0.0 && rho < 1.0)) throw ValidationError("rho outside [0,1)");
    auto rng = stream(seed, g + 1);
    std::normal_distribution<double> stdnorm(0.0, 1.0);

    OutcomeSample s1;
    s1.y.resize(N);
    s1.W.resize(N, 0);
    RegressorSample s2;
    s2.Xo.resize(N, 2);
    s2.W.resize(N, 0);
    double chol = std::sqrt(1.0 - rho * rho);
    double sd_log = std::sqrt(2.0);
    for (Eigen::Index i = 0; i < N; ++i) {
      s1.y(i) = std::exp(sd_log * stdnorm(rng));
      double z1 = stdnorm(rng), z2 = stdnorm(rng);
      s2.Xo(i, 0) = z1;
      s2.Xo(i, 1) = rho * z1 + chol * z2;
    }
    ProblemSpec spec;
    spec.intercept = false;
    spec.d = Eigen::Vector2d(1.0, 0.0);

    BoundsEstimate sharp = bounds_no_common(s1, s2, spec);
    Interval pac = pacini_bounds(s1, s2, spec);
    PaciniRatioRow row;
    row.rho = rho;
    row.sharp_width = sharp.upper - sharp.lower;
    row.pacini_width = pac.upper - pac.lower;
    row.ratio = row.pacini_width / row.sharp_width;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fusebound
