#ifndef FUSEBOUND_SIMULATE_HPP
#define FUSEBOUND_SIMULATE_HPP

#include <cstdint>
#include <utility>

#include "fusebound/inference.hpp"

namespace fusebound {

enum class ObservedSet { none, xc, xc_wa };

// The simulation design: X_o = Xc*a1 + Wa*a2 + (1 + Wa*d1)*eta,
// Y = Xo*b1 + Xc*b2 + Wa*d2 + eps, Wa ~ U[0,1], Xc ~ N(0,1).
struct DgpConfig {
  double a1 = 1.0, a2 = 10.0, d1 = 1.0, d2 = 0.25;
  double b1 = 1.0, b2 = 1.0;
  double sigma_eta = 1.0, sigma_eps = 4.0;
  Eigen::Index n = 400, m = 400;
  ObservedSet observed = ObservedSet::none;
  std::uint64_t seed = 20240101;
};

// Deterministic per-replication stream: same (seed, index) -> same samples.
std::pair<OutcomeSample, RegressorSample> draw_dgp(const DgpConfig& config,
                                                   std::uint64_t replication_index);

// The problem spec matching the observed set (d = e1, coefficient of X_o).
ProblemSpec dgp_problem_spec(const DgpConfig& config);

struct OracleResult {
  Interval simulated;       // population-formula bounds on one size-N draw
  Interval analytic;        // closed form; only meaningful for xc_wa
  bool has_analytic = false;
};

OracleResult oracle_identified_set(const DgpConfig& config, Eigen::Index N_big);

// Closed-form identified set for the xc_wa case.
Interval analytic_bounds_xc_wa(const DgpConfig& config);

struct MonteCarloReport {
  double avg_lower = 0.0, avg_upper = 0.0;
  double avg_ci_lower = 0.0, avg_ci_upper = 0.0;
  double excess_length = 0.0;
  double min_coverage = 0.0;
  double true_lower = 0.0, true_upper = 0.0;
  int replications = 0;
  int failures = 0;
  double wall_time_sec = 0.0;
};

struct MonteCarloOptions {
  double alpha = 0.05;
  int K_override = -1;        // -1: default rule
  int workers = 1;
  Eigen::Index oracle_N = 1000000;
  int coverage_grid = 41;
  // optional precomputed truth (skips the oracle draw)
  bool have_truth = false;
  Interval truth;
};

MonteCarloReport run_monte_carlo(const DgpConfig& config, int replications,
                                 const MonteCarloOptions& opt = {});

struct PaciniRatioRow {
  double rho = 0.0;
  double sharp_width = 0.0;
  double pacini_width = 0.0;
  double ratio = 0.0;
};

// Appendix-style comparison: lognormal outcome, bivariate normal regressors
// with correlation rho; ratio of Pacini to sharp interval widths.
std::vector<PaciniRatioRow> pacini_ratio_study(const std::vector<double>& rho_grid,
                                               Eigen::Index N,
                                               std::uint64_t seed = 777);

}  // namespace fusebound

#endif  // FUSEBOUND_SIMULATE_HPP
