#ifndef FUSEBOUND_INFERENCE_HPP
#define FUSEBOUND_INFERENCE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fusebound/bounds.hpp"

namespace fusebound {

// Standard normal cdf and quantile.
double normal_cdf(double x);
double normal_quantile(double t);

// Average of F_n^{-1} over the jump interval (G_m(x^-), G_m(x)]; when the
// interval is empty this degenerates to F_n^{-1}(G_m(x)).
double hhat(double x, const EmpiricalQuantile& F_n, const EmpiricalQuantile& G_m);

struct InfluenceSet {
  // Per-row contributions, each column centered by its weighted mean.
  Eigen::MatrixXd s2_cols;   // no-common: psi1..psi3; common: the S2-side psi^g
  Eigen::MatrixXd s1_cols;   // no-common: psi4; common: the S1-side psi^g
  Eigen::VectorXd s2_total;  // row sums of s2_cols
  Eigen::VectorXd s1_total;
  double lambda_hat = 0.0;   // n/(n+m)
  double variance = 0.0;     // V_hat_d
  bool zero_variance_flag = false;
};

InfluenceSet influence_no_common(const OutcomeSample& s1, const RegressorSample& s2,
                                 const Residualization& resid,
                                 const BoundsEstimate& bounds);

InfluenceSet influence_common(const OutcomeSample& s1, const RegressorSample& s2,
                              const ProblemSpec& spec, const Grouping& grouping,
                              const BoundsEstimate& bounds);

enum class CiMethod { one_sided_z, stoye, bootstrap };

struct ConfidenceInterval {
  double level = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  CiMethod method = CiMethod::one_sided_z;
  double critical_value = 0.0;
};

// Imbens-Manski style critical value: solves
// Phi(c + delta/sigma_max) - Phi(-c) = 1 - alpha.
double stoye_critical_value(double delta, double sigma_max, double alpha);

// width_informative=false evaluates the stoye rule at delta=0 (two-sided
// quantile): used when the estimated width is first-order downward biased
// (cell-wise plug-ins), so the width-based reduction toward z_{1-alpha}
// cannot be trusted.
ConfidenceInterval confidence_interval(const BoundsEstimate& bounds,
                                       const InfluenceSet& infl_lower,
                                       const InfluenceSet& infl_upper,
                                       double alpha, CiMethod method,
                                       bool width_informative = true);

// Full pipeline: residualize, group, bound, variance, CI for d and -d.
struct AnalysisOptions {
  double alpha = 0.05;
  int K = -1;  // -1: default_k rule
  std::uint64_t seed = 12345;
  CiMethod ci_method = CiMethod::stoye;
  int bootstrap_reps = 200;  // used by weighted modes / cluster data
  std::vector<int> cluster1, cluster2;  // optional cluster ids (bootstrap only)
};

struct Analysis {
  BoundsEstimate bounds;
  Grouping grouping;
  bool used_grouping = false;
  double var_upper = 0.0;  // V_hat_d
  double var_lower = 0.0;  // V_hat_{-d}
  double se_upper = 0.0;   // sqrt((n+m)/(nm) V_hat)
  double se_lower = 0.0;
  ConfidenceInterval ci;
};

Analysis analyze(const OutcomeSample& s1, const RegressorSample& s2,
                 const ProblemSpec& spec, const AnalysisOptions& opt = {});

}  // namespace fusebound

#endif  // FUSEBOUND_INFERENCE_HPP
