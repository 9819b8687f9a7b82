#ifndef FUSEBOUND_BOUNDS_HPP
#define FUSEBOUND_BOUNDS_HPP

#include <Eigen/Dense>
#include <string>

#include "fusebound/grouping.hpp"
#include "fusebound/otcore.hpp"
#include "fusebound/regress.hpp"
#include "fusebound/types.hpp"

namespace fusebound {

struct BoundsEstimate {
  double lower = 0.0;
  double upper = 0.0;
  // numerator of the upper bound, split into its two terms
  double delta_cross = 0.0;   // delta_d' E(WW') delta_Y
  double cell_qip_sum = 0.0;  // sum_k p_k QIP_k (whole QIP when no grouping)
  double mean_sq_eta = 0.0;
  std::string method;
  Eigen::Index n = 0, m = 0;

  // intermediates reused by the inference module
  Residualization resid;
  Eigen::VectorXd delta_d, delta_Y;  // empty when no common variables
  Eigen::VectorXd nu_d;              // per row of S2 (eta when no W)
  Eigen::VectorXd nu_Y;              // per row of S1 (y when no W)
  Eigen::MatrixXd eww;               // pooled E(WW')
  Eigen::VectorXd cell_qip;          // per-cell QIP values (upper direction)
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Theorem-1 sharp bounds: no designated common regressors, W ignored.
BoundsEstimate bounds_no_common(const OutcomeSample& s1, const RegressorSample& s2,
                                const ProblemSpec& spec);

// Cell-wise bounds given a finite grouping of the common variables.
BoundsEstimate bounds_with_common(const OutcomeSample& s1, const RegressorSample& s2,
                                  const ProblemSpec& spec, const Grouping& grouping);

// Population-mismatch variants; the mode comes from spec.population_mode.
BoundsEstimate bounds_weighted(const OutcomeSample& s1, const RegressorSample& s2,
                               const ProblemSpec& spec, const Grouping& grouping);

// Per-coordinate outer bound (Cartesian-product relaxation).
Interval pacini_bounds(const OutcomeSample& s1, const RegressorSample& s2,
                       const ProblemSpec& spec);

}  // namespace fusebound

#endif  // FUSEBOUND_BOUNDS_HPP
