#ifndef FUSEBOUND_GROUPING_HPP
#define FUSEBOUND_GROUPING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fusebound/types.hpp"

namespace fusebound {

// Finite-valued coarsening g(W): cell assignments for both samples plus
// pooled cell probabilities. Every cell is nonempty in both samples.
struct Grouping {
  int K = 1;
  Eigen::MatrixXd centers;          // K x 2 (empty for the finite-support path)
  std::vector<int> assign1;         // per row of S1
  std::vector<int> assign2;         // per row of S2
  Eigen::VectorXd p_hat;            // pooled cell probabilities, sums to 1
  bool k_reduced = false;           // K was lowered to fit the data
};

// K = max(2, floor(min(n,m)^0.2)).
int default_k(Eigen::Index n, Eigen::Index m);

// Constant grouping (single cell).
Grouping constant_grouping(Eigen::Index n, Eigen::Index m);

// Grouping from externally supplied cell assignments (e.g. finite W support).
Grouping grouping_from_assignments(std::vector<int> assign1, std::vector<int> assign2,
                                   const Eigen::VectorXd& w1, const Eigen::VectorXd& w2);

// Regress |residuals_Y| on W in S1 and |residuals_d| on W in S2, evaluate the
// two fitted indices on every row of both samples, then K-means on the
// standardized index pairs. Falls back to g(W)=W when W has at most K
// distinct rows. Cells empty in either sample are merged into the nearest
// remaining center.
Grouping build_grouping(const OutcomeSample& s1, const RegressorSample& s2,
                        const Eigen::VectorXd& residuals_Y,
                        const Eigen::VectorXd& residuals_d, int K,
                        std::uint64_t seed);

}  // namespace fusebound

#endif  // FUSEBOUND_GROUPING_HPP
