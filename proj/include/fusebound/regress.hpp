#ifndef FUSEBOUND_REGRESS_HPP
#define FUSEBOUND_REGRESS_HPP

#include <Eigen/Dense>

#include "fusebound/types.hpp"

namespace fusebound {

struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
};

// Weighted least squares; throws SingularityError on rank deficiency.
OlsFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
               const Eigen::VectorXd& weights);

// Residualization of the first transformed coordinate T1 = (M^{-1}X)_1 on
// the remaining coordinates, with M = [d | orthonormal complement of d].
struct Residualization {
  Eigen::VectorXd d;
  Eigen::MatrixXd M;        // p x p, first column d
  Eigen::MatrixXd T_minus;  // m x (p-1)
  Eigen::VectorXd gamma;    // coefficients of T1 on T_{-1}
  Eigen::VectorXd eta;      // residuals, one per row of S2
  double mean_sq_eta = 0.0; // weighted E(eta^2)
};

Residualization fwl_residualize(const RegressorSample& s2, const ProblemSpec& spec);

// Same computation on a raw design matrix (used internally and by oracles).
Residualization fwl_residualize_design(const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& d,
                                       const Eigen::VectorXd& weights);

}  // namespace fusebound

#endif  // FUSEBOUND_REGRESS_HPP
