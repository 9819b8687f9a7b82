#include "fusebound/regress.hpp"

#include <Eigen/QR>
#include <cmath>

namespace fusebound {

OlsFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
               const Eigen::VectorXd& weights) {
  Eigen::VectorXd w = effective_weights(weights, design.rows());
  Eigen::VectorXd sw = w.array().sqrt();
  Eigen::MatrixXd Xw = sw.asDiagonal() * design;
  Eigen::VectorXd yw = sw.asDiagonal() * response;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(kSingularTol);
  if (qr.rank() < design.cols()) {
    throw SingularityError("ols_fit: rank-deficient design");
  }
  OlsFit fit;
  fit.coef = qr.solve(yw);
  fit.residuals = response - design * fit.coef;
  return fit;
}

Residualization fwl_residualize_design(const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& d,
                                       const Eigen::VectorXd& weights) {
  Eigen::Index p = X.cols();
  if (d.size() != p || d.norm() == 0.0) {
    throw ValidationError("fwl_residualize: bad direction");
  }
  Eigen::VectorXd w = effective_weights(weights, X.rows());

  // Complete d to a basis: Householder QR of d gives an orthonormal frame
  // whose first column is d/|d|; the rest is the orthogonal complement.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(d);
  Eigen::MatrixXd Q = qr.householderQ();
  Residualization out;
  out.d = d;
  out.M.resize(p, p);
  out.M.col(0) = d;
  if (p > 1) out.M.rightCols(p - 1) = Q.rightCols(p - 1);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(out.M);
  Eigen::MatrixXd T = lu.solve(X.transpose()).transpose();  // rows: M^{-1} x_j

  Eigen::VectorXd t1 = T.col(0);
  if (p > 1) {
    out.T_minus = T.rightCols(p - 1);
    OlsFit fit = ols_fit(out.T_minus, t1, w);
    out.gamma = fit.coef;
    out.eta = fit.residuals;
  } else {
    out.T_minus.resize(X.rows(), 0);
    out.gamma.resize(0);
    out.eta = t1;
  }
  double tot = w.sum();
  out.mean_sq_eta = (w.array() * out.eta.array().square()).sum() / tot;
  return out;
}

Residualization fwl_residualize(const RegressorSample& s2, const ProblemSpec& spec) {
  return fwl_residualize_design(design_matrix(s2, spec), spec.d,
                                effective_weights(s2.weights, s2.m()));
}

}  // namespace fusebound
