#include "fusebound/types.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace fusebound {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

// Smallest/largest singular value ratio of the weighted second-moment matrix.
bool moment_matrix_ok(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  if (X.cols() == 0) return true;
  double total = w.sum();
  Eigen::MatrixXd M = X.transpose() * w.asDiagonal() * X / total;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1) > kSingularTol * sv(0);
}

}  // namespace

Eigen::VectorXd effective_weights(const Eigen::VectorXd& weights, Eigen::Index n) {
  if (weights.size() == 0) return Eigen::VectorXd::Ones(n);
  return weights;
}

Eigen::MatrixXd design_matrix(const RegressorSample& s2, const ProblemSpec& spec) {
  Eigen::Index m = s2.m();
  Eigen::Index p_o = s2.Xo.cols();
  Eigen::Index pc = static_cast<Eigen::Index>(spec.common_regressor_columns.size());
  Eigen::MatrixXd X(m, p_o + pc + (spec.intercept ? 1 : 0));
  X.leftCols(p_o) = s2.Xo;
  for (Eigen::Index k = 0; k < pc; ++k) {
    X.col(p_o + k) = s2.W.col(spec.common_regressor_columns[static_cast<size_t>(k)]);
  }
  if (spec.intercept) X.col(X.cols() - 1).setOnes();
  return X;
}

ValidationReport validate(const ProblemSpec& spec, const OutcomeSample& s1,
                          const RegressorSample& s2) {
  ValidationReport rep;
  auto add = [&rep](const std::string& msg) { rep.violations.push_back(msg); };

  Eigen::Index n = s1.n();
  Eigen::Index m = s2.m();
  if (n < 2) add("outcome sample needs n >= 2");
  if (s1.W.rows() != 0 && s1.W.rows() != n) add("S1: W row count differs from y");
  if (s2.W.rows() != 0 && s2.W.rows() != m) add("S2: W row count differs from Xo");
  if (s1.W.cols() != s2.W.cols()) {
    std::ostringstream os;
    os << "W column mismatch: " << s1.W.cols() << " in S1 vs " << s2.W.cols()
       << " in S2";
    add(os.str());
  }
  if (!all_finite(s1.y) || !all_finite(s1.W)) add("S1 contains non-finite values");
  if (!all_finite(s2.Xo) || !all_finite(s2.W)) add("S2 contains non-finite values");

  Eigen::VectorXd w1 = effective_weights(s1.weights, n);
  Eigen::VectorXd w2 = effective_weights(s2.weights, m);
  if (w1.size() != n || w2.size() != m) add("weight vector length mismatch");
  if ((w1.array() < 0).any() || (w2.array() < 0).any()) add("negative weights");
  if (!(w1.sum() > 0) || !(w2.sum() > 0)) add("weights sum to zero");

  Eigen::Index p = spec.p(s2.Xo.cols());
  if (spec.d.size() != p) {
    std::ostringstream os;
    os << "direction length " << spec.d.size() << " != p = " << p;
    add(os.str());
  } else if (spec.d.norm() == 0.0) {
    add("zero direction");
  }
  std::set<Eigen::Index> seen;
  for (Eigen::Index c : spec.common_regressor_columns) {
    if (c < 0 || c >= s2.W.cols()) add("common-regressor index out of range");
    else if (!seen.insert(c).second) add("duplicate common-regressor index");
  }
  if (m < p) add("m < p: too few regressor rows");

  bool pop_needs_p = spec.population_mode == PopulationMode::reweighted ||
                     spec.population_mode == PopulationMode::target_y_population ||
                     spec.population_mode == PopulationMode::subpopulation;
  if (pop_needs_p && !(spec.p_d1 > 0.0 && spec.p_d1 < 1.0)) {
    add("population mode requires known p = P(D=1) in (0,1)");
  }

  if (rep.ok()) {
    Eigen::MatrixXd X = design_matrix(s2, spec);
    if (!moment_matrix_ok(X, w2)) add("singular E(XX')");
    if (s2.W.cols() > 0) {
      double tot = w1.sum() + w2.sum();
      Eigen::MatrixXd Mw =
          (s1.W.transpose() * w1.asDiagonal() * s1.W +
           s2.W.transpose() * w2.asDiagonal() * s2.W) / tot;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(Mw);
      const auto& sv = svd.singularValues();
      if (!(sv(sv.size() - 1) > kSingularTol * sv(0))) add("singular E(WW')");
    }
  }
  return rep;
}

void require_valid(const ProblemSpec& spec, const OutcomeSample& s1,
                   const RegressorSample& s2) {
  ValidationReport rep = validate(spec, s1, s2);
  if (!rep.ok()) {
    std::string msg = "invalid inputs:";
    for (const auto& v : rep.violations) msg += " [" + v + "]";
    throw ValidationError(msg);
  }
}

}  // namespace fusebound
