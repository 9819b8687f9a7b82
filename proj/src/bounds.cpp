#include "fusebound/bounds.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace fusebound {

namespace {

// Cell-conditional empirical distribution of `vals` restricted to cell k.
EmpiricalQuantile cell_quantile(const Eigen::VectorXd& vals,
                                const Eigen::VectorXd& wts,
                                const std::vector<int>& assign, int k) {
  std::vector<double> v, w;
  for (std::size_t r = 0; r < assign.size(); ++r) {
    if (assign[r] == k) {
      v.push_back(vals(static_cast<Eigen::Index>(r)));
      w.push_back(wts(static_cast<Eigen::Index>(r)));
    }
  }
  if (v.empty()) throw ValidationError("empty grouping cell");
  return EmpiricalQuantile(v, w);
}

double wmean(const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
  return (w.array() * x.array()).sum() / w.sum();
}

Eigen::MatrixXd weighted_moment(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  return X.transpose() * w.asDiagonal() * X / w.sum();
}

// Cell frequencies under weights.
Eigen::VectorXd cell_freq(const std::vector<int>& assign, const Eigen::VectorXd& w,
                          int K) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(K);
  for (std::size_t r = 0; r < assign.size(); ++r) {
    f(assign[r]) += w(static_cast<Eigen::Index>(r));
  }
  f /= w.sum();
  return f;
}

}  // namespace

BoundsEstimate bounds_no_common(const OutcomeSample& s1, const RegressorSample& s2,
                                const ProblemSpec& spec) {
  require_valid(spec, s1, s2);
  if (!spec.common_regressor_columns.empty()) {
    throw ValidationError("bounds_no_common: common regressors designated");
  }
  BoundsEstimate out;
  out.n = s1.n();
  out.m = s2.m();
  out.method = "no_common";
  out.resid = fwl_residualize(s2, spec);
  if (!(out.resid.mean_sq_eta > 0.0)) {
    throw SingularityError("bounds_no_common: E(eta^2) = 0");
  }
  out.mean_sq_eta = out.resid.mean_sq_eta;

  Eigen::VectorXd w1 = effective_weights(s1.weights, out.n);
  Eigen::VectorXd w2 = effective_weights(s2.weights, out.m);
  EmpiricalQuantile fy(std::span<const double>(s1.y.data(), static_cast<std::size_t>(out.n)),
                       std::span<const double>(w1.data(), static_cast<std::size_t>(out.n)));
  EmpiricalQuantile ge(std::span<const double>(out.resid.eta.data(), static_cast<std::size_t>(out.m)),
                       std::span<const double>(w2.data(), static_cast<std::size_t>(out.m)));

  out.cell_qip_sum = quantile_inner_product(ge, fy);
  out.upper = out.cell_qip_sum / out.mean_sq_eta;
  out.lower = antitone_inner_product(ge, fy) / out.mean_sq_eta;
  out.nu_d = out.resid.eta;
  out.nu_Y = s1.y;
  out.cell_qip = Eigen::VectorXd::Constant(1, out.cell_qip_sum);
  return out;
}

BoundsEstimate bounds_with_common(const OutcomeSample& s1, const RegressorSample& s2,
                                  const ProblemSpec& spec, const Grouping& grouping) {
  require_valid(spec, s1, s2);
  BoundsEstimate out;
  out.n = s1.n();
  out.m = s2.m();
  out.method = "with_common";
  out.resid = fwl_residualize(s2, spec);
  if (!(out.resid.mean_sq_eta > 0.0)) {
    throw SingularityError("bounds_with_common: E(eta^2) = 0");
  }
  out.mean_sq_eta = out.resid.mean_sq_eta;

  Eigen::VectorXd w1 = effective_weights(s1.weights, out.n);
  Eigen::VectorXd w2 = effective_weights(s2.weights, out.m);

  out.delta_Y = ols_fit(s1.W, s1.y, w1).coef;
  out.delta_d = ols_fit(s2.W, out.resid.eta, w2).coef;
  out.nu_Y = s1.y - s1.W * out.delta_Y;
  out.nu_d = out.resid.eta - s2.W * out.delta_d;

  // pooled second moment of W
  double tot = w1.sum() + w2.sum();
  out.eww = (s1.W.transpose() * w1.asDiagonal() * s1.W +
             s2.W.transpose() * w2.asDiagonal() * s2.W) / tot;
  out.delta_cross = out.delta_d.dot(out.eww * out.delta_Y);

  int K = grouping.K;
  out.cell_qip.resize(K);
  double qip_sum = 0.0, anti_sum = 0.0;
  for (int k = 0; k < K; ++k) {
    EmpiricalQuantile fk = cell_quantile(out.nu_Y, w1, grouping.assign1, k);
    EmpiricalQuantile gk = cell_quantile(out.nu_d, w2, grouping.assign2, k);
    out.cell_qip(k) = quantile_inner_product(gk, fk);
    qip_sum += grouping.p_hat(k) * out.cell_qip(k);
    anti_sum += grouping.p_hat(k) * antitone_inner_product(gk, fk);
  }
  out.cell_qip_sum = qip_sum;
  out.upper = (out.delta_cross + qip_sum) / out.mean_sq_eta;
  out.lower = (out.delta_cross + anti_sum) / out.mean_sq_eta;
  return out;
}

BoundsEstimate bounds_weighted(const OutcomeSample& s1, const RegressorSample& s2,
                               const ProblemSpec& spec, const Grouping& grouping) {
  require_valid(spec, s1, s2);
  if (spec.population_mode == PopulationMode::common) {
    return bounds_with_common(s1, s2, spec, grouping);
  }
  BoundsEstimate out;
  out.n = s1.n();
  out.m = s2.m();
  out.resid = fwl_residualize(s2, spec);
  if (!(out.resid.mean_sq_eta > 0.0)) {
    throw SingularityError("bounds_weighted: E(eta^2) = 0");
  }

  Eigen::VectorXd w1 = effective_weights(s1.weights, out.n);
  Eigen::VectorXd w2 = effective_weights(s2.weights, out.m);
  const double p = spec.p_d1;
  const int K = grouping.K;

  // Cell-wise propensity from the two W-cell frequency profiles.
  Eigen::VectorXd f1 = cell_freq(grouping.assign1, w1, K);
  Eigen::VectorXd f0 = cell_freq(grouping.assign2, w2, K);
  Eigen::VectorXd prop(K);
  for (int k = 0; k < K; ++k) {
    if (!(f1(k) > 0.0) || !(f0(k) > 0.0)) {
      std::ostringstream os;
      os << "propensity cell " << k << " observed in only one sample";
      throw ValidationError(os.str());
    }
    prop(k) = p * f1(k) / (p * f1(k) + (1.0 - p) * f0(k));
  }
  Eigen::VectorXd prop1(out.n), prop2(out.m);
  for (Eigen::Index i = 0; i < out.n; ++i) prop1(i) = prop(grouping.assign1[static_cast<std::size_t>(i)]);
  for (Eigen::Index j = 0; j < out.m; ++j) prop2(j) = prop(grouping.assign2[static_cast<std::size_t>(j)]);

  // Mode-specific regression weights, denominator, W moment and cell probs.
  Eigen::VectorXd omega1 = w1, omega2 = w2;
  Eigen::VectorXd pk(K);
  double denom = 0.0, scale = 1.0;
  const Eigen::VectorXd eta2 = out.resid.eta.array().square();
  switch (spec.population_mode) {
    case PopulationMode::reweighted:
      out.method = "reweighted";
      omega1 = w1.array() / prop1.array();
      omega2 = w2.array() / (1.0 - prop2.array());
      out.eww = p * weighted_moment(s1.W, w1) + (1.0 - p) * weighted_moment(s2.W, w2);
      pk = p * f1 + (1.0 - p) * f0;
      denom = (1.0 - p) * wmean(eta2.array() / (1.0 - prop2.array()), w2);
      scale = 1.0;
      break;
    case PopulationMode::target_y_population:
      out.method = "target_y_population";
      omega2 = w2.array() * prop2.array() / (1.0 - prop2.array());
      out.eww = weighted_moment(s1.W, w1);
      pk = f1;
      denom = (1.0 - p) * wmean(eta2.array() * prop2.array() / (1.0 - prop2.array()), w2);
      scale = p;
      break;
    case PopulationMode::subpopulation:
      out.method = "subpopulation";
      omega2 = w2.array() * prop2.array();
      out.eww = weighted_moment(s1.W, w1);
      pk = f1;
      denom = wmean(eta2.array() * prop2.array(), w2);
      scale = p;
      break;
    default:
      throw ValidationError("bounds_weighted: unknown mode");
  }
  if (!(denom > 0.0)) throw SingularityError("bounds_weighted: zero denominator");
  out.mean_sq_eta = denom;

  out.delta_Y = ols_fit(s1.W, s1.y, omega1).coef;
  out.delta_d = ols_fit(s2.W, out.resid.eta, omega2).coef;
  out.nu_Y = s1.y - s1.W * out.delta_Y;
  out.nu_d = out.resid.eta - s2.W * out.delta_d;
  out.delta_cross = out.delta_d.dot(out.eww * out.delta_Y);

  out.cell_qip.resize(K);
  double qip_sum = 0.0, anti_sum = 0.0;
  for (int k = 0; k < K; ++k) {
    EmpiricalQuantile fk = cell_quantile(out.nu_Y, w1, grouping.assign1, k);
    EmpiricalQuantile gk = cell_quantile(out.nu_d, w2, grouping.assign2, k);
    out.cell_qip(k) = quantile_inner_product(gk, fk);
    qip_sum += pk(k) * out.cell_qip(k);
    anti_sum += pk(k) * antitone_inner_product(gk, fk);
  }
  out.cell_qip_sum = qip_sum;
  out.upper = scale * (out.delta_cross + qip_sum) / denom;
  out.lower = scale * (out.delta_cross + anti_sum) / denom;
  return out;
}

Interval pacini_bounds(const OutcomeSample& s1, const RegressorSample& s2,
                       const ProblemSpec& spec) {
  require_valid(spec, s1, s2);
  if (!spec.common_regressor_columns.empty()) {
    throw ValidationError("pacini_bounds: common regressors designated");
  }
  Eigen::VectorXd w1 = effective_weights(s1.weights, s1.n());
  Eigen::VectorXd w2 = effective_weights(s2.weights, s2.m());
  Eigen::MatrixXd X = design_matrix(s2, spec);
  Eigen::MatrixXd exx = weighted_moment(X, w2);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(exx);
  if (ldlt.info() != Eigen::Success) {
    throw SingularityError("pacini_bounds: singular E(XX')");
  }
  Eigen::VectorXd wvec = ldlt.solve(spec.d);

  EmpiricalQuantile fy(std::span<const double>(s1.y.data(), static_cast<std::size_t>(s1.n())),
                       std::span<const double>(w1.data(), static_cast<std::size_t>(s1.n())));
  Interval out;
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    if (wvec(k) == 0.0) continue;
    Eigen::VectorXd xk = X.col(k);
    EmpiricalQuantile fx(std::span<const double>(xk.data(), static_cast<std::size_t>(xk.size())),
                         std::span<const double>(w2.data(), static_cast<std::size_t>(w2.size())));
    double como = quantile_inner_product(fx, fy);
    double anti = antitone_inner_product(fx, fy);
    if (wvec(k) > 0.0) {
      out.upper += wvec(k) * como;
      out.lower += wvec(k) * anti;
    } else {
      out.upper += wvec(k) * anti;
      out.lower += wvec(k) * como;
    }
  }
  return out;
}

}  // namespace fusebound
