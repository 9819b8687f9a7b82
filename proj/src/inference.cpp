#include "fusebound/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace fusebound {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double t) {
  if (!(t > 0.0 && t < 1.0)) throw ValidationError("normal_quantile: t outside (0,1)");
  double lo = -12.0, hi = 12.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
    double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < t ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double hhat(double x, const EmpiricalQuantile& F_n, const EmpiricalQuantile& G_m) {
  double gl = G_m.cdf_left(x);
  double g = G_m.cdf(x);
  if (g > gl) {
    return (F_n.quantile_integral(g) - F_n.quantile_integral(gl)) / (g - gl);
  }
  return F_n.quantile(g);
}

namespace {

double wmean(const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
  return (w.array() * x.array()).sum() / w.sum();
}

void center_columns(Eigen::MatrixXd& cols, const Eigen::VectorXd& w) {
  for (Eigen::Index c = 0; c < cols.cols(); ++c) {
    cols.col(c).array() -= wmean(cols.col(c), w);
  }
}

// psi3-style column: for each row value v_i of `vals`,
//   -int [1{v_i <= t} - G(t)] Finv(G(t)) dt
// as an exact sum over inter-order-statistic segments of G; the integrand
// vanishes outside [min G-support, max G-support].
Eigen::VectorXd crossing_integral_column(const Eigen::VectorXd& vals,
                                         const EmpiricalQuantile& G,
                                         const EmpiricalQuantile& F) {
  const auto& e = G.values();
  const auto& c = G.cum_weights();
  std::size_t r = e.size();
  // suffix[s] = sum_{u >= s} (e_{u+1}-e_u) Finv(c_u);  base = sum seg_u c_u
  std::vector<double> suffix(r, 0.0);
  double base = 0.0;
  {
    KahanSum bacc;
    double tail = 0.0;
    for (std::size_t s = r - 1; s + 1 >= 1; --s) {
      if (s + 1 < r) {
        double seg = (e[s + 1] - e[s]) * F.quantile(c[s]);
        tail += seg;
        bacc.add(seg * c[s]);
      }
      suffix[s] = tail;
      if (s == 0) break;
    }
    base = bacc.value();
  }
  Eigen::VectorXd out(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    // first segment index s with e_s >= v_i
    auto it = std::lower_bound(e.begin(), e.end(), vals(i));
    double ind_part = (it == e.end()) ? 0.0 : suffix[static_cast<std::size_t>(it - e.begin())];
    out(i) = -(ind_part - base);
  }
  return out;
}

double assemble_variance(const Eigen::MatrixXd& s2_cols, const Eigen::VectorXd& w2,
                         const Eigen::MatrixXd& s1_cols, const Eigen::VectorXd& w1,
                         double lambda, double mean_sq_eta,
                         Eigen::VectorXd& s2_total, Eigen::VectorXd& s1_total) {
  s2_total = s2_cols.rowwise().sum();
  s1_total = s1_cols.rowwise().sum();
  double v2 = (w2.array() * s2_total.array().square()).sum() / w2.sum();
  double v1 = (w1.array() * s1_total.array().square()).sum() / w1.sum();
  return (lambda * v2 + (1.0 - lambda) * v1) / (mean_sq_eta * mean_sq_eta);
}

}  // namespace

InfluenceSet influence_no_common(const OutcomeSample& s1, const RegressorSample& s2,
                                 const Residualization& resid,
                                 const BoundsEstimate& bounds) {
  Eigen::Index n = s1.n(), m = s2.m();
  Eigen::VectorXd w1 = effective_weights(s1.weights, n);
  Eigen::VectorXd w2 = effective_weights(s2.weights, m);
  const Eigen::VectorXd& eta = resid.eta;
  double ms = resid.mean_sq_eta;

  InfluenceSet out;
  out.lambda_hat = static_cast<double>(n) / static_cast<double>(n + m);
  if (!(ms > 0.0)) {
    out.zero_variance_flag = true;
    out.s2_cols.setZero(m, 3);
    out.s1_cols.setZero(n, 1);
    out.s2_total.setZero(m);
    out.s1_total.setZero(n);
    return out;
  }

  EmpiricalQuantile F(std::span<const double>(s1.y.data(), static_cast<std::size_t>(n)),
                      std::span<const double>(w1.data(), static_cast<std::size_t>(n)));
  EmpiricalQuantile G(std::span<const double>(eta.data(), static_cast<std::size_t>(m)),
                      std::span<const double>(w2.data(), static_cast<std::size_t>(m)));

  out.s2_cols.resize(m, 3);
  // psi1: recentered eta^2 scaled by the estimated bound
  out.s2_cols.col(0) = -bounds.upper * (eta.array().square() - ms);

  // psi2: OLS estimation effect of gamma, through h(eta)
  if (resid.T_minus.cols() > 0) {
    Eigen::VectorXd hvals(m);
    for (Eigen::Index j = 0; j < m; ++j) hvals(j) = hhat(eta(j), F, G);
    double tot2 = w2.sum();
    Eigen::VectorXd a = resid.T_minus.transpose() * (w2.array() * hvals.array()).matrix() / tot2;
    Eigen::MatrixXd B = resid.T_minus.transpose() * w2.asDiagonal() * resid.T_minus / tot2;
    Eigen::VectorXd coef = B.ldlt().solve(a);
    out.s2_cols.col(1) = -(resid.T_minus * coef).array() * eta.array();
  } else {
    out.s2_cols.col(1).setZero();
  }

  out.s2_cols.col(2) = crossing_integral_column(eta, G, F);

  out.s1_cols.resize(n, 1);
  out.s1_cols.col(0) = crossing_integral_column(s1.y, F, G);

  center_columns(out.s2_cols, w2);
  center_columns(out.s1_cols, w1);
  out.variance = assemble_variance(out.s2_cols, w2, out.s1_cols, w1,
                                   out.lambda_hat, ms, out.s2_total, out.s1_total);
  if (F.size() == 1 && G.size() == 1) out.zero_variance_flag = true;
  return out;
}

InfluenceSet influence_common(const OutcomeSample& s1, const RegressorSample& s2,
                              const ProblemSpec& spec, const Grouping& grouping,
                              const BoundsEstimate& bounds) {
  (void)spec;
  Eigen::Index n = s1.n(), m = s2.m();
  Eigen::VectorXd w1 = effective_weights(s1.weights, n);
  Eigen::VectorXd w2 = effective_weights(s2.weights, m);
  const Residualization& resid = bounds.resid;
  const Eigen::VectorXd& eta = resid.eta;
  const Eigen::VectorXd& nu_d = bounds.nu_d;
  const Eigen::VectorXd& nu_Y = bounds.nu_Y;
  double ms = bounds.mean_sq_eta;
  const int K = grouping.K;

  InfluenceSet out;
  out.lambda_hat = static_cast<double>(n) / static_cast<double>(n + m);
  if (!(ms > 0.0)) {
    out.zero_variance_flag = true;
    out.s2_cols.setZero(m, 6);
    out.s1_cols.setZero(n, 5);
    out.s2_total.setZero(m);
    out.s1_total.setZero(n);
    return out;
  }

  Eigen::LDLT<Eigen::MatrixXd> eww_ldlt(bounds.eww);

  // C = E[W T_{-1}'] E[T_{-1}T_{-1}']^{-1} on S2
  double tot2 = w2.sum(), tot1 = w1.sum();
  Eigen::MatrixXd C;
  if (resid.T_minus.cols() > 0) {
    Eigen::MatrixXd ewt = s2.W.transpose() * w2.asDiagonal() * resid.T_minus / tot2;
    Eigen::MatrixXd ett = resid.T_minus.transpose() * w2.asDiagonal() * resid.T_minus / tot2;
    C = ett.ldlt().solve(ewt.transpose()).transpose();
  }

  // Cell-conditional distributions and per-cell pieces
  std::vector<std::vector<Eigen::Index>> rows1(static_cast<std::size_t>(K)), rows2(static_cast<std::size_t>(K));
  for (Eigen::Index i = 0; i < n; ++i) rows1[static_cast<std::size_t>(grouping.assign1[static_cast<std::size_t>(i)])].push_back(i);
  for (Eigen::Index j = 0; j < m; ++j) rows2[static_cast<std::size_t>(grouping.assign2[static_cast<std::size_t>(j)])].push_back(j);

  double pooled_qip = bounds.cell_qip.dot(grouping.p_hat);
  Eigen::VectorXd psi5 = Eigen::VectorXd::Zero(m), psi7 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd psi8 = Eigen::VectorXd::Zero(m), psi9 = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd a_cell(K, s2.W.cols());  // E[Finv(G(nu_d)) W' | cell]
  Eigen::MatrixXd b_cell(K, s1.W.cols());  // E[Ginv(F(nu_Y)) W' | cell]

  for (int k = 0; k < K; ++k) {
    const auto& r1 = rows1[static_cast<std::size_t>(k)];
    const auto& r2 = rows2[static_cast<std::size_t>(k)];
    std::vector<double> v1k, w1k, v2k, w2k;
    v1k.reserve(r1.size()); w1k.reserve(r1.size());
    v2k.reserve(r2.size()); w2k.reserve(r2.size());
    for (Eigen::Index i : r1) { v1k.push_back(nu_Y(i)); w1k.push_back(w1(i)); }
    for (Eigen::Index j : r2) { v2k.push_back(nu_d(j)); w2k.push_back(w2(j)); }
    EmpiricalQuantile Fk(v1k, w1k), Gk(v2k, w2k);

    Eigen::VectorXd nu2k = Eigen::Map<const Eigen::VectorXd>(v2k.data(), static_cast<Eigen::Index>(v2k.size()));
    Eigen::VectorXd nu1k = Eigen::Map<const Eigen::VectorXd>(v1k.data(), static_cast<Eigen::Index>(v1k.size()));
    Eigen::VectorXd p5k = crossing_integral_column(nu2k, Gk, Fk);
    Eigen::VectorXd p7k = crossing_integral_column(nu1k, Fk, Gk);

    Eigen::RowVectorXd ak = Eigen::RowVectorXd::Zero(s2.W.cols());
    double mk2 = 0.0;
    for (std::size_t t = 0; t < r2.size(); ++t) {
      Eigen::Index j = r2[t];
      psi5(j) = p5k(static_cast<Eigen::Index>(t));
      psi8(j) = bounds.cell_qip(k) - pooled_qip;
      double hh = hhat(nu_d(j), Fk, Gk);
      ak += w2(j) * hh * s2.W.row(j);
      mk2 += w2(j);
    }
    a_cell.row(k) = ak / mk2;

    Eigen::RowVectorXd bk = Eigen::RowVectorXd::Zero(s1.W.cols());
    double mk1 = 0.0;
    for (std::size_t t = 0; t < r1.size(); ++t) {
      Eigen::Index i = r1[t];
      psi7(i) = p7k(static_cast<Eigen::Index>(t));
      psi9(i) = bounds.cell_qip(k) - pooled_qip;
      double hh = hhat(nu_Y(i), Gk, Fk);
      bk += w1(i) * hh * s1.W.row(i);
      mk1 += w1(i);
    }
    b_cell.row(k) = bk / mk1;
  }

  // S2 side: psi^g_1, psi^g_{2,2}, psi^g_4, psi^g_5, psi^g_8, psi^g_10
  out.s2_cols.resize(m, 6);
  for (Eigen::Index j = 0; j < m; ++j) {
    int k = grouping.assign2[static_cast<std::size_t>(j)];
    Eigen::VectorXd bracket = s2.W.row(j).transpose() * nu_d(j);
    if (C.size() > 0) bracket -= C * (resid.T_minus.row(j).transpose() * eta(j));
    out.s2_cols(j, 0) = bounds.delta_Y.dot(bracket);
    // pooled E(WW'): S2 carries its (1-lambda) share of the moment-matrix influence
    out.s2_cols(j, 1) = (1.0 - out.lambda_hat) * bounds.delta_d.dot(
        (s2.W.row(j).transpose() * s2.W.row(j) - bounds.eww) * bounds.delta_Y);
    out.s2_cols(j, 2) = -a_cell.row(k).dot(eww_ldlt.solve(bracket));
    out.s2_cols(j, 3) = psi5(j);
    // pooled p_hat: S2 carries only its (1-lambda) share of the cell-probability influence
    out.s2_cols(j, 4) = (1.0 - out.lambda_hat) * psi8(j);
    out.s2_cols(j, 5) = -bounds.upper * (eta(j) * eta(j) - ms);
  }

  // S1 side: psi^g_{2,1}, psi^g_3, psi^g_6, psi^g_7, psi^g_9
  out.s1_cols.resize(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    int k = grouping.assign1[static_cast<std::size_t>(i)];
    // pooled E(WW'): S1 carries the lambda share
    out.s1_cols(i, 0) = out.lambda_hat * bounds.delta_d.dot(
        (s1.W.row(i).transpose() * s1.W.row(i) - bounds.eww) * bounds.delta_Y);
    out.s1_cols(i, 1) = bounds.delta_d.dot(s1.W.row(i)) * nu_Y(i);
    Eigen::VectorXd wi = s1.W.row(i).transpose() * nu_Y(i);
    out.s1_cols(i, 2) = -b_cell.row(k).dot(eww_ldlt.solve(wi));
    out.s1_cols(i, 3) = psi7(i);
    // pooled p_hat: S1 carries the lambda share
    out.s1_cols(i, 4) = out.lambda_hat * psi9(i);
  }

  center_columns(out.s2_cols, w2);
  center_columns(out.s1_cols, w1);
  out.variance = assemble_variance(out.s2_cols, w2, out.s1_cols, w1,
                                   out.lambda_hat, ms, out.s2_total, out.s1_total);
  (void)tot1;
  return out;
}

double stoye_critical_value(double delta, double sigma_max, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha outside (0,1)");
  double shift = sigma_max > 0.0 ? delta / sigma_max : std::numeric_limits<double>::infinity();
  if (!std::isfinite(shift)) return normal_quantile(1.0 - alpha);
  double lo = 0.0, hi = normal_quantile(1.0 - alpha / 2.0) + 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-10; ++iter) {
    double c = 0.5 * (lo + hi);
    double cov = normal_cdf(c + shift) - normal_cdf(-c);
    (cov < 1.0 - alpha ? lo : hi) = c;
  }
  return 0.5 * (lo + hi);
}

ConfidenceInterval confidence_interval(const BoundsEstimate& bounds,
                                       const InfluenceSet& infl_lower,
                                       const InfluenceSet& infl_upper,
                                       double alpha, CiMethod method,
                                       bool width_informative) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha outside (0,1)");
  double rate = static_cast<double>(bounds.n + bounds.m) /
                (static_cast<double>(bounds.n) * static_cast<double>(bounds.m));
  double se_up = std::sqrt(rate * infl_upper.variance);
  double se_lo = std::sqrt(rate * infl_lower.variance);

  ConfidenceInterval ci;
  ci.level = 1.0 - alpha;
  ci.method = method;
  double c = 0.0;
  if (method == CiMethod::stoye) {
    double delta =
        width_informative ? std::max(bounds.upper - bounds.lower, 0.0) : 0.0;
    double smax = std::max(se_up, se_lo);
    c = smax > 0.0 ? stoye_critical_value(delta, smax, alpha)
                   : normal_quantile(1.0 - alpha);
  } else {
    c = normal_quantile(1.0 - alpha);
  }
  ci.critical_value = c;
  ci.lower = bounds.lower - c * se_lo;
  ci.upper = bounds.upper + c * se_up;
  return ci;
}

namespace {

ProblemSpec negate_direction(const ProblemSpec& spec) {
  ProblemSpec neg = spec;
  neg.d = -spec.d;
  return neg;
}

template <typename Rng>
std::vector<Eigen::Index> resample_rows(Eigen::Index n, const std::vector<int>& cluster,
                                        Rng& rng) {
  std::vector<Eigen::Index> rows;
  if (cluster.empty()) {
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    rows.resize(static_cast<std::size_t>(n));
    for (auto& r : rows) r = pick(rng);
  } else {
    std::vector<std::vector<Eigen::Index>> by_cluster;
    std::map<int, std::size_t> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [it, fresh] = idx.try_emplace(cluster[static_cast<std::size_t>(i)], by_cluster.size());
      if (fresh) by_cluster.emplace_back();
      by_cluster[it->second].push_back(i);
    }
    std::uniform_int_distribution<std::size_t> pick(0, by_cluster.size() - 1);
    for (std::size_t c = 0; c < by_cluster.size(); ++c) {
      const auto& chosen = by_cluster[pick(rng)];
      rows.insert(rows.end(), chosen.begin(), chosen.end());
    }
  }
  return rows;
}

OutcomeSample subset(const OutcomeSample& s, const std::vector<Eigen::Index>& rows) {
  OutcomeSample out;
  Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  out.y.resize(n);
  out.W.resize(n, s.W.cols());
  Eigen::VectorXd w = effective_weights(s.weights, s.n());
  out.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.y(i) = s.y(rows[static_cast<std::size_t>(i)]);
    out.W.row(i) = s.W.row(rows[static_cast<std::size_t>(i)]);
    out.weights(i) = w(rows[static_cast<std::size_t>(i)]);
  }
  return out;
}

RegressorSample subset(const RegressorSample& s, const std::vector<Eigen::Index>& rows) {
  RegressorSample out;
  Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  out.Xo.resize(m, s.Xo.cols());
  out.W.resize(m, s.W.cols());
  Eigen::VectorXd w = effective_weights(s.weights, s.m());
  out.weights.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    out.Xo.row(j) = s.Xo.row(rows[static_cast<std::size_t>(j)]);
    out.W.row(j) = s.W.row(rows[static_cast<std::size_t>(j)]);
    out.weights(j) = w(rows[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace

Analysis analyze(const OutcomeSample& s1, const RegressorSample& s2,
                 const ProblemSpec& spec, const AnalysisOptions& opt) {
  require_valid(spec, s1, s2);
  Analysis out;
  ProblemSpec neg = negate_direction(spec);
  bool has_w = s1.W.cols() > 0;
  bool weighted_mode = spec.population_mode != PopulationMode::common;

  if (!has_w) {
    out.bounds = bounds_no_common(s1, s2, spec);
    BoundsEstimate bneg = bounds_no_common(s1, s2, neg);
    InfluenceSet up = influence_no_common(s1, s2, out.bounds.resid, out.bounds);
    InfluenceSet lo = influence_no_common(s1, s2, bneg.resid, bneg);
    out.var_upper = up.variance;
    out.var_lower = lo.variance;
    out.ci = confidence_interval(out.bounds, lo, up, opt.alpha, opt.ci_method);
  } else {
    // residuals for the grouping indices, from the base-weight regressions
    Residualization resid = fwl_residualize(s2, spec);
    Eigen::VectorXd w1 = effective_weights(s1.weights, s1.n());
    Eigen::VectorXd w2 = effective_weights(s2.weights, s2.m());
    Eigen::VectorXd nu_Y = ols_fit(s1.W, s1.y, w1).residuals;
    Eigen::VectorXd nu_d = ols_fit(s2.W, resid.eta, w2).residuals;
    int K = opt.K > 0 ? opt.K : default_k(s1.n(), s2.m());
    out.grouping = build_grouping(s1, s2, nu_Y, nu_d, K, opt.seed);
    out.used_grouping = true;

    if (!weighted_mode) {
      out.bounds = bounds_with_common(s1, s2, spec, out.grouping);
      BoundsEstimate bneg = bounds_with_common(s1, s2, neg, out.grouping);
      InfluenceSet up = influence_common(s1, s2, spec, out.grouping, out.bounds);
      InfluenceSet lo = influence_common(s1, s2, neg, out.grouping, bneg);
      out.var_upper = up.variance;
      out.var_lower = lo.variance;
      // The grouped width is estimated with cell-wise plug-ins whose inward
      // bias is first order at moderate cell sizes, so the stoye reduction
      // toward z_{1-alpha} is switched off on this path.
      out.ci = confidence_interval(out.bounds, lo, up, opt.alpha, opt.ci_method,
                                   /*width_informative=*/false);
    } else {
      out.bounds = bounds_weighted(s1, s2, spec, out.grouping);
      // No influence-function theory for the reweighted modes: bootstrap s.e.
      std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
      std::vector<double> lows, ups;
      for (int b = 0; b < opt.bootstrap_reps; ++b) {
        auto r1 = resample_rows(s1.n(), opt.cluster1, rng);
        auto r2 = resample_rows(s2.m(), opt.cluster2, rng);
        try {
          OutcomeSample b1 = subset(s1, r1);
          RegressorSample b2 = subset(s2, r2);
          Grouping bg = grouping_from_assignments(
              [&] { std::vector<int> a; for (auto i : r1) a.push_back(out.grouping.assign1[static_cast<std::size_t>(i)]); return a; }(),
              [&] { std::vector<int> a; for (auto j : r2) a.push_back(out.grouping.assign2[static_cast<std::size_t>(j)]); return a; }(),
              effective_weights(b1.weights, b1.n()), effective_weights(b2.weights, b2.m()));
          BoundsEstimate bb = bounds_weighted(b1, b2, spec, bg);
          lows.push_back(bb.lower);
          ups.push_back(bb.upper);
        } catch (const std::runtime_error&) {
          // degenerate resample; skip
        }
      }
      auto sd = [](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        double mu = 0.0;
        for (double x : v) mu += x;
        mu /= static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - mu) * (x - mu);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
      };
      double se_lo = sd(lows), se_up = sd(ups);
      double rate = static_cast<double>(out.bounds.n + out.bounds.m) /
                    (static_cast<double>(out.bounds.n) * static_cast<double>(out.bounds.m));
      out.var_lower = se_lo * se_lo / rate;
      out.var_upper = se_up * se_up / rate;
      // Same caveat as the grouped path: the width is not bias-free, so keep
      // the two-sided critical value.
      double smax = std::max(se_lo, se_up);
      double c = smax > 0.0 ? stoye_critical_value(0.0, smax, opt.alpha)
                            : normal_quantile(1.0 - opt.alpha);
      out.ci.level = 1.0 - opt.alpha;
      out.ci.method = CiMethod::bootstrap;
      out.ci.critical_value = c;
      out.ci.lower = out.bounds.lower - c * se_lo;
      out.ci.upper = out.bounds.upper + c * se_up;
    }
  }
  double rate = static_cast<double>(out.bounds.n + out.bounds.m) /
                (static_cast<double>(out.bounds.n) * static_cast<double>(out.bounds.m));
  out.se_upper = std::sqrt(rate * out.var_upper);
  out.se_lower = std::sqrt(rate * out.var_lower);
  return out;
}

}  // namespace fusebound
