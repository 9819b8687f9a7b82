#include "fusebound/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "fusebound/regress.hpp"

namespace fusebound {

int default_k(Eigen::Index n, Eigen::Index m) {
  double base = static_cast<double>(std::min(n, m));
  int k = static_cast<int>(std::floor(std::pow(base, 0.2)));
  return std::max(2, k);
}

namespace {

Eigen::VectorXd pooled_probs(const std::vector<int>& a1, const std::vector<int>& a2,
                             const Eigen::VectorXd& w1, const Eigen::VectorXd& w2,
                             int K) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(K);
  for (std::size_t i = 0; i < a1.size(); ++i) p(a1[i]) += w1(static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < a2.size(); ++j) p(a2[j]) += w2(static_cast<Eigen::Index>(j));
  p /= p.sum();
  return p;
}

// Merge cells empty in either sample into the nearest remaining center.
void repair_and_finalize(Grouping& g, const Eigen::VectorXd& w1,
                         const Eigen::VectorXd& w2) {
  bool have_centers = g.centers.rows() > 0;
  while (true) {
    int K = g.K;
    std::vector<double> c1(static_cast<std::size_t>(K), 0.0), c2(static_cast<std::size_t>(K), 0.0);
    for (std::size_t i = 0; i < g.assign1.size(); ++i) c1[static_cast<std::size_t>(g.assign1[i])] += w1(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < g.assign2.size(); ++j) c2[static_cast<std::size_t>(g.assign2[j])] += w2(static_cast<Eigen::Index>(j));
    int bad = -1;
    for (int k = 0; k < K; ++k) {
      if (c1[static_cast<std::size_t>(k)] <= 0.0 || c2[static_cast<std::size_t>(k)] <= 0.0) { bad = k; break; }
    }
    if (bad < 0 || K <= 1) break;

    int target = -1;
    if (have_centers) {
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        if (k == bad) continue;
        double dist = (g.centers.row(k) - g.centers.row(bad)).squaredNorm();
        if (dist < best) { best = dist; target = k; }
      }
    } else {
      target = bad == 0 ? 1 : bad - 1;
    }
    auto remap = [&](int a) {
      if (a == bad) a = target;
      return a > bad ? a - 1 : a;
    };
    for (auto& a : g.assign1) a = remap(a);
    for (auto& a : g.assign2) a = remap(a);
    if (have_centers) {
      Eigen::MatrixXd nc(K - 1, g.centers.cols());
      int r = 0;
      for (int k = 0; k < K; ++k) {
        if (k != bad) nc.row(r++) = g.centers.row(k);
      }
      g.centers = nc;
    }
    g.K = K - 1;
    g.k_reduced = true;
  }
  g.p_hat = pooled_probs(g.assign1, g.assign2, w1, w2, g.K);
}

}  // namespace

Grouping constant_grouping(Eigen::Index n, Eigen::Index m) {
  Grouping g;
  g.K = 1;
  g.assign1.assign(static_cast<std::size_t>(n), 0);
  g.assign2.assign(static_cast<std::size_t>(m), 0);
  g.p_hat = Eigen::VectorXd::Ones(1);
  return g;
}

Grouping grouping_from_assignments(std::vector<int> assign1, std::vector<int> assign2,
                                   const Eigen::VectorXd& w1, const Eigen::VectorXd& w2) {
  Grouping g;
  int K = 0;
  for (int a : assign1) K = std::max(K, a + 1);
  for (int a : assign2) K = std::max(K, a + 1);
  g.K = K;
  g.assign1 = std::move(assign1);
  g.assign2 = std::move(assign2);
  repair_and_finalize(g, w1, w2);
  return g;
}

Grouping build_grouping(const OutcomeSample& s1, const RegressorSample& s2,
                        const Eigen::VectorXd& residuals_Y,
                        const Eigen::VectorXd& residuals_d, int K,
                        std::uint64_t seed) {
  Eigen::Index n = s1.n(), m = s2.m();
  Eigen::VectorXd w1 = effective_weights(s1.weights, n);
  Eigen::VectorXd w2 = effective_weights(s2.weights, m);

  if (K <= 1 || s1.W.cols() == 0) return constant_grouping(n, m);

  // Finite-support shortcut: g(W) = W when W takes at most K distinct rows.
  {
    std::map<std::vector<double>, int> cells;
    std::vector<int> a1, a2;
    a1.reserve(static_cast<std::size_t>(n));
    a2.reserve(static_cast<std::size_t>(m));
    bool finite = true;
    auto assign_row = [&](const Eigen::MatrixXd& W, Eigen::Index r) {
      std::vector<double> key(W.cols() >= 0 ? static_cast<std::size_t>(W.cols()) : 0);
      for (Eigen::Index c = 0; c < W.cols(); ++c) key[static_cast<std::size_t>(c)] = W(r, c);
      auto [it, inserted] = cells.try_emplace(key, static_cast<int>(cells.size()));
      if (static_cast<int>(cells.size()) > K) finite = false;
      return it->second;
    };
    for (Eigen::Index i = 0; i < n && finite; ++i) a1.push_back(assign_row(s1.W, i));
    for (Eigen::Index j = 0; j < m && finite; ++j) a2.push_back(assign_row(s2.W, j));
    if (finite) {
      Grouping g;
      g.K = static_cast<int>(cells.size());
      g.k_reduced = g.K < K;
      g.assign1 = std::move(a1);
      g.assign2 = std::move(a2);
      repair_and_finalize(g, w1, w2);
      return g;
    }
  }

  // Heteroskedasticity indices: regress |nu| on W in each sample, evaluate
  // both fitted indices on all rows of both samples.
  Eigen::VectorXd sigY = ols_fit(s1.W, residuals_Y.cwiseAbs(), w1).coef;
  Eigen::VectorXd sigD = ols_fit(s2.W, residuals_d.cwiseAbs(), w2).coef;

  Eigen::Index N = n + m;
  Eigen::MatrixXd pts(N, 2);
  pts.col(0).head(n) = s1.W * sigY;
  pts.col(1).head(n) = s1.W * sigD;
  pts.col(0).tail(m) = s2.W * sigY;
  pts.col(1).tail(m) = s2.W * sigD;
  Eigen::VectorXd wts(N);
  wts.head(n) = w1;
  wts.tail(m) = w2;

  // z-score each index on the pooled sample
  double tot = wts.sum();
  for (int c = 0; c < 2; ++c) {
    double mu = (wts.array() * pts.col(c).array()).sum() / tot;
    double var = (wts.array() * (pts.col(c).array() - mu).square()).sum() / tot;
    double sd = var > 0 ? std::sqrt(var) : 1.0;
    pts.col(c) = (pts.col(c).array() - mu) / sd;
  }

  // Count distinct points; reduce K if necessary.
  Grouping g;
  {
    std::map<std::pair<double, double>, int> uniq;
    for (Eigen::Index r = 0; r < N && static_cast<int>(uniq.size()) <= K; ++r) {
      uniq.try_emplace({pts(r, 0), pts(r, 1)}, 0);
    }
    if (static_cast<int>(uniq.size()) < K) {
      K = std::max(1, static_cast<int>(uniq.size()));
      g.k_reduced = true;
    }
  }

  // k-means++ initialization, then Lloyd iterations.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd centers(K, 2);
  Eigen::VectorXd d2 = Eigen::VectorXd::Constant(N, std::numeric_limits<double>::infinity());
  {
    Eigen::Index first = static_cast<Eigen::Index>(unif(rng) * static_cast<double>(N));
    first = std::min(first, N - 1);
    centers.row(0) = pts.row(first);
    for (int k = 1; k < K; ++k) {
      for (Eigen::Index r = 0; r < N; ++r) {
        d2(r) = std::min(d2(r), (pts.row(r) - centers.row(k - 1)).squaredNorm());
      }
      double mass = (wts.array() * d2.array()).sum();
      Eigen::Index pick = N - 1;
      if (mass > 0) {
        double u = unif(rng) * mass, acc = 0.0;
        for (Eigen::Index r = 0; r < N; ++r) {
          acc += wts(r) * d2(r);
          if (acc >= u) { pick = r; break; }
        }
      }
      centers.row(k) = pts.row(pick);
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(N), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Eigen::Index r = 0; r < N; ++r) {
      int best = 0;
      double bestd = (pts.row(r) - centers.row(0)).squaredNorm();
      for (int k = 1; k < K; ++k) {
        double dd = (pts.row(r) - centers.row(k)).squaredNorm();
        if (dd < bestd) { bestd = dd; best = k; }
      }
      if (assign[static_cast<std::size_t>(r)] != best) {
        assign[static_cast<std::size_t>(r)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, 2);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(K);
    for (Eigen::Index r = 0; r < N; ++r) {
      sums.row(assign[static_cast<std::size_t>(r)]) += wts(r) * pts.row(r);
      mass(assign[static_cast<std::size_t>(r)]) += wts(r);
    }
    for (int k = 0; k < K; ++k) {
      if (mass(k) > 0) centers.row(k) = sums.row(k) / mass(k);
    }
  }

  g.K = K;
  g.centers = centers;
  g.assign1.assign(assign.begin(), assign.begin() + n);
  g.assign2.assign(assign.begin() + n, assign.end());
  repair_and_finalize(g, w1, w2);
  return g;
}

}  // namespace fusebound
