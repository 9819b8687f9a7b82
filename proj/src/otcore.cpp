#include "fusebound/otcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fusebound {

namespace {

std::vector<double> unit_weights(std::size_t n) {
  return std::vector<double>(n, 1.0);
}

}  // namespace

EmpiricalQuantile::EmpiricalQuantile(std::span<const double> values,
                                     std::span<const double> weights) {
  if (values.empty()) {
    throw std::invalid_argument("EmpiricalQuantile: empty sample");
  }
  if (values.size() != weights.size()) {
    throw std::invalid_argument("EmpiricalQuantile: size mismatch");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return values[i] < values[j];
  });

  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) {
      throw std::invalid_argument("EmpiricalQuantile: negative weight");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("EmpiricalQuantile: zero total weight");
  }

  values_.reserve(values.size());
  cum_.reserve(values.size());
  KahanSum acc;
  for (std::size_t k = 0; k < order.size(); ++k) {
    double v = values[order[k]];
    double w = weights[order[k]];
    if (w == 0.0) continue;
    acc.add(w / total);
    if (!values_.empty() && values_.back() == v) {
      cum_.back() = acc.value();
    } else {
      values_.push_back(v);
      cum_.push_back(acc.value());
    }
  }
  cum_.back() = 1.0;
}

EmpiricalQuantile::EmpiricalQuantile(std::span<const double> values)
    : EmpiricalQuantile(values, unit_weights(values.size())) {}

double EmpiricalQuantile::quantile(double t) const {
  if (t <= 0.0) return values_.front();
  auto it = std::lower_bound(cum_.begin(), cum_.end(), t);
  if (it == cum_.end()) return values_.back();
  return values_[static_cast<std::size_t>(it - cum_.begin())];
}

double EmpiricalQuantile::cdf(double x) const {
  auto it = std::upper_bound(values_.begin(), values_.end(), x);
  if (it == values_.begin()) return 0.0;
  return cum_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

double EmpiricalQuantile::cdf_left(double x) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), x);
  if (it == values_.begin()) return 0.0;
  return cum_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

double EmpiricalQuantile::quantile_integral(double t) const {
  if (t <= 0.0) return 0.0;
  if (t > 1.0) t = 1.0;
  KahanSum acc;
  double prev = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    double upper = std::min(cum_[k], t);
    acc.add((upper - prev) * values_[k]);
    if (cum_[k] >= t) break;
    prev = cum_[k];
  }
  return acc.value();
}

double EmpiricalQuantile::mean() const {
  KahanSum acc;
  double prev = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    acc.add((cum_[k] - prev) * values_[k]);
    prev = cum_[k];
  }
  return acc.value();
}

double EmpiricalQuantile::mean_sq() const {
  KahanSum acc;
  double prev = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    acc.add((cum_[k] - prev) * values_[k] * values_[k]);
    prev = cum_[k];
  }
  return acc.value();
}

EmpiricalQuantile EmpiricalQuantile::negated() const {
  EmpiricalQuantile out;
  std::size_t r = values_.size();
  out.values_.resize(r);
  out.cum_.resize(r);
  // Mass of -values_[k] is the mass of values_[k]; cumulative weights reverse.
  for (std::size_t k = 0; k < r; ++k) {
    out.values_[k] = -values_[r - 1 - k];
    out.cum_[k] = (k + 1 < r) ? 1.0 - cum_[r - 2 - k] : 1.0;
  }
  return out;
}

namespace {

// Walk the merged grid of breakpoints, accumulating f(va, vb) per segment.
template <typename SegFn>
double merged_grid_sum(const EmpiricalQuantile& a, const EmpiricalQuantile& b,
                       SegFn&& f) {
  const auto& av = a.values();
  const auto& ac = a.cum_weights();
  const auto& bv = b.values();
  const auto& bc = b.cum_weights();
  KahanSum acc;
  std::size_t i = 0, j = 0;
  double prev = 0.0;
  while (i < av.size() && j < bv.size()) {
    double t = std::min(ac[i], bc[j]);
    acc.add((t - prev) * f(av[i], bv[j]));
    prev = t;
    if (ac[i] == t) ++i;
    if (bc[j] == t) ++j;
  }
  return acc.value();
}

}  // namespace

double quantile_inner_product(const EmpiricalQuantile& a,
                              const EmpiricalQuantile& b) {
  return merged_grid_sum(a, b, [](double x, double y) { return x * y; });
}

double antitone_inner_product(const EmpiricalQuantile& a,
                              const EmpiricalQuantile& b) {
  return -quantile_inner_product(a.negated(), b);
}

double wasserstein2(const EmpiricalQuantile& a, const EmpiricalQuantile& b) {
  double s = merged_grid_sum(
      a, b, [](double x, double y) { return (y - x) * (y - x); });
  return std::sqrt(std::max(s, 0.0));
}

}  // namespace fusebound
