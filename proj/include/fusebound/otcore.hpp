#ifndef FUSEBOUND_OTCORE_HPP
#define FUSEBOUND_OTCORE_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fusebound {

// Compensated (Kahan) accumulator for long merged-grid sums.
class KahanSum {
public:
  void add(double x) {
    double y = x - comp_;
    double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Weighted empirical distribution, stored as distinct sorted values with
// normalized cumulative weights (last entry exactly 1).
// Quantile convention: F^{-1}(t) = inf{x : F(x) >= t}, so quantile(t)
// returns the value at the first cumulative weight >= t.
class EmpiricalQuantile {
public:
  EmpiricalQuantile(std::span<const double> values,
                    std::span<const double> weights);
  explicit EmpiricalQuantile(std::span<const double> values);

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& cum_weights() const { return cum_; }

  double quantile(double t) const;
  // F(x) and the left limit F(x^-).
  double cdf(double x) const;
  double cdf_left(double x) const;
  // \int_0^t F^{-1}(u) du.
  double quantile_integral(double t) const;

  double mean() const;
  double mean_sq() const;
  double min() const { return values_.front(); }
  double max() const { return values_.back(); }

  // Distribution of -X.
  EmpiricalQuantile negated() const;

private:
  EmpiricalQuantile() = default;
  std::vector<double> values_;  // distinct, ascending
  std::vector<double> cum_;     // strictly increasing, ends at 1
};

// \int_0^1 F_a^{-1}(t) F_b^{-1}(t) dt on the merged grid of both
// cumulative-weight breakpoints; this is the comonotone (maximal) coupling
// value of E[AB] with the two marginals fixed.
double quantile_inner_product(const EmpiricalQuantile& a,
                              const EmpiricalQuantile& b);

// Antitone (minimal) coupling value, equal to -QIP(-A, B).
double antitone_inner_product(const EmpiricalQuantile& a,
                              const EmpiricalQuantile& b);

// (\int_0^1 (F_b^{-1} - F_a^{-1})^2 dt)^{1/2}.
double wasserstein2(const EmpiricalQuantile& a, const EmpiricalQuantile& b);

}  // namespace fusebound

#endif  // FUSEBOUND_OTCORE_HPP
