#ifndef FUSEBOUND_TYPES_HPP
#define FUSEBOUND_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace fusebound {

// Input/validation failure (dimension mismatch, bad flags, non-finite data).
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Numerically singular moment matrix or rank-deficient design.
class SingularityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Relative conditioning guard applied to all second-moment matrices.
inline constexpr double kSingularTol = 1e-10;

// Rows of (y, W, weight) from the Y dataset (sample S1).
struct OutcomeSample {
  Eigen::VectorXd y;
  Eigen::MatrixXd W;        // n x q, may have 0 columns
  Eigen::VectorXd weights;  // defaults to ones when empty

  Eigen::Index n() const { return y.size(); }
};

// Rows of (X_o, W, weight) from the X dataset (sample S2).
struct RegressorSample {
  Eigen::MatrixXd Xo;       // m x p_o
  Eigen::MatrixXd W;        // m x q
  Eigen::VectorXd weights;

  Eigen::Index m() const { return Xo.rows(); }
};

enum class PopulationMode { common, reweighted, target_y_population, subpopulation };

// Direction and column designations. The regression design is
// X = (X_o, X_c, intercept), with X_c the designated common-regressor
// columns of W (in listed order) and the intercept last when enabled.
struct ProblemSpec {
  Eigen::VectorXd d;  // length p = p_o + #common_regressor_columns + intercept
  std::vector<Eigen::Index> common_regressor_columns;  // indices into W
  bool intercept = true;
  PopulationMode population_mode = PopulationMode::common;
  double p_d1 = -1.0;  // P(D=1), required by the non-common modes

  Eigen::Index p(Eigen::Index p_o) const {
    return p_o + static_cast<Eigen::Index>(common_regressor_columns.size()) +
           (intercept ? 1 : 0);
  }
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const ProblemSpec& spec, const OutcomeSample& s1,
                          const RegressorSample& s2);

// Throws ValidationError unless validate(...) is ok.
void require_valid(const ProblemSpec& spec, const OutcomeSample& s1,
                   const RegressorSample& s2);

// The regression design matrix (X_o, X_c-columns of W, intercept) of S2.
Eigen::MatrixXd design_matrix(const RegressorSample& s2, const ProblemSpec& spec);

// Weights vector, materializing the all-ones default.
Eigen::VectorXd effective_weights(const Eigen::VectorXd& weights, Eigen::Index n);

}  // namespace fusebound

#endif  // FUSEBOUND_TYPES_HPP
