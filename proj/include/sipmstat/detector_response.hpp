#pragma once
// Column-stochastic distortion matrices of the detection chain: binomial
// loss, Poisson dark counts, the staged crosstalk cascade, and their
// composition. Columns are conditional distributions of the measured count
// given the true count.

#include <Eigen/Dense>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "sipmstat/prob_vec.hpp"

namespace sipmstat {

struct DetectorParams {
  double eta = 1.0;        ///< overall detection efficiency, in [0,1]
  double lambda_dk = 0.0;  ///< mean dark counts per gate, >= 0
  double epsilon = 0.0;    ///< overall nearest-neighbor crosstalk probability, in [0,1)

  // How each value was obtained (heralded-efficiency run, dark-run fit, ...).
  std::string eta_source;
  std::string lambda_source;
  std::string epsilon_source;

  void validate() const;
};

enum class MatrixKind { loss, dark, crosstalk, composite };

std::string to_string(MatrixKind kind);
MatrixKind matrix_kind_from_string(const std::string& name);

class ResponseMatrix {
 public:
  ResponseMatrix(MatrixKind kind, Eigen::MatrixXd entries)
      : kind_(kind), m_(std::move(entries)) {}

  MatrixKind kind() const { return kind_; }
  int n_max() const { return static_cast<int>(m_.rows()) - 1; }

  /// Probability of measuring n given m true photons.
  double operator()(int n, int m) const { return m_(n, m); }
  const Eigen::MatrixXd& entries() const { return m_; }

  double column_sum(int m) const { return m_.col(m).sum(); }

 private:
  MatrixKind kind_;
  Eigen::MatrixXd m_;
};

/// Binomial thinning: (n|m) = C(m,n) eta^n (1-eta)^(m-n) for n <= m.
ResponseMatrix loss_matrix(double eta, int n_max);

/// Poisson additions: (n|m) = lambda^(n-m) e^-lambda / (n-m)! for n >= m.
ResponseMatrix dark_matrix(double lambda_dk, int n_max);

/// Staged cascade recursion, evaluated as a table fill in increasing n:
/// each of the m newly fired elements triggers at most one secondary per
/// stage with probability epsilon, and the secondaries recurse.
ResponseMatrix crosstalk_matrix(double epsilon, int n_max);

/// crosstalk * dark * loss, in that order.
ResponseMatrix compose_response(const DetectorParams& params, int n_max);

/// Matrix-vector product; p is zero-padded or must not exceed the matrix.
ProbVec apply(const ResponseMatrix& m, const ProbVec& p);

struct Reconstruction {
  std::vector<double> values;  ///< may contain negative entries, not clipped
  double condition = 0.0;      ///< 2-norm condition estimate of the matrix
};

struct IllConditionedError : std::runtime_error {
  explicit IllConditionedError(double cond);
  double condition;
};

/// Direct inversion of the measured distribution. Deliberately reports the
/// raw solution: sampling noise makes it go negative long before the matrix
/// is singular, which is why fitting is the preferred reconstruction.
/// Throws IllConditionedError above cond_limit.
Reconstruction invert_reconstruct(const ResponseMatrix& m,
                                  const ProbVec& measured,
                                  double cond_limit = 1e12);

/// Extra rows needed above the largest column of interest so that the
/// retained columns stay stochastic within tol.
int dark_headroom(double lambda_dk, double tol = kTruncTol);
int crosstalk_headroom(double epsilon, int m_max, double tol = kTruncTol);
int response_headroom(const DetectorParams& params, int m_max,
                      double tol = kTruncTol);

/// Plain-text grid dump: header line "n_max kind", then row-major entries.
void save_matrix(std::ostream& os, const ResponseMatrix& m);
ResponseMatrix load_matrix(std::istream& is);

}  // namespace sipmstat
