#include "sipmstat/detector_response.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>

#include "sipmstat/distributions.hpp"

namespace sipmstat {

void DetectorParams::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("detector params: eta outside [0,1]");
  }
  if (!(lambda_dk >= 0.0)) {
    throw std::invalid_argument("detector params: lambda_dk < 0");
  }
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("detector params: epsilon outside [0,1)");
  }
}

std::string to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::loss: return "loss";
    case MatrixKind::dark: return "dark";
    case MatrixKind::crosstalk: return "crosstalk";
    case MatrixKind::composite: return "composite";
  }
  return "unknown";
}

MatrixKind matrix_kind_from_string(const std::string& name) {
  if (name == "loss") return MatrixKind::loss;
  if (name == "dark") return MatrixKind::dark;
  if (name == "crosstalk") return MatrixKind::crosstalk;
  if (name == "composite") return MatrixKind::composite;
  throw std::invalid_argument("unknown matrix kind: " + name);
}

namespace {

double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

void check_n_max(int n_max) {
  if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
}

}  // namespace

ResponseMatrix loss_matrix(double eta, int n_max) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("loss_matrix: eta outside [0,1]");
  }
  check_n_max(n_max);
  const int size = n_max + 1;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size, size);
  if (eta == 1.0) {
    m.setIdentity();
  } else if (eta == 0.0) {
    m.row(0).setOnes();
  } else {
    const double log_eta = std::log(eta);
    const double log_keep = std::log1p(-eta);
    for (int col = 0; col < size; ++col) {
      for (int n = 0; n <= col; ++n) {
        m(n, col) = std::exp(log_choose(col, n) + n * log_eta +
                             (col - n) * log_keep);
      }
    }
  }
  return {MatrixKind::loss, std::move(m)};
}

ResponseMatrix dark_matrix(double lambda_dk, int n_max) {
  if (!(lambda_dk >= 0.0)) {
    throw std::invalid_argument("dark_matrix: lambda_dk < 0");
  }
  check_n_max(n_max);
  const int size = n_max + 1;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size, size);
  if (lambda_dk == 0.0) {
    m.setIdentity();
  } else {
    const double log_lambda = std::log(lambda_dk);
    for (int col = 0; col < size; ++col) {
      for (int n = col; n < size; ++n) {
        const int k = n - col;
        m(n, col) =
            std::exp(-lambda_dk + k * log_lambda - std::lgamma(k + 1.0));
      }
    }
  }
  return {MatrixKind::dark, std::move(m)};
}

ResponseMatrix crosstalk_matrix(double epsilon, int n_max) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("crosstalk_matrix: epsilon outside [0,1)");
  }
  check_n_max(n_max);
  const int size = n_max + 1;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size, size);
  if (epsilon == 0.0) {
    m.setIdentity();
    return {MatrixKind::crosstalk, std::move(m)};
  }

  // Per-stage Bernoulli weights: b(j|k) = C(k,j) eps^j (1-eps)^(k-j).
  const double log_eps = std::log(epsilon);
  const double log_stop = std::log1p(-epsilon);
  Eigen::MatrixXd bern = Eigen::MatrixXd::Zero(size, size);
  for (int k = 0; k < size; ++k) {
    for (int j = 0; j <= k; ++j) {
      bern(j, k) =
          std::exp(log_choose(k, j) + j * log_eps + (k - j) * log_stop);
    }
  }

  // Table fill in increasing n; entry (n|m) only needs rows below n.
  m(0, 0) = 1.0;
  for (int n = 1; n < size; ++n) {
    for (int col = 1; col <= n; ++col) {
      const int stage = n - col;  // secondaries still to be produced
      double acc = 0.0;
      const int j_hi = std::min(col, stage);
      for (int j = 0; j <= j_hi; ++j) {
        const double next = (j == 0) ? (stage == 0 ? 1.0 : 0.0) : m(stage, j);
        acc += bern(j, col) * next;
      }
      m(n, col) = acc;
    }
  }
  return {MatrixKind::crosstalk, std::move(m)};
}

ResponseMatrix compose_response(const DetectorParams& params, int n_max) {
  params.validate();
  check_n_max(n_max);
  const ResponseMatrix loss = loss_matrix(params.eta, n_max);
  const ResponseMatrix dark = dark_matrix(params.lambda_dk, n_max);
  const ResponseMatrix ct = crosstalk_matrix(params.epsilon, n_max);
  Eigen::MatrixXd m = ct.entries() * (dark.entries() * loss.entries());
  return {MatrixKind::composite, std::move(m)};
}

ProbVec apply(const ResponseMatrix& m, const ProbVec& p) {
  const int size = m.n_max() + 1;
  if (static_cast<int>(p.size()) > size) {
    throw std::invalid_argument("apply: vector longer than matrix dimension");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
  for (std::size_t i = 0; i < p.size(); ++i) v(static_cast<int>(i)) = p[i];
  const Eigen::VectorXd out = m.entries() * v;
  return ProbVec(std::vector<double>(out.data(), out.data() + out.size()));
}

IllConditionedError::IllConditionedError(double cond)
    : std::runtime_error("response matrix condition estimate " +
                         std::to_string(cond) + " exceeds the inversion limit"),
      condition(cond) {}

Reconstruction invert_reconstruct(const ResponseMatrix& m,
                                  const ProbVec& measured, double cond_limit) {
  const int size = m.n_max() + 1;
  if (static_cast<int>(measured.size()) != size) {
    throw std::invalid_argument("invert_reconstruct: dimension mismatch");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m.entries(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  const double cond =
      smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  if (!(cond <= cond_limit)) throw IllConditionedError(cond);

  const Eigen::VectorXd b =
      Eigen::Map<const Eigen::VectorXd>(measured.probs.data(), size);
  const Eigen::VectorXd x = svd.solve(b);
  return {std::vector<double>(x.data(), x.data() + x.size()), cond};
}

int dark_headroom(double lambda_dk, double tol) {
  if (!(lambda_dk >= 0.0)) throw std::invalid_argument("lambda_dk < 0");
  if (lambda_dk == 0.0) return 0;
  return adaptive_n_max_poisson(lambda_dk, tol) + 1;
}

int crosstalk_headroom(double epsilon, int m_max, double tol) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("epsilon outside [0,1)");
  }
  if (epsilon == 0.0 || m_max <= 0) return 0;
  // Column m spreads upward like a sum of m geometric cascades, which is the
  // negative binomial tail below.
  const double s = static_cast<double>(m_max);
  const ModeModel tail{s * epsilon / (1.0 - epsilon), s};
  return adaptive_n_max_negative_binomial(tail, tol) + 1;
}

int response_headroom(const DetectorParams& params, int m_max, double tol) {
  params.validate();
  const int h_dark = dark_headroom(params.lambda_dk, 0.5 * tol);
  const int h_ct =
      crosstalk_headroom(params.epsilon, m_max + h_dark, 0.5 * tol);
  return h_dark + h_ct;
}

void save_matrix(std::ostream& os, const ResponseMatrix& m) {
  os << m.n_max() << ' ' << to_string(m.kind()) << '\n';
  const int size = m.n_max() + 1;
  char buf[32];
  for (int n = 0; n < size; ++n) {
    for (int col = 0; col < size; ++col) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(n, col));
      os << buf << (col + 1 < size ? ' ' : '\n');
    }
  }
}

ResponseMatrix load_matrix(std::istream& is) {
  int n_max = -1;
  std::string kind_name;
  if (!(is >> n_max >> kind_name) || n_max < 0) {
    throw std::runtime_error("matrix load: bad header");
  }
  const MatrixKind kind = matrix_kind_from_string(kind_name);
  const int size = n_max + 1;
  Eigen::MatrixXd m(size, size);
  for (int n = 0; n < size; ++n) {
    for (int col = 0; col < size; ++col) {
      if (!(is >> m(n, col))) {
        throw std::runtime_error("matrix load: truncated grid");
      }
    }
  }
  return {kind, std::move(m)};
}

}  // namespace sipmstat
