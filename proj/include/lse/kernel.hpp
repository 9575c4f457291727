#ifndef LSE_KERNEL_HPP
#define LSE_KERNEL_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "lse/errors.hpp"
#include "lse/types.hpp"

namespace lse {

/// Symmetric positive-semidefinite N x N instance kernel.
///
/// For modality X (F x N) and balance lambda in [0,1),
///   Delta = X^T (lambda X X^T + (1-lambda) I)^{-1} X.
/// Its eigenvalues are sigma^2 / (lambda sigma^2 + 1 - lambda) for the
/// singular values sigma of X, so for lambda > 0 they are bounded by
/// 1/lambda.
struct KernelMatrix {
  Eigen::MatrixXd values;

  Eigen::Index size() const { return values.rows(); }

  /// Verifies symmetry, positive semidefiniteness and, when lambda is given
  /// and positive, the 1/lambda spectral bound.
  void validate(std::optional<double> lambda = std::nullopt) const {
    if (values.rows() != values.cols())
      throw ValidationError("kernel matrix must be square");
    const double fro = values.norm();
    const double asym = (values - values.transpose()).norm();
    if (asym > 1e-10 * std::max(fro, 1.0))
      throw ValidationError("kernel matrix is not symmetric (relative deviation " +
                            std::to_string(asym / std::max(fro, 1.0)) + ")");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(values,
                                                      Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw NumericError("eigensolver failed while validating kernel");
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo < -1e-8 * std::max(hi, 0.0) && lo < -1e-12)
      throw ValidationError("kernel matrix is not positive semidefinite "
                            "(min eigenvalue " + std::to_string(lo) + ")");
    if (lambda && *lambda > 0.0 && hi >= 1.0 / *lambda + 1e-8)
      throw ValidationError("kernel eigenvalue " + std::to_string(hi) +
                            " exceeds the 1/lambda bound " +
                            std::to_string(1.0 / *lambda));
  }
};

namespace detail {

/// Cholesky factor of A = lambda X X^T + (1-lambda) I, which is positive
/// definite for lambda in [0,1). Failure is only possible under extreme
/// scaling; the error carries a condition estimate.
inline Eigen::LLT<Eigen::MatrixXd> factor_ridge_gram(const Eigen::MatrixXd& x,
                                                     double lambda) {
  const Eigen::Index f = x.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(f, f);
  a.selfadjointView<Eigen::Lower>().rankUpdate(x, lambda);
  a.triangularView<Eigen::StrictlyUpper>() = a.transpose();
  a.diagonal().array() += 1.0 - lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    const double hi = es.eigenvalues().maxCoeff();
    const double lo = es.eigenvalues().minCoeff();
    throw NumericError(
        "ridge system (lambda X X^T + (1-lambda) I) is numerically singular; "
        "condition estimate " +
        std::to_string(hi / std::max(std::abs(lo),
                                     std::numeric_limits<double>::min())));
  }
  return llt;
}

}  // namespace detail

/// Delta = X^T (lambda X X^T + (1-lambda) I)^{-1} X, built as W^T W with
/// W = L^{-1} X from the Cholesky factor L: exactly symmetric and PSD by
/// construction. The inverted system is F x F.
inline KernelMatrix compute_delta(const Eigen::MatrixXd& x, double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw ValidationError("lambda must lie in [0,1), got " + std::to_string(lambda));
  if (x.size() == 0) throw ValidationError("empty modality matrix");
  if (!x.allFinite()) throw ValidationError("non-finite value in modality matrix");

  auto llt = detail::factor_ridge_gram(x, lambda);
  Eigen::MatrixXd w = llt.matrixL().solve(x);  // F x N
  KernelMatrix k;
  k.values = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  k.values.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose());
  k.values.triangularView<Eigen::StrictlyUpper>() = k.values.transpose();
  return k;
}

inline KernelMatrix compute_delta(const ModalityMatrix& x, double lambda) {
  return compute_delta(x.values, lambda);
}

/// Omega = sum of the per-modality kernels, in list order.
inline KernelMatrix aggregate_kernels(const std::vector<KernelMatrix>& deltas) {
  if (deltas.empty()) throw ValidationError("no kernels to aggregate");
  KernelMatrix omega;
  omega.values = deltas.front().values;
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    if (deltas[i].size() != omega.size())
      throw ValidationError("kernel size mismatch: " + std::to_string(deltas[i].size()) +
                            " vs " + std::to_string(omega.size()));
    omega.values += deltas[i].values;
  }
  return omega;
}

}  // namespace lse

#endif  // LSE_KERNEL_HPP
