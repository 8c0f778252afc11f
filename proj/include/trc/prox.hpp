#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include "trc/tensor.hpp"
#include "trc/tr.hpp"

namespace trc {

/// Raised when a factorization cannot proceed (non-finite input, non-SPD system).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SVTResult {
    Matrix matrix;
    double nuclear_norm_after = 0.0;
    std::size_t effective_rank = 0;
};

/// Singular value thresholding U max(S - beta I, 0) V^T, the proximal map of
/// beta * nuclear norm.
inline SVTResult svt(const Matrix& a, double beta) {
    if (!(beta >= 0.0)) throw std::invalid_argument("svt: threshold must be non-negative");
    if (!a.allFinite()) throw NumericalError("svt: matrix has non-finite entries");
    SVTResult out;
    if (a.size() == 0) {
        out.matrix = a;
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("svt: SVD did not converge");
    Eigen::VectorXd s = svd.singularValues();
    Eigen::Index keep = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        s(k) = std::max(s(k) - beta, 0.0);
        if (s(k) > 0.0) ++keep;
    }
    out.effective_rank = static_cast<std::size_t>(keep);
    out.nuclear_norm_after = s.sum();
    out.matrix = svd.matrixU().leftCols(keep) * s.head(keep).asDiagonal() *
                 svd.matrixV().leftCols(keep).transpose();
    return out;
}

inline double nuclear_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::BDCSVD<Matrix>(a).singularValues().sum();
}

/// X = B A^{-1} for symmetric positive definite A, via Cholesky.
inline Matrix ridge_solve(const Matrix& b, const Matrix& a) {
    if (a.rows() != a.cols() || a.cols() != b.cols())
        throw DimensionError("ridge_solve: expected square A matching the columns of B, got A " +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ", B " +
                             std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    if (!a.allFinite() || !b.allFinite()) throw NumericalError("ridge_solve: non-finite input");
    const double scale = a.cwiseAbs().maxCoeff();
    if (!((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale))
        throw NumericalError("ridge_solve: system matrix is not symmetric");
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success || scale == 0.0)
        throw NumericalError("ridge_solve: system matrix is not positive definite");
    return llt.solve(b.transpose()).transpose();
}

namespace detail {

// Minimizer over G_n of  (w/2)||G_n - target||^2 + (lambda/2)||Delta_n(X) - Gamma_2(G_n) Q_n||^2,
// where the penalty terms are given in expanded form as (w * target) = penalty_rhs.
inline DenseTensor core_update(const DenseTensor& x, const TRCores& tr, std::size_t n, double lambda,
                               double weight, const Matrix& penalty_rhs) {
    if (x.shape() != tr.shape())
        throw DimensionError("estimate shape " + shape_string(x.shape()) +
                             " does not match tensor ring shape " + shape_string(tr.shape()));
    const Matrix q = subchain_factor(tr, n);
    Matrix rhs = penalty_rhs;
    rhs.noalias() += lambda * (delta_unfold(x, n) * q.transpose());
    Matrix normal = lambda * (q * q.transpose());
    normal.diagonal().array() += weight;
    try {
        return gamma_fold(ridge_solve(rhs, normal), 2, tr.core(n).shape());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("core update: singular normal matrix (") + e.what() + ")");
    }
}

} // namespace detail

/// Exact minimizer of the overlapped-model core subproblem
///   sum_i mu/2 ||M_i - G_n + Y_i/mu||^2 + lambda/2 ||X - Z||^2.
inline DenseTensor core_update_olrf(const DenseTensor& x, const TRCores& tr,
                                    std::span<const DenseTensor, 3> aux,
                                    std::span<const DenseTensor, 3> multipliers, std::size_t n,
                                    double lambda, double mu) {
    Matrix rhs = Matrix::Zero(static_cast<Eigen::Index>(tr.core(n).extent(1)),
                              static_cast<Eigen::Index>(tr.core(n).extent(0) * tr.core(n).extent(2)));
    for (std::size_t i = 0; i < 3; ++i)
        rhs += mu * gamma_unfold(aux[i], 2) + gamma_unfold(multipliers[i], 2);
    return detail::core_update(x, tr, n, lambda, 3.0 * mu, rhs);
}

/// Exact minimizer of the latent-model core subproblem
///   mu/2 ||sum_i W_i - G_n + Y/mu||^2 + lambda/2 ||X - Z||^2.
inline DenseTensor core_update_llrf(const DenseTensor& x, const TRCores& tr,
                                    std::span<const DenseTensor, 3> latent, const DenseTensor& multiplier,
                                    std::size_t n, double lambda, double mu) {
    Matrix rhs = gamma_unfold(multiplier, 2);
    for (std::size_t i = 0; i < 3; ++i) rhs += mu * gamma_unfold(latent[i], 2);
    return detail::core_update(x, tr, n, lambda, mu, rhs);
}

namespace detail {

inline TRCores with_core(TRCores tr, std::size_t n, const DenseTensor& g) {
    tr.set_core(n, g);
    return tr;
}

inline double half_sq_misfit(const DenseTensor& x, const TRCores& tr) {
    const double r = frobenius_norm(x - reconstruct(tr));
    return 0.5 * r * r;
}

} // namespace detail

/// The overlapped-model core subproblem objective, evaluated with core n set to g.
inline double olrf_core_objective(const DenseTensor& x, const TRCores& tr,
                                  std::span<const DenseTensor, 3> aux,
                                  std::span<const DenseTensor, 3> multipliers, std::size_t n,
                                  double lambda, double mu, const DenseTensor& g) {
    double penalty = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double r = frobenius_norm(aux[i] - g + multipliers[i] * (1.0 / mu));
        penalty += 0.5 * mu * r * r;
    }
    return penalty + lambda * detail::half_sq_misfit(x, detail::with_core(tr, n, g));
}

/// The latent-model core subproblem objective, evaluated with core n set to g.
inline double llrf_core_objective(const DenseTensor& x, const TRCores& tr,
                                  std::span<const DenseTensor, 3> latent, const DenseTensor& multiplier,
                                  std::size_t n, double lambda, double mu, const DenseTensor& g) {
    DenseTensor d = latent[0] + latent[1] + latent[2] - g + multiplier * (1.0 / mu);
    const double r = frobenius_norm(d);
    return 0.5 * mu * r * r + lambda * detail::half_sq_misfit(x, detail::with_core(tr, n, g));
}

/// Gamma-bar_i(D_beta(Gamma_i(t))) for an order-3 tensor t.
inline DenseTensor svt_mode(const DenseTensor& t, std::size_t mode, double beta) {
    return gamma_fold(svt(gamma_unfold(t, mode), beta).matrix, mode, t.shape());
}

} // namespace trc
