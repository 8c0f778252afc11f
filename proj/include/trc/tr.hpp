#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "trc/tensor.hpp"

namespace trc {

/// Tensor-ring rank vector (R_1,...,R_N) with the cyclic closure R_{N+1} = R_1.
class TRRank {
  public:
    TRRank() = default;
    explicit TRRank(std::vector<std::size_t> ranks) : ranks_(std::move(ranks)) {
        for (std::size_t r : ranks_)
            if (r == 0) throw std::invalid_argument("TR-ranks must be positive");
    }
    static TRRank uniform(std::size_t order, std::size_t r) {
        return TRRank(std::vector<std::size_t>(order, r));
    }

    [[nodiscard]] std::size_t size() const noexcept { return ranks_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& values() const noexcept { return ranks_; }
    /// R_n for 1-based n, wrapping N+1 to 1.
    [[nodiscard]] std::size_t operator()(std::size_t n) const { return ranks_.at((n - 1) % ranks_.size()); }

    /// Sum of square roots of the ranks.
    [[nodiscard]] double ssr() const {
        double s = 0.0;
        for (std::size_t r : ranks_) s += std::sqrt(static_cast<double>(r));
        return s;
    }

    friend bool operator==(const TRRank&, const TRRank&) = default;

  private:
    std::vector<std::size_t> ranks_;
};

/// Cyclic chain of order-3 cores; core n has shape (R_n, I_n, R_{n+1}).
class TRCores {
  public:
    TRCores() = default;
    explicit TRCores(std::vector<DenseTensor> cores) : cores_(std::move(cores)) { validate(); }

    [[nodiscard]] std::size_t order() const noexcept { return cores_.size(); }
    /// Core n, 1-based.
    [[nodiscard]] const DenseTensor& core(std::size_t n) const { return cores_.at(n - 1); }
    [[nodiscard]] const std::vector<DenseTensor>& cores() const noexcept { return cores_; }

    /// Replace core n (1-based); the shape must stay the same.
    void set_core(std::size_t n, DenseTensor g) {
        cores_.at(n - 1).require_same_shape(g, "set_core");
        cores_[n - 1] = std::move(g);
    }

    [[nodiscard]] Shape shape() const {
        Shape s;
        s.reserve(cores_.size());
        for (const auto& g : cores_) s.push_back(g.extent(1));
        return s;
    }

    [[nodiscard]] TRRank ranks() const {
        std::vector<std::size_t> r;
        r.reserve(cores_.size());
        for (const auto& g : cores_) r.push_back(g.extent(0));
        return TRRank(std::move(r));
    }

  private:
    void validate() const {
        if (cores_.size() < 2) throw DimensionError("a tensor ring needs at least two cores");
        for (std::size_t n = 0; n < cores_.size(); ++n) {
            const auto& g = cores_[n];
            if (g.order() != 3)
                throw DimensionError("core " + std::to_string(n + 1) + " is not order-3");
            const auto& next = cores_[(n + 1) % cores_.size()];
            if (g.extent(2) != next.extent(0))
                throw DimensionError("rank mismatch between core " + std::to_string(n + 1) +
                                     " and core " + std::to_string((n + 1) % cores_.size() + 1));
        }
    }

    std::vector<DenseTensor> cores_;
};

/// Cores with i.i.d. normal entries. Core n is drawn with seed + n - 1.
inline TRCores random_cores(const Shape& shape, const TRRank& ranks, double mean, double stddev,
                            std::uint64_t seed) {
    if (shape.size() != ranks.size())
        throw DimensionError("rank vector of length " + std::to_string(ranks.size()) +
                             " does not match tensor order " + std::to_string(shape.size()));
    std::vector<DenseTensor> cores;
    cores.reserve(shape.size());
    for (std::size_t n = 1; n <= shape.size(); ++n)
        cores.push_back(random_normal({ranks(n), shape[n - 1], ranks(n + 1)}, mean, stddev, seed + n - 1));
    return TRCores(std::move(cores));
}

/// G_n(i): the i-th lateral slice of an order-3 core, R_n x R_{n+1}.
inline Matrix core_slice(const DenseTensor& core, std::size_t i) {
    const auto rows = core.extent(0), mid = core.extent(1), cols = core.extent(2);
    if (i >= mid) throw std::out_of_range("slice index " + std::to_string(i) + " out of range");
    Matrix s(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows; ++r) s(r, c) = core[r + rows * (i + mid * c)];
    return s;
}

/// Single entry as Trace(G_1(i_1) G_2(i_2) ... G_N(i_N)).
inline double element(const TRCores& tr, std::span<const std::size_t> idx) {
    if (idx.size() != tr.order())
        throw DimensionError("index length does not match tensor ring order");
    Matrix prod = core_slice(tr.core(1), idx[0]);
    for (std::size_t n = 2; n <= tr.order(); ++n) prod = prod * core_slice(tr.core(n), idx[n - 1]);
    return prod.trace();
}

namespace detail {

// Merge (Ra, J, Rb) with (Rb, I, Rc) into (Ra, J*I, Rc); the merged index is
// j + J*i, matching the first-fastest layout of both operands.
inline DenseTensor merge_pair(const DenseTensor& a, const DenseTensor& b) {
    const auto ra = a.extent(0), j = a.extent(1), rb = a.extent(2);
    if (b.extent(0) != rb) throw DimensionError("cannot merge cores with mismatched bond");
    const auto i = b.extent(1), rc = b.extent(2);
    using Map = Eigen::Map<const Matrix>;
    DenseTensor out({ra, j * i, rc});
    Eigen::Map<Matrix> c(out.data().data(), static_cast<Eigen::Index>(ra * j),
                         static_cast<Eigen::Index>(i * rc));
    c.noalias() = Map(a.data().data(), static_cast<Eigen::Index>(ra * j), static_cast<Eigen::Index>(rb)) *
                  Map(b.data().data(), static_cast<Eigen::Index>(rb), static_cast<Eigen::Index>(i * rc));
    return out;
}

// Merge `count` consecutive cores starting at 1-based `first`, wrapping cyclically.
inline DenseTensor merge_run(const TRCores& tr, std::size_t first, std::size_t count) {
    const std::size_t N = tr.order();
    DenseTensor acc = tr.core(first);
    for (std::size_t k = 1; k < count; ++k) acc = merge_pair(acc, tr.core((first - 1 + k) % N + 1));
    return acc;
}

} // namespace detail

/// Subchain G_{!=n}: the merge of cores n+1,...,N,1,...,n-1 as an order-3
/// tensor of shape (R_{n+1}, prod_{k!=n} I_k, R_n). The merged index runs
/// cyclically from mode n+1, first index fastest.
inline DenseTensor subchain(const TRCores& tr, std::size_t n) {
    if (n < 1 || n > tr.order())
        throw std::out_of_range("mode " + std::to_string(n) + " out of range for order " +
                                std::to_string(tr.order()));
    return detail::merge_run(tr, n % tr.order() + 1, tr.order() - 1);
}

/// Full tensor from its cores by sequential merging and one closing trace.
inline DenseTensor reconstruct(const TRCores& tr) {
    const DenseTensor chain = detail::merge_run(tr, 1, tr.order());
    const auto r = chain.extent(0), m = chain.extent(1);
    DenseTensor out(tr.shape());
    for (std::size_t a = 0; a < r; ++a)
        for (std::size_t j = 0; j < m; ++j) out[j] += chain[a + r * (j + m * a)];
    return out;
}

/// Q_n = Delta_2(G_{!=n})^T, the (R_n R_{n+1}) x prod_{k!=n} I_k factor with
/// Delta_n(X) = Gamma_2(G_n) Q_n.
inline Matrix subchain_factor(const TRCores& tr, std::size_t n) {
    return delta_unfold(subchain(tr, n), 2).transpose();
}

/// ||Delta_n(X) - Gamma_2(G_n) Delta_2(G_{!=n})^T||_F.
inline double eq2_residual(const TRCores& tr, const DenseTensor& x, std::size_t n) {
    const Matrix lhs = delta_unfold(x, n);
    const Matrix rhs = gamma_unfold(tr.core(n), 2) * subchain_factor(tr, n);
    if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols())
        throw DimensionError("tensor does not match the tensor ring shape");
    return (lhs - rhs).norm();
}

/// Number of singular values above rel_tol * sigma_max (0 for the zero matrix).
inline std::size_t numerical_rank(const Matrix& m, double rel_tol = 1e-8) {
    if (m.size() == 0) return 0;
    Eigen::BDCSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    std::size_t r = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (s(k) > rel_tol * s(0)) ++r;
    return r;
}

/// rank(Delta_n(X)) <= sum_i rank(Gamma_i(G_n)), ranks taken numerically.
inline bool rank_inequality_check(const TRCores& tr, const DenseTensor& x, std::size_t n,
                                  double rel_tol = 1e-8) {
    const auto& g = tr.core(n);
    std::size_t bound = 0;
    for (std::size_t i = 1; i <= 3; ++i) bound += numerical_rank(gamma_unfold(g, i), rel_tol);
    return numerical_rank(delta_unfold(x, n), rel_tol) <= bound;
}

} // namespace trc
