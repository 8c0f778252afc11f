#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace trc {

using Matrix = Eigen::MatrixXd;
using Shape = std::vector<std::size_t>;

/// Raised when operand shapes, extents or modes do not agree.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(std::span<const std::size_t> shape) {
    std::ostringstream os;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (k) os << 'x';
        os << shape[k];
    }
    return os.str();
}

inline std::size_t shape_numel(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense N-way array of doubles. Storage is first-index-fastest, so the
/// linear offset of (i1,...,iN) is i1 + I1*(i2 + I2*(i3 + ...)).
class DenseTensor {
  public:
    DenseTensor() = default;

    explicit DenseTensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        validate_shape(shape_);
        data_.assign(shape_numel(shape_), fill);
    }

    DenseTensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape(shape_);
        if (data_.size() != shape_numel(shape_))
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
    }

    static DenseTensor zeros(Shape shape) { return DenseTensor(std::move(shape), 0.0); }
    static DenseTensor ones(Shape shape) { return DenseTensor(std::move(shape), 1.0); }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t order() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t extent(std::size_t k) const { return shape_.at(k); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }

    double& operator[](std::size_t linear) { return data_[linear]; }
    double operator[](std::size_t linear) const { return data_[linear]; }

    [[nodiscard]] std::size_t offset(std::span<const std::size_t> idx) const {
        if (idx.size() != shape_.size())
            throw DimensionError("index has " + std::to_string(idx.size()) +
                                 " components, tensor has order " + std::to_string(order()));
        std::size_t off = 0;
        for (std::size_t k = idx.size(); k-- > 0;) {
            if (idx[k] >= shape_[k])
                throw std::out_of_range("index " + std::to_string(idx[k]) + " out of range for mode " +
                                        std::to_string(k + 1) + " of extent " +
                                        std::to_string(shape_[k]));
            off = off * shape_[k] + idx[k];
        }
        return off;
    }

    double& at(std::span<const std::size_t> idx) { return data_[offset(idx)]; }
    [[nodiscard]] double at(std::span<const std::size_t> idx) const { return data_[offset(idx)]; }

    /// Same data, new shape with the same number of elements.
    [[nodiscard]] DenseTensor reshaped(Shape shape) const {
        validate_shape(shape);
        if (shape_numel(shape) != data_.size())
            throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                                 shape_string(shape));
        return DenseTensor(std::move(shape), data_);
    }

    [[nodiscard]] bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

    DenseTensor& operator+=(const DenseTensor& o) {
        require_same_shape(o, "+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    DenseTensor& operator-=(const DenseTensor& o) {
        require_same_shape(o, "-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    DenseTensor& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }
    friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
    friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
    friend DenseTensor operator*(DenseTensor a, double s) { return a *= s; }
    friend DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

    void require_same_shape(const DenseTensor& o, const char* what) const {
        if (shape_ != o.shape_)
            throw DimensionError(std::string("shape mismatch in ") + what + ": " +
                                 shape_string(shape_) + " vs " + shape_string(o.shape_));
    }

  private:
    static void validate_shape(const Shape& shape) {
        if (shape.empty()) throw DimensionError("tensor order must be at least 1");
        for (std::size_t e : shape)
            if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
    }

    Shape shape_;
    std::vector<double> data_;
};

/// Which of the two matricization families, and for which (1-based) mode.
struct Matricization {
    enum class Family { Gamma, Delta };
    Family family;
    std::size_t mode;
};

namespace detail {

struct ModeSplit {
    std::size_t left;   // product of extents before the mode
    std::size_t extent; // extent of the mode
    std::size_t right;  // product of extents after the mode
};

inline ModeSplit split_at(std::span<const std::size_t> shape, std::size_t n) {
    if (n < 1 || n > shape.size())
        throw std::out_of_range("mode " + std::to_string(n) + " out of range for order " +
                                std::to_string(shape.size()));
    ModeSplit s{1, shape[n - 1], 1};
    for (std::size_t k = 0; k + 1 < n; ++k) s.left *= shape[k];
    for (std::size_t k = n; k < shape.size(); ++k) s.right *= shape[k];
    return s;
}

// Column of the unfolding for left-block index a and right-block index b.
inline std::size_t column(Matricization::Family f, const ModeSplit& s, std::size_t a, std::size_t b) {
    return f == Matricization::Family::Gamma ? a + s.left * b : b + s.right * a;
}

inline Matrix unfold(const DenseTensor& t, Matricization::Family f, std::size_t n) {
    const ModeSplit s = split_at(t.shape(), n);
    Matrix m(static_cast<Eigen::Index>(s.extent), static_cast<Eigen::Index>(s.left * s.right));
    const auto src = t.data();
    double* dst = m.data();
    for (std::size_t b = 0; b < s.right; ++b)
        for (std::size_t i = 0; i < s.extent; ++i)
            for (std::size_t a = 0; a < s.left; ++a)
                dst[i + s.extent * column(f, s, a, b)] = src[a + s.left * (i + s.extent * b)];
    return m;
}

inline DenseTensor fold(const Matrix& m, Matricization::Family f, std::size_t n, const Shape& shape) {
    const ModeSplit s = split_at(shape, n);
    if (static_cast<std::size_t>(m.rows()) != s.extent ||
        static_cast<std::size_t>(m.cols()) != s.left * s.right)
        throw DimensionError("cannot fold " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + " matrix at mode " + std::to_string(n) +
                             " into shape " + shape_string(shape));
    DenseTensor t(shape);
    auto dst = t.data();
    const double* src = m.data();
    for (std::size_t b = 0; b < s.right; ++b)
        for (std::size_t i = 0; i < s.extent; ++i)
            for (std::size_t a = 0; a < s.left; ++a)
                dst[a + s.left * (i + s.extent * b)] = src[i + s.extent * column(f, s, a, b)];
    return t;
}

} // namespace detail

/// Mode-n matricization; columns run over the remaining modes in natural
/// order with the first listed index varying fastest. Modes are 1-based.
inline Matrix gamma_unfold(const DenseTensor& t, std::size_t n) {
    return detail::unfold(t, Matricization::Family::Gamma, n);
}

/// Mode-n matricization with the remaining modes taken cyclically from n+1:
/// (i_{n+1},...,i_N,i_1,...,i_{n-1}), first listed index fastest.
inline Matrix delta_unfold(const DenseTensor& t, std::size_t n) {
    return detail::unfold(t, Matricization::Family::Delta, n);
}

inline DenseTensor gamma_fold(const Matrix& m, std::size_t n, const Shape& shape) {
    return detail::fold(m, Matricization::Family::Gamma, n, shape);
}

inline DenseTensor delta_fold(const Matrix& m, std::size_t n, const Shape& shape) {
    return detail::fold(m, Matricization::Family::Delta, n, shape);
}

inline Matrix unfold(const DenseTensor& t, Matricization kind) {
    return detail::unfold(t, kind.family, kind.mode);
}

inline DenseTensor fold(const Matrix& m, Matricization kind, const Shape& shape) {
    return detail::fold(m, kind.family, kind.mode, shape);
}

inline DenseTensor hadamard(const DenseTensor& a, const DenseTensor& b) {
    a.require_same_shape(b, "hadamard");
    DenseTensor out(a.shape());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] * b[k];
    return out;
}

inline double inner_product(const DenseTensor& a, const DenseTensor& b) {
    a.require_same_shape(b, "inner_product");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double frobenius_norm(const DenseTensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    return std::sqrt(s);
}

/// I.i.d. normal entries drawn from a 64-bit Mersenne Twister seeded with `seed`.
inline DenseTensor random_normal(Shape shape, double mean, double stddev, std::uint64_t seed) {
    if (!(stddev >= 0.0)) throw std::invalid_argument("random_normal: stddev must be non-negative");
    DenseTensor t(std::move(shape), mean);
    if (stddev == 0.0) return t;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(mean, stddev);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

/// The observed index set, one flag per canonical linear offset.
class ObservationMask {
  public:
    ObservationMask() = default;
    ObservationMask(Shape shape, bool observed)
        : shape_(std::move(shape)), flags_(shape_numel(shape_), observed ? 1 : 0),
          count_(observed ? flags_.size() : 0) {}
    ObservationMask(Shape shape, std::vector<std::uint8_t> flags)
        : shape_(std::move(shape)), flags_(std::move(flags)) {
        if (flags_.size() != shape_numel(shape_))
            throw DimensionError("mask length does not match shape " + shape_string(shape_));
        for (auto& f : flags_) f = f ? 1 : 0;
        count_ = static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), 1));
    }

    static ObservationMask full(Shape shape) { return {std::move(shape), true}; }

    /// Entries that are finite are observed; NaN marks a missing entry.
    static ObservationMask from_finite(const DenseTensor& t) {
        std::vector<std::uint8_t> flags(t.size());
        for (std::size_t k = 0; k < t.size(); ++k) flags[k] = std::isfinite(t[k]) ? 1 : 0;
        return {t.shape(), std::move(flags)};
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return flags_.size(); }
    [[nodiscard]] std::size_t observed_count() const noexcept { return count_; }
    [[nodiscard]] std::size_t missing_count() const noexcept { return flags_.size() - count_; }
    [[nodiscard]] bool empty() const noexcept { return count_ == 0; }
    [[nodiscard]] bool observed(std::size_t linear) const { return flags_[linear] != 0; }

    void set(std::size_t linear, bool observed) {
        const bool was = flags_.at(linear) != 0;
        flags_[linear] = observed ? 1 : 0;
        if (was != observed) count_ = observed ? count_ + 1 : count_ - 1;
    }

    [[nodiscard]] ObservationMask complement() const {
        std::vector<std::uint8_t> flags(flags_.size());
        for (std::size_t k = 0; k < flags.size(); ++k) flags[k] = flags_[k] ? 0 : 1;
        return {shape_, std::move(flags)};
    }

    /// The weight tensor: 1 on observed entries, 0 elsewhere.
    [[nodiscard]] DenseTensor as_weights() const {
        DenseTensor w(shape_);
        for (std::size_t k = 0; k < flags_.size(); ++k) w[k] = flags_[k];
        return w;
    }

    friend bool operator==(const ObservationMask&, const ObservationMask&) = default;

  private:
    Shape shape_;
    std::vector<std::uint8_t> flags_;
    std::size_t count_ = 0;
};

/// P_Omega: keeps observed entries and zeroes the rest.
inline DenseTensor project(const DenseTensor& t, const ObservationMask& mask) {
    if (t.shape() != mask.shape())
        throw DimensionError("mask shape " + shape_string(mask.shape()) + " does not match tensor " +
                             shape_string(t.shape()));
    DenseTensor out(t.shape());
    for (std::size_t k = 0; k < t.size(); ++k)
        if (mask.observed(k)) out[k] = t[k];
    return out;
}

/// P_Omega(observed) + P_Omega-bar(fill).
inline DenseTensor merge_observed(const DenseTensor& observed, const DenseTensor& fill,
                                  const ObservationMask& mask) {
    observed.require_same_shape(fill, "merge_observed");
    if (observed.shape() != mask.shape()) throw DimensionError("mask shape does not match tensor");
    DenseTensor out = fill;
    for (std::size_t k = 0; k < out.size(); ++k)
        if (mask.observed(k)) out[k] = observed[k];
    return out;
}

} // namespace trc
