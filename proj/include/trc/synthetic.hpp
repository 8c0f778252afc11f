#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "trc/tensor.hpp"
#include "trc/tr.hpp"

namespace trc {

/// Exactly floor(rate * total) entries missing, chosen uniformly without replacement.
inline ObservationMask random_mask(const Shape& shape, double missing_rate, std::uint64_t seed) {
    if (!(missing_rate >= 0.0 && missing_rate <= 1.0))
        throw std::invalid_argument("missing rate must lie in [0, 1]");
    const std::size_t total = shape_numel(shape);
    const auto missing = static_cast<std::size_t>(std::floor(missing_rate * static_cast<double>(total)));
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `missing` slots become the missing set.
    for (std::size_t k = 0; k < missing; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, total - 1);
        std::swap(order[k], order[pick(rng)]);
    }
    ObservationMask mask = ObservationMask::full(shape);
    for (std::size_t k = 0; k < missing; ++k) mask.set(order[k], false);
    return mask;
}

/// Observed tensor with NaN in place of every missing entry.
inline DenseTensor with_missing_markers(const DenseTensor& t, const ObservationMask& mask) {
    DenseTensor out = t;
    for (std::size_t k = 0; k < out.size(); ++k)
        if (!mask.observed(k)) out[k] = std::numeric_limits<double>::quiet_NaN();
    return out;
}

struct SyntheticInstance {
    TRCores cores;
    DenseTensor truth;
    ObservationMask mask;
};

/// Ground truth from i.i.d. N(0, core_stddev) cores of the given TR-rank and a
/// random mask. The cores use `seed`, the mask uses `seed` offset by a constant.
inline SyntheticInstance make_synthetic(const Shape& shape, const TRRank& ranks, double missing_rate,
                                        std::uint64_t seed, double core_stddev = 0.5) {
    SyntheticInstance inst;
    inst.cores = random_cores(shape, ranks, 0.0, core_stddev, seed);
    inst.truth = reconstruct(inst.cores);
    inst.mask = random_mask(shape, missing_rate, seed ^ 0x9e3779b97f4a7c15ULL);
    return inst;
}

} // namespace trc
