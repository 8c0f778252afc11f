#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "trc/tensor.hpp"

namespace trc {

/// Malformed tensor file: wrong magic or version, bad header, truncated or
/// oversized payload, or NaN where ground truth is expected.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class TruncatedFileError : public FormatError {
  public:
    using FormatError::FormatError;
};

/// Binary tensor file layout, all integers and floats little-endian:
///
///   bytes 0..3   magic "TRTC"
///   byte  4      version (1)
///   u64          order N
///   N x u64      extents I_1..I_N
///   prod(I) x f64 values, first index fastest; NaN marks a missing entry
namespace tensor_file {

inline constexpr std::array<char, 4> magic{'T', 'R', 'T', 'C'};
inline constexpr std::uint8_t version = 1;
inline constexpr std::uint64_t max_order = 64;

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
    return v;
}

} // namespace detail

inline std::vector<std::uint8_t> encode(const DenseTensor& t) {
    std::vector<std::uint8_t> out;
    out.reserve(5 + 8 * (1 + t.order() + t.size()));
    out.insert(out.end(), magic.begin(), magic.end());
    out.push_back(version);
    detail::put_u64(out, t.order());
    for (std::size_t e : t.shape()) detail::put_u64(out, e);
    for (double v : t.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

inline DenseTensor decode(const std::vector<std::uint8_t>& bytes) {
    const std::size_t n = bytes.size();
    if (n < 5 || std::memcmp(bytes.data(), magic.data(), magic.size()) != 0)
        throw FormatError("not a tensor file (bad magic)");
    if (bytes[4] != version)
        throw FormatError("unsupported tensor file version " + std::to_string(bytes[4]));
    std::size_t pos = 5;
    auto need = [&](std::size_t count, const char* what) {
        if (n - pos < count)
            throw TruncatedFileError(std::string("tensor file truncated while reading ") + what + " (" +
                                     std::to_string(n) + " bytes)");
    };
    need(8, "order");
    const std::uint64_t order = detail::get_u64(bytes.data() + pos);
    pos += 8;
    if (order == 0 || order > max_order) throw FormatError("invalid tensor order " + std::to_string(order));
    need(8 * order, "extents");
    Shape shape(order);
    std::uint64_t total = 1;
    for (auto& e : shape) {
        const std::uint64_t v = detail::get_u64(bytes.data() + pos);
        pos += 8;
        if (v == 0) throw FormatError("tensor file has a zero extent");
        if (total > (n / 8) / v + 1) throw TruncatedFileError("tensor file truncated: header declares more values than present");
        total *= v;
        e = static_cast<std::size_t>(v);
    }
    need(8 * total, "values");
    if (n - pos != 8 * total)
        throw FormatError("tensor file has " + std::to_string(n - pos - 8 * total) + " trailing bytes");
    std::vector<double> data(total);
    for (auto& v : data) {
        v = std::bit_cast<double>(detail::get_u64(bytes.data() + pos));
        pos += 8;
    }
    return DenseTensor(std::move(shape), std::move(data));
}

} // namespace tensor_file

inline void write_tensor(const DenseTensor& t, const std::filesystem::path& path) {
    const auto bytes = tensor_file::encode(t);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

/// Raw values as stored, NaN markers included.
inline DenseTensor read_tensor_raw(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    try {
        return tensor_file::decode(bytes);
    } catch (const TruncatedFileError& e) {
        throw TruncatedFileError(path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

struct ObservedTensor {
    DenseTensor values; ///< NaN on missing entries
    ObservationMask mask;
};

/// An observed tensor; NaN entries become missing-mask bits.
inline ObservedTensor read_tensor(const std::filesystem::path& path) {
    DenseTensor t = read_tensor_raw(path);
    ObservationMask mask = ObservationMask::from_finite(t);
    return {std::move(t), std::move(mask)};
}

/// A ground-truth tensor; any NaN is a validation error.
inline DenseTensor read_ground_truth(const std::filesystem::path& path) {
    DenseTensor t = read_tensor_raw(path);
    for (std::size_t k = 0; k < t.size(); ++k)
        if (std::isnan(t[k]))
            throw FormatError(path.string() + ": ground-truth tensor contains NaN at linear offset " +
                              std::to_string(k));
    return t;
}

} // namespace trc
