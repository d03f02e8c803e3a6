#pragma once

// STLW binary tensor files:
//   "STLW" | u16 version (=1) | u8 dtype (0 f32, 1 f64) | u8 rank |
//   rank x u64 dims | row-major payload. All integers and floats little-endian.

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "lwta/tensor.hpp"

namespace lwta {

inline constexpr std::uint16_t kStlwVersion = 1;

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

template <class T>
void write_stlw(std::ostream& os, const Tensor<T>& t);

// Reads one tensor in whatever dtype the file declares. Throws DataError on
// malformed input.
AnyTensor read_stlw_any(std::istream& is);

// Reads one tensor and converts it to T.
template <class T>
Tensor<T> read_stlw(std::istream& is);

template <class T>
void save_stlw(const std::filesystem::path& path, const Tensor<T>& t);

template <class T>
Tensor<T> load_stlw(const std::filesystem::path& path);

}  // namespace lwta
