#include "lwta/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace lwta {
namespace {

template <class U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> buf;
  std::memcpy(buf.data(), &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  os.write(buf.data(), buf.size());
}

template <class U>
U get_le(std::istream& is) {
  std::array<char, sizeof(U)> buf;
  if (!is.read(buf.data(), buf.size())) throw DataError("STLW: truncated stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  U v;
  std::memcpy(&v, buf.data(), sizeof(U));
  return v;
}

template <class T>
Tensor<T> read_payload(std::istream& is, Shape shape) {
  std::vector<T> data(shape_numel(shape));
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(T)))) {
      throw DataError("STLW: truncated payload");
    }
  } else {
    for (auto& v : data) v = get_le<T>(is);
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace

template <class T>
void write_stlw(std::ostream& os, const Tensor<T>& t) {
  if (t.empty()) throw ContractError("STLW: cannot write an empty tensor");
  os.write("STLW", 4);
  put_le<std::uint16_t>(os, kStlwVersion);
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(dtype_of<T>()));
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.shape()) put_le<std::uint64_t>(os, d);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(t.ptr()),
             static_cast<std::streamsize>(t.size() * sizeof(T)));
  } else {
    for (auto v : t.data()) put_le<T>(os, v);
  }
}

AnyTensor read_stlw_any(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "STLW", 4) != 0) {
    throw DataError("STLW: bad magic");
  }
  const auto version = get_le<std::uint16_t>(is);
  if (version != kStlwVersion) {
    throw DataError("STLW: unsupported version " + std::to_string(version));
  }
  const auto dtype = get_le<std::uint8_t>(is);
  const auto rank = get_le<std::uint8_t>(is);
  if (rank == 0 || rank > kMaxRank) throw DataError("STLW: bad rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    d = static_cast<std::size_t>(get_le<std::uint64_t>(is));
    if (d == 0) throw DataError("STLW: zero dimension");
  }
  switch (dtype) {
    case 0:
      return read_payload<float>(is, std::move(shape));
    case 1:
      return read_payload<double>(is, std::move(shape));
    default:
      throw DataError("STLW: unknown dtype code " + std::to_string(dtype));
  }
}

template <class T>
Tensor<T> read_stlw(std::istream& is) {
  return std::visit([](auto&& t) { return t.template cast<T>(); }, read_stlw_any(is));
}

template <class T>
void save_stlw(const std::filesystem::path& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_stlw(os, t);
}

template <class T>
Tensor<T> load_stlw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return read_stlw<T>(is);
}

template void write_stlw(std::ostream&, const Tensor<float>&);
template void write_stlw(std::ostream&, const Tensor<double>&);
template Tensor<float> read_stlw(std::istream&);
template Tensor<double> read_stlw(std::istream&);
template void save_stlw(const std::filesystem::path&, const Tensor<float>&);
template void save_stlw(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> load_stlw(const std::filesystem::path&);
template Tensor<double> load_stlw(const std::filesystem::path&);

}  // namespace lwta
