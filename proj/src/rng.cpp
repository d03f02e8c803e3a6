#include "lwta/rng.hpp"

#include "lwta/error.hpp"

namespace lwta {
namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t stream_hash(std::uint64_t a, std::uint64_t b) {
  return mix64(a + kGamma * (b + 1));
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(mix64(seed ^ mix64(stream_id + kGamma))) {}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  return mix64(key_ + kGamma * counter_);
}

RngStream RngStream::derive(std::uint64_t tag) const {
  return RngStream(seed_, stream_hash(stream_id_, tag));
}

double RngStream::uniform() {
  // 53 random mantissa bits centred in their cell: (k + 0.5) / 2^53 is never 0 or 1.
  const std::uint64_t k = (*this)() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() { return normal_(*this); }

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw ContractError("RngStream::index: empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(*this);
}

template <class T>
void fill_uniform(RngStream& rng, Tensor<T>& out) {
  for (auto& v : out.data()) {
    T u;
    do {
      u = static_cast<T>(rng.uniform());
    } while (u <= T(0) || u >= T(1));  // rounding to float can reach 1
    v = u;
  }
}

template <class T>
void fill_std_normal(RngStream& rng, Tensor<T>& out) {
  for (auto& v : out.data()) v = static_cast<T>(rng.normal());
}

template <class T>
Tensor<T> sample_uniform(RngStream& rng, std::size_t n) {
  if (n == 0) throw ContractError("sample_uniform: n must be >= 1");
  Tensor<T> out({n});
  fill_uniform(rng, out);
  return out;
}

template <class T>
Tensor<T> sample_std_normal(RngStream& rng, std::size_t n) {
  if (n == 0) throw ContractError("sample_std_normal: n must be >= 1");
  Tensor<T> out({n});
  fill_std_normal(rng, out);
  return out;
}

template void fill_uniform(RngStream&, Tensor<float>&);
template void fill_uniform(RngStream&, Tensor<double>&);
template void fill_std_normal(RngStream&, Tensor<float>&);
template void fill_std_normal(RngStream&, Tensor<double>&);
template Tensor<float> sample_uniform(RngStream&, std::size_t);
template Tensor<double> sample_uniform(RngStream&, std::size_t);
template Tensor<float> sample_std_normal(RngStream&, std::size_t);
template Tensor<double> sample_std_normal(RngStream&, std::size_t);

}  // namespace lwta
