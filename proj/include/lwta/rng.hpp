#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "lwta/tensor.hpp"

namespace lwta {

// Mixes two 64-bit words into a stream label (splitmix64 finalizer).
std::uint64_t stream_hash(std::uint64_t a, std::uint64_t b);

// Counter-based random stream identified by (seed, stream_id). The n-th raw
// output is splitmix64(key + n * gamma) with key derived from the pair, so a
// stream is a pure function of (seed, stream_id, call index) and deriving a
// child stream costs two hash rounds. Single consumer: concurrent users derive
// their own stream. Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  // Child stream labelled by `tag`; does not advance this stream.
  RngStream derive(std::uint64_t tag) const;

  // Uniform in the open interval (0, 1); never returns exactly 0 or 1.
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  // Number of raw 64-bit outputs consumed so far.
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_;
};

template <class T>
Tensor<T> sample_uniform(RngStream& rng, std::size_t n);

template <class T>
Tensor<T> sample_std_normal(RngStream& rng, std::size_t n);

// Fills an existing tensor in place.
template <class T>
void fill_uniform(RngStream& rng, Tensor<T>& out);

template <class T>
void fill_std_normal(RngStream& rng, Tensor<T>& out);

}  // namespace lwta
