#include "lwta/tensor.hpp"

#include <cmath>
#include <sstream>

#include "lwta/kernels.hpp"

namespace lwta {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

template <class T>
Tensor<T> matvec(const Tensor<T>& w, const Tensor<T>& x) {
  if (w.empty() || x.empty() || w.rows() != x.size()) {
    throw DimensionError("matvec: weight " + shape_str(w.shape()) + " vs input " +
                         shape_str(x.shape()));
  }
  const std::size_t in = w.rows();
  const std::size_t out = w.cols();
  Tensor<T> y({out});
  kernels::table<T>().gemm_nn(1, in, out, x.ptr(), w.ptr(), y.ptr(), false);
  return y;
}

template <class T>
Tensor<T> matmul(const Tensor<T>& x, const Tensor<T>& w) {
  if (x.empty() || w.empty() || x.cols() != w.rows()) {
    throw DimensionError("matmul: input " + shape_str(x.shape()) + " vs weight " +
                         shape_str(w.shape()));
  }
  Tensor<T> y({x.rows(), w.cols()});
  kernels::table<T>().gemm_nn(x.rows(), x.cols(), w.cols(), x.ptr(), w.ptr(), y.ptr(), false);
  return y;
}

template <class T>
Tensor<T> block_softmax(const Tensor<T>& z, std::size_t group) {
  if (group == 0 || z.empty() || z.size() % group != 0) {
    throw DimensionError("block_softmax: group " + std::to_string(group) +
                         " does not divide " + shape_str(z.shape()));
  }
  Tensor<T> out(z.shape());
  for (std::size_t base = 0; base < z.size(); base += group) {
    T m = z[base];
    for (std::size_t j = 0; j < group; ++j) {
      const T v = z[base + j];
      if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
      m = std::max(m, v);
    }
    T s = 0;
    for (std::size_t j = 0; j < group; ++j) {
      out[base + j] = std::exp(z[base + j] - m);
      s += out[base + j];
    }
    for (std::size_t j = 0; j < group; ++j) out[base + j] /= s;
  }
  return out;
}

template <class T>
Tensor<T> softmax(const Tensor<T>& z) {
  return block_softmax(z, z.size());
}

template Tensor<float> matvec(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matvec(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template Tensor<float> block_softmax(const Tensor<float>&, std::size_t);
template Tensor<double> block_softmax(const Tensor<double>&, std::size_t);

}  // namespace lwta
