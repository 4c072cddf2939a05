#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "somnilex/common.hpp"

namespace somnilex::ad {

// Dense row-major tensor. Training uses S=float; gradient checking
// instantiates the whole graph with S=double.
template <class S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp, S fill = S(0))
      : shape(std::move(shp)), data(numel_of(shape), fill) {}
  Tensor(std::vector<int> shp, std::vector<S> values)
      : shape(std::move(shp)), data(std::move(values)) {
    if (data.size() != numel_of(shape))
      throw ShapeError("tensor data size does not match shape");
  }

  static std::size_t numel_of(const std::vector<int>& shp) {
    std::size_t n = 1;
    for (int d : shp) {
      if (d < 0) throw ShapeError("negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace somnilex::ad
