#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "specembed/errors.hpp"

namespace specembed {

// Dense row-major tensor of doubles. Rank >= 1 and every extent >= 1 once
// constructed; a default-constructed Tensor is the empty sentinel used for
// optional fields.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    validate_dims();
    data_.assign(element_count(), 0.0);
  }

  Tensor(std::vector<std::size_t> dims, std::vector<double> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    validate_dims();
    if (data_.size() != element_count()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match product of dims " +
                       std::to_string(element_count()));
    }
  }

  static Tensor zeros(std::vector<std::size_t> dims) { return Tensor(std::move(dims)); }

  static Tensor vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  bool empty() const { return dims_.empty(); }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t dim(std::size_t i) const { return dims_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }

  bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool operator==(const Tensor& other) const {
    return dims_ == other.dims_ && data_ == other.data_;
  }

 private:
  void validate_dims() {
    if (dims_.empty()) throw ShapeError("tensor rank must be >= 1");
    for (std::size_t d : dims_) {
      if (d == 0) throw ShapeError("tensor extents must be >= 1");
    }
  }

  std::size_t element_count() const {
    std::size_t n = 1;
    for (std::size_t d : dims_) n *= d;
    return n;
  }

  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

inline std::string dims_to_string(const std::vector<std::size_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

inline void require_dims(const Tensor& t, const std::vector<std::size_t>& dims,
                         const std::string& what) {
  if (t.dims() != dims) {
    throw ShapeError(what + ": expected dims " + dims_to_string(dims) + ", got " +
                     dims_to_string(t.dims()));
  }
}

inline void require_rank(const Tensor& t, std::size_t rank, const std::string& what) {
  if (t.rank() != rank) {
    throw ShapeError(what + ": expected rank " + std::to_string(rank) + ", got " +
                     std::to_string(t.rank()));
  }
}

}  // namespace specembed
