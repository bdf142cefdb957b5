#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cwmi/errors.hpp"

namespace cwmi {

/// Dense row-major tensor of doubles, rank 0 to 3. Rank 0 is a scalar
/// (shape [], one element).
class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  explicit Tensor(std::vector<int> shape);

  static Tensor scalar(double v);
  static Tensor from(std::vector<int> shape, std::vector<double> data);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double item() const;
  double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
  double& at(int i, int j);
  double& at(int i, int j, int k);
  double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
  double at(int i, int j) const;
  double at(int i, int j, int k) const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  void fill(double v);
  bool all_finite() const;

  static std::string shape_str(const std::vector<int>& shape);

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);

}  // namespace cwmi
