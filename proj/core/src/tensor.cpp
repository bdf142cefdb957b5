#include "cwmi/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace cwmi {

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape " + Tensor::shape_str(shape));
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.size() > 3) throw DimensionError("rank > 3 unsupported");
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0);
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_[0] = v;
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
  Tensor t(std::move(shape));
  if (static_cast<std::int64_t>(data.size()) != t.size()) {
    throw DimensionError("data length does not match shape " + shape_str(t.shape_));
  }
  t.data_ = std::move(data);
  return t;
}

double Tensor::item() const {
  if (rank() != 0) throw ContractError("item() on non-scalar tensor");
  return data_[0];
}

double& Tensor::at(int i, int j) {
  return data_[static_cast<std::size_t>(i) * shape_[1] + static_cast<std::size_t>(j)];
}
double Tensor::at(int i, int j) const {
  return data_[static_cast<std::size_t>(i) * shape_[1] + static_cast<std::size_t>(j)];
}
double& Tensor::at(int i, int j, int k) {
  return data_[(static_cast<std::size_t>(i) * shape_[1] + static_cast<std::size_t>(j)) * shape_[2] +
               static_cast<std::size_t>(k)];
}
double Tensor::at(int i, int j, int k) const {
  return data_[(static_cast<std::size_t>(i) * shape_[1] + static_cast<std::size_t>(j)) * shape_[2] +
               static_cast<std::size_t>(k)];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace cwmi
