#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cwmi/graph.hpp"
#include "cwmi/tensor.hpp"

namespace cwmi {

enum class Init : int { Zero, One, Normal };

/// Declares one named tensor of a model: shape, trainability, and how it is
/// initialized. The spec list is the single source of truth for parameter
/// naming and ordering; checkpoints, graphs and optimizers all follow it.
struct TensorSpec {
  std::string name;
  std::vector<int> shape;
  bool trainable = true;
  Init init = Init::Normal;
  double sigma = 0.0;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Ordered collection of named tensors.
class ParameterSet {
 public:
  void add(std::string name, Tensor t, bool trainable);
  bool contains(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool is_trainable(const std::string& name) const;

  std::vector<NamedTensor>& items() { return items_; }
  const std::vector<NamedTensor>& items() const { return items_; }

  /// Total element count across trainable tensors.
  std::int64_t trainable_count() const;

 private:
  std::size_t index(const std::string& name) const;
  std::vector<NamedTensor> items_;
};

/// Materializes specs into tensors. Each tensor draws from its own stream
/// derived from (seed, tensor name), so shared tensors initialize
/// identically across model variants and enumeration order changes.
ParameterSet init_params(const std::vector<TensorSpec>& specs, std::uint64_t seed);

/// Creates one graph leaf per spec (values zero until bound).
class LeafBank {
 public:
  LeafBank(Graph& g, const std::vector<TensorSpec>& specs);
  int id(const std::string& name) const;
  /// Copies parameter values into the corresponding leaves.
  void bind(Graph& g, const ParameterSet& ps) const;
  const std::vector<std::pair<std::string, int>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, int>> entries_;
};

}  // namespace cwmi
