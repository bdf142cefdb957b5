#include "cwmi/params.hpp"

#include <algorithm>

#include "cwmi/rng.hpp"

namespace cwmi {

void ParameterSet::add(std::string name, Tensor t, bool trainable) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  items_.push_back(NamedTensor{std::move(name), std::move(t), trainable});
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(items_.begin(), items_.end(),
                     [&](const NamedTensor& nt) { return nt.name == name; });
}

std::size_t ParameterSet::index(const std::string& name) const {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].name == name) return i;
  }
  throw ContractError("unknown parameter: " + name);
}

Tensor& ParameterSet::get(const std::string& name) { return items_[index(name)].tensor; }
const Tensor& ParameterSet::get(const std::string& name) const {
  return items_[index(name)].tensor;
}
bool ParameterSet::is_trainable(const std::string& name) const {
  return items_[index(name)].trainable;
}

std::int64_t ParameterSet::trainable_count() const {
  std::int64_t n = 0;
  for (const NamedTensor& nt : items_) {
    if (nt.trainable) n += nt.tensor.size();
  }
  return n;
}

ParameterSet init_params(const std::vector<TensorSpec>& specs, std::uint64_t seed) {
  ParameterSet ps;
  for (const TensorSpec& spec : specs) {
    Tensor t(spec.shape);
    switch (spec.init) {
      case Init::Zero:
        break;
      case Init::One:
        t.fill(1.0);
        break;
      case Init::Normal: {
        Rng rng(derive_seed(seed, spec.name));
        for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, spec.sigma);
        break;
      }
    }
    ps.add(spec.name, std::move(t), spec.trainable);
  }
  return ps;
}

LeafBank::LeafBank(Graph& g, const std::vector<TensorSpec>& specs) {
  entries_.reserve(specs.size());
  for (const TensorSpec& spec : specs) {
    entries_.emplace_back(spec.name, g.leaf(spec.shape, spec.trainable, spec.name));
  }
}

int LeafBank::id(const std::string& name) const {
  for (const auto& [n, i] : entries_) {
    if (n == name) return i;
  }
  throw ContractError("no leaf registered for parameter: " + name);
}

void LeafBank::bind(Graph& g, const ParameterSet& ps) const {
  for (const auto& [name, leaf_id] : entries_) {
    const Tensor& src = ps.get(name);
    if (src.shape() != g.value(leaf_id).shape()) {
      throw DimensionError("parameter '" + name + "' has shape " +
                           Tensor::shape_str(src.shape()) + ", leaf expects " +
                           Tensor::shape_str(g.value(leaf_id).shape()));
    }
    std::copy(src.data(), src.data() + src.size(), g.leaf_data(leaf_id));
  }
}

}  // namespace cwmi
