#pragma once

#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "salsa/specnorm.h"
#include "salsa/tensor.h"

namespace salsa {

struct Parameter {
  std::string name;
  Tensor value;
  std::optional<SpecNormState> specNorm;
};

/// Named trainable tensors in registration order. References returned by
/// add() and get() stay valid for the store's lifetime.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& add(std::string name, Tensor value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::deque<Parameter>& entries() {
    return entries_;
  }
  const std::deque<Parameter>& entries() const {
    return entries_;
  }
  std::vector<Parameter*> withPrefix(const std::string& prefix);
  std::vector<Parameter*> all();

  std::size_t scalarCount() const;
  void zeroGrad();

 private:
  std::deque<Parameter> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

} // namespace salsa
