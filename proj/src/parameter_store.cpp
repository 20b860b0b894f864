#include "salsa/parameter_store.h"

#include "salsa/error.h"

namespace salsa {

Parameter& ParameterStore::add(std::string name, Tensor value) {
  if (index_.count(name)) {
    throw ContractError("ParameterStore: duplicate parameter '" + name + "'");
  }
  if (!value.isLeaf()) {
    throw ContractError("ParameterStore: parameter '" + name + "' must be a leaf");
  }
  value.setRequiresGrad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back(Parameter{std::move(name), std::move(value), std::nullopt});
  return entries_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ContractError("ParameterStore: no parameter '" + name + "'");
  }
  return entries_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->get(name);
}

bool ParameterStore::contains(const std::string& name) const {
  return index_.count(name) > 0;
}

std::vector<Parameter*> ParameterStore::withPrefix(const std::string& prefix) {
  std::vector<Parameter*> out;
  for (auto& p : entries_) {
    if (p.name.compare(0, prefix.size(), prefix) == 0) {
      out.push_back(&p);
    }
  }
  return out;
}

std::vector<Parameter*> ParameterStore::all() {
  return withPrefix("");
}

std::size_t ParameterStore::scalarCount() const {
  std::size_t n = 0;
  for (const auto& p : entries_) {
    n += p.value.numel();
  }
  return n;
}

void ParameterStore::zeroGrad() {
  for (auto& p : entries_) {
    p.value.zeroGrad();
  }
}

} // namespace salsa
