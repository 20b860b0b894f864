#include "salsa/tensor.h"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "salsa/error.h"
#include "salsa/rng.h"

namespace salsa {

namespace {

thread_local bool gGradEnabled = true;

// Activation and gradient buffers are large and freed every step. Keeping
// them out of mmap lets the allocator reuse already-faulted pages.
#if defined(__GLIBC__)
const bool gAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
  return true;
}();
#endif

} // namespace

std::size_t shapeNumel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    n *= d;
  }
  return n;
}

std::string shapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::ensureGrad() {
  if (grad.size() != data.size()) {
    grad.assign(data.size(), 0.0);
  }
  return grad;
}

Tensor Tensor::fromNode(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requiresGrad) {
  return full(std::move(shape), 0.0, requiresGrad);
}

Tensor Tensor::full(Shape shape, double value, bool requiresGrad) {
  const auto n = shapeNumel(shape);
  return fromVector(std::move(shape), std::vector<double>(n, value), requiresGrad);
}

Tensor Tensor::fromVector(
    Shape shape,
    std::vector<double> values,
    bool requiresGrad) {
  for (auto d : shape) {
    if (d == 0) {
      throw DimensionError("Tensor: zero-sized dimension in " + shapeString(shape));
    }
  }
  if (shapeNumel(shape) != values.size()) {
    throw DimensionError(
        "Tensor: shape " + shapeString(shape) + " needs " +
        std::to_string(shapeNumel(shape)) + " values, got " +
        std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requiresGrad = requiresGrad;
  return fromNode(std::move(node));
}

Tensor Tensor::scalar(double value, bool requiresGrad) {
  return fromVector({1}, {value}, requiresGrad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requiresGrad) {
  std::vector<double> values(shapeNumel(shape));
  for (auto& v : values) {
    v = stddev * rng.normal();
  }
  return fromVector(std::move(shape), std::move(values), requiresGrad);
}

const Shape& Tensor::shape() const {
  return node_->shape;
}

std::size_t Tensor::rank() const {
  return node_->shape.size();
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw DimensionError(
        "Tensor::dim: axis " + std::to_string(axis) + " out of range for " +
        shapeString(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const {
  return node_->data.size();
}

std::span<const double> Tensor::data() const {
  return node_->data;
}

std::span<double> Tensor::mutableData() {
  if (!node_->isLeaf()) {
    throw ContractError("Tensor::mutableData: only leaves may be written");
  }
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError(
        "Tensor::item: tensor of shape " + shapeString(shape()) +
        " is not a scalar");
  }
  return node_->data[0];
}

double Tensor::at(std::size_t i) const {
  return node_->data.at(i);
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2 || i >= dim(0) || j >= dim(1)) {
    throw IndexError("Tensor::at: index out of range for " + shapeString(shape()));
  }
  return node_->data[i * dim(1) + j];
}

std::vector<double> Tensor::toVector() const {
  return node_->data;
}

bool Tensor::requiresGrad() const {
  return node_->requiresGrad;
}

void Tensor::setRequiresGrad(bool value) {
  if (!node_->isLeaf()) {
    throw ContractError("Tensor::setRequiresGrad: only leaves");
  }
  node_->requiresGrad = value;
}

bool Tensor::isLeaf() const {
  return node_->isLeaf();
}

bool Tensor::hasGrad() const {
  return node_->grad.size() == node_->data.size();
}

std::span<const double> Tensor::grad() const {
  return node_->grad;
}

std::span<double> Tensor::mutableGrad() {
  return node_->ensureGrad();
}

void Tensor::zeroGrad() {
  if (hasGrad()) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

Tensor Tensor::detach() const {
  return fromVector(node_->shape, node_->data, false);
}

void Tensor::backward(bool retainGraph) const {
  if (numel() != 1) {
    throw ContractError(
        "backward: loss must have a single element, got shape " +
        shapeString(shape()));
  }
  if (!node_->requiresGrad) {
    throw ContractError("backward: loss does not require grad");
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto* parent = node->parents[next++].get();
      if (parent->requiresGrad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* node : order) {
    if (!node->isLeaf()) {
      node->grad.assign(node->data.size(), 0.0);
    }
  }
  node_->ensureGrad()[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = *it;
    if (!node->isLeaf()) {
      node->backwardFn(*node);
    }
  }

  if (!retainGraph) {
    for (auto* node : order) {
      if (!node->isLeaf()) {
        node->parents.clear();
        node->backwardFn = nullptr;
        node->requiresGrad = false;
      }
    }
  }
}

bool gradEnabled() {
  return gGradEnabled;
}

NoGradGuard::NoGradGuard() : previous_(gGradEnabled) {
  gGradEnabled = false;
}

NoGradGuard::~NoGradGuard() {
  gGradEnabled = previous_;
}

Tensor detail::makeResult(
    Shape shape,
    std::vector<double> data,
    const std::vector<Tensor>& parents,
    const char* op,
    std::function<void(Node&)> backwardFn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needsGrad = false;
  if (gGradEnabled) {
    for (const auto& p : parents) {
      needsGrad = needsGrad || p.requiresGrad();
    }
  }
  if (needsGrad) {
    node->requiresGrad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) {
      node->parents.push_back(p.node());
    }
    node->backwardFn = std::move(backwardFn);
  }
  return Tensor::fromNode(std::move(node));
}

} // namespace salsa
