#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace salsa {

class Rng;

using Shape = std::vector<std::size_t>;

std::size_t shapeNumel(const Shape& shape);
std::string shapeString(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requiresGrad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backwardFn;

  bool isLeaf() const {
    return !backwardFn;
  }
  // Allocates a zero gradient buffer on first use.
  std::vector<double>& ensureGrad();
};

} // namespace detail

/// Handle to a dense row-major float64 array that may take part in a
/// reverse-mode differentiation graph. Copies share the underlying storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requiresGrad = false);
  static Tensor full(Shape shape, double value, bool requiresGrad = false);
  static Tensor fromVector(
      Shape shape,
      std::vector<double> values,
      bool requiresGrad = false);
  static Tensor scalar(double value, bool requiresGrad = false);
  static Tensor randn(
      Shape shape,
      Rng& rng,
      double stddev,
      bool requiresGrad = false);

  bool defined() const {
    return static_cast<bool>(node_);
  }
  const Shape& shape() const;
  std::size_t rank() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view, only for leaves (parameters, inputs).
  std::span<double> mutableData();
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> toVector() const;

  bool requiresGrad() const;
  void setRequiresGrad(bool value);
  bool isLeaf() const;
  bool hasGrad() const;
  std::span<const double> grad() const;
  std::span<double> mutableGrad();
  void zeroGrad();

  /// New leaf holding a copy of the values, outside any graph.
  Tensor detach() const;

  /// Populates gradients of every requires-grad tensor reachable from this
  /// scalar. Gradients accumulate into leaves; the graph is released
  /// afterwards unless retainGraph is set.
  void backward(bool retainGraph = false) const;

  const std::shared_ptr<detail::Node>& node() const {
    return node_;
  }
  static Tensor fromNode(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Whether new operations record graph nodes on this thread.
bool gradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

/// Creates an op result. Parents and the backward rule are only recorded
/// when grad mode is on and at least one parent requires a gradient.
Tensor makeResult(
    Shape shape,
    std::vector<double> data,
    const std::vector<Tensor>& parents,
    const char* op,
    std::function<void(Node&)> backwardFn);

} // namespace detail

} // namespace salsa
