#include "salsa/ops.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "salsa/error.h"
#include "salsa/rng.h"

namespace salsa {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

using detail::makeResult;
using detail::Node;

enum class Broadcast { Equal, Suffix, Scalar };

Broadcast broadcastKind(const Shape& x, const Shape& y, const char* op) {
  if (x == y) {
    return Broadcast::Equal;
  }
  if (shapeNumel(y) == 1) {
    return Broadcast::Scalar;
  }
  if (y.size() < x.size() && std::equal(y.rbegin(), y.rend(), x.rbegin())) {
    return Broadcast::Suffix;
  }
  throw DimensionError(
      std::string(op) + ": shapes " + shapeString(x) + " and " + shapeString(y) +
      " are not broadcastable (only equal, trailing-suffix, or scalar)");
}

void require2d(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(
        std::string(op) + ": expected a 2-D tensor, got " + shapeString(t.shape()));
  }
}

// Splits a shape around `axis` into (outer, length, inner).
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisSplit splitAxis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(
        std::string(op) + ": axis " + std::to_string(axis) + " invalid for " +
        shapeString(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) {
    s.outer *= shape[i];
  }
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) {
    s.inner *= shape[i];
  }
  return s;
}

double stableSoftplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double stableSigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace

Tensor elementwise(UnaryOp op, const Tensor& x) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  const char* name = "unary";
  switch (op) {
    case UnaryOp::Exp:
      name = "exp";
      std::transform(in.begin(), in.end(), out.begin(), [](double v) { return std::exp(v); });
      break;
    case UnaryOp::Log:
      name = "log";
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (!(in[i] > 0.0)) {
          throw DomainError("log: non-positive input " + std::to_string(in[i]));
        }
        out[i] = std::log(in[i]);
      }
      break;
    case UnaryOp::Tanh:
      name = "tanh";
      std::transform(in.begin(), in.end(), out.begin(), [](double v) { return std::tanh(v); });
      break;
    case UnaryOp::Sigmoid:
      name = "sigmoid";
      std::transform(in.begin(), in.end(), out.begin(), stableSigmoid);
      break;
    case UnaryOp::Relu:
      name = "relu";
      std::transform(in.begin(), in.end(), out.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
      break;
    case UnaryOp::Neg:
      name = "neg";
      std::transform(in.begin(), in.end(), out.begin(), [](double v) { return -v; });
      break;
    case UnaryOp::Softplus:
      name = "softplus";
      std::transform(in.begin(), in.end(), out.begin(), stableSoftplus);
      break;
  }
  return makeResult(x.shape(), std::move(out), {x}, name, [op](Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requiresGrad) {
      return;
    }
    auto& g = parent.ensureGrad();
    const auto& y = self.data;
    const auto& xin = parent.data;
    const auto& dy = self.grad;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      double d = 0.0;
      switch (op) {
        case UnaryOp::Exp:
          d = y[i];
          break;
        case UnaryOp::Log:
          d = 1.0 / xin[i];
          break;
        case UnaryOp::Tanh:
          d = 1.0 - y[i] * y[i];
          break;
        case UnaryOp::Sigmoid:
          d = y[i] * (1.0 - y[i]);
          break;
        case UnaryOp::Relu:
          d = xin[i] > 0.0 ? 1.0 : 0.0;
          break;
        case UnaryOp::Neg:
          d = -1.0;
          break;
        case UnaryOp::Softplus:
          d = stableSigmoid(xin[i]);
          break;
      }
      g[i] += d * dy[i];
    }
  });
}

// Calls f(i, j) for every output index i and its right-operand index j.
template <class F>
void forEachBroadcast(std::size_t n, std::size_t period, Broadcast kind, F f) {
  if (kind == Broadcast::Equal) {
    for (std::size_t i = 0; i < n; ++i) {
      f(i, i);
    }
  } else if (kind == Broadcast::Scalar) {
    for (std::size_t i = 0; i < n; ++i) {
      f(i, std::size_t{0});
    }
  } else {
    for (std::size_t base = 0; base < n; base += period) {
      for (std::size_t j = 0; j < period; ++j) {
        f(base + j, j);
      }
    }
  }
}

Tensor elementwise(BinaryOp op, const Tensor& x, const Tensor& y) {
  const char* name = op == BinaryOp::Add ? "add"
      : op == BinaryOp::Sub            ? "sub"
      : op == BinaryOp::Mul            ? "mul"
                                       : "div";
  const auto kind = broadcastKind(x.shape(), y.shape(), name);
  const double* a = x.data().data();
  const double* b = y.data().data();
  const std::size_t n = x.numel();
  const std::size_t period = y.numel();
  if (op == BinaryOp::Div && std::find(b, b + period, 0.0) != b + period) {
    throw DomainError("div: division by zero");
  }
  std::vector<double> out(n);
  double* o = out.data();
  switch (op) {
    case BinaryOp::Add:
      forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) { o[i] = a[i] + b[j]; });
      break;
    case BinaryOp::Sub:
      forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) { o[i] = a[i] - b[j]; });
      break;
    case BinaryOp::Mul:
      forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) { o[i] = a[i] * b[j]; });
      break;
    case BinaryOp::Div:
      forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) { o[i] = a[i] / b[j]; });
      break;
  }
  return makeResult(x.shape(), std::move(out), {x, y}, name, [op, kind](Node& self) {
    auto& px = *self.parents[0];
    auto& py = *self.parents[1];
    const double* dy = self.grad.data();
    const double* a = px.data.data();
    const double* b = py.data.data();
    const std::size_t n = self.grad.size();
    const std::size_t period = py.data.size();
    if (px.requiresGrad) {
      double* g = px.ensureGrad().data();
      switch (op) {
        case BinaryOp::Add:
        case BinaryOp::Sub:
          for (std::size_t i = 0; i < n; ++i) {
            g[i] += dy[i];
          }
          break;
        case BinaryOp::Mul:
          forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) { g[i] += dy[i] * b[j]; });
          break;
        case BinaryOp::Div:
          forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) { g[i] += dy[i] / b[j]; });
          break;
      }
    }
    if (py.requiresGrad) {
      double* g = py.ensureGrad().data();
      switch (op) {
        case BinaryOp::Add:
          forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) { g[j] += dy[i]; });
          break;
        case BinaryOp::Sub:
          forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) { g[j] -= dy[i]; });
          break;
        case BinaryOp::Mul:
          forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) { g[j] += dy[i] * a[i]; });
          break;
        case BinaryOp::Div:
          forEachBroadcast(n, period, kind, [&](std::size_t i, std::size_t j) {
            g[j] -= dy[i] * a[i] / (b[j] * b[j]);
          });
          break;
      }
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = in[i] * factor;
  }
  return makeResult(x.shape(), std::move(out), {x}, "scale", [factor](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requiresGrad) {
      return;
    }
    auto& g = p.ensureGrad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += factor * self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require2d(a, "matmul");
  require2d(b, "matmul");
  const auto m = a.dim(0);
  const auto k = a.dim(1);
  const auto n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError(
        "matmul: inner dimensions differ for " + shapeString(a.shape()) + " and " +
        shapeString(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() =
      ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  return makeResult({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    ConstMap dC(self.grad.data(), m, n);
    if (pa.requiresGrad) {
      MutMap(pa.ensureGrad().data(), m, k).noalias() +=
          dC * ConstMap(pb.data.data(), k, n).transpose();
    }
    if (pb.requiresGrad) {
      MutMap(pb.ensureGrad().data(), k, n).noalias() +=
          ConstMap(pa.data.data(), m, k).transpose() * dC;
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto s = splitAxis(x.shape(), axis, "softmax");
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.inner; ++j) {
      const std::size_t base = o * s.length * s.inner + j;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.length; ++l) {
        mx = std::max(mx, in[base + l * s.inner]);
      }
      double total = 0.0;
      for (std::size_t l = 0; l < s.length; ++l) {
        const double e = std::exp(in[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.length; ++l) {
        out[base + l * s.inner] /= total;
      }
    }
  }
  return makeResult(x.shape(), std::move(out), {x}, "softmax", [s](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requiresGrad) {
      return;
    }
    auto& g = p.ensureGrad();
    const auto& y = self.data;
    const auto& dy = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < s.inner; ++j) {
        const std::size_t base = o * s.length * s.inner + j;
        double dot = 0.0;
        for (std::size_t l = 0; l < s.length; ++l) {
          const auto idx = base + l * s.inner;
          dot += y[idx] * dy[idx];
        }
        for (std::size_t l = 0; l < s.length; ++l) {
          const auto idx = base + l * s.inner;
          g[idx] += y[idx] * (dy[idx] - dot);
        }
      }
    }
  });
}

Tensor reduce(ReduceOp op, const Tensor& x, std::size_t axis) {
  const auto s = splitAxis(x.shape(), axis, "reduce");
  Shape outShape;
  for (std::size_t i = 0; i < x.rank(); ++i) {
    if (i != axis) {
      outShape.push_back(x.shape()[i]);
    }
  }
  if (outShape.empty()) {
    outShape.push_back(1);
  }
  const auto in = x.data();
  std::vector<double> out(s.outer * s.inner);
  std::vector<std::size_t> argmax;
  if (op == ReduceOp::Max) {
    argmax.resize(out.size());
  }
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.inner; ++j) {
      const std::size_t base = o * s.length * s.inner + j;
      const std::size_t oi = o * s.inner + j;
      if (op == ReduceOp::Max) {
        std::size_t best = base;
        for (std::size_t l = 1; l < s.length; ++l) {
          const auto idx = base + l * s.inner;
          if (in[idx] > in[best]) {
            best = idx;
          }
        }
        argmax[oi] = best;
        out[oi] = in[best];
      } else {
        double total = 0.0;
        for (std::size_t l = 0; l < s.length; ++l) {
          total += in[base + l * s.inner];
        }
        out[oi] = op == ReduceOp::Mean ? total / static_cast<double>(s.length) : total;
      }
    }
  }
  return makeResult(
      std::move(outShape), std::move(out), {x}, "reduce",
      [op, s, argmax = std::move(argmax)](Node& self) {
        auto& p = *self.parents[0];
        if (!p.requiresGrad) {
          return;
        }
        auto& g = p.ensureGrad();
        const auto& dy = self.grad;
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t j = 0; j < s.inner; ++j) {
            const std::size_t base = o * s.length * s.inner + j;
            const std::size_t oi = o * s.inner + j;
            if (op == ReduceOp::Max) {
              g[argmax[oi]] += dy[oi];
            } else {
              const double d = op == ReduceOp::Mean
                  ? dy[oi] / static_cast<double>(s.length)
                  : dy[oi];
              for (std::size_t l = 0; l < s.length; ++l) {
                g[base + l * s.inner] += d;
              }
            }
          }
        }
      });
}

Tensor reduceAll(ReduceOp op, const Tensor& x) {
  return reduce(op, reshape(x, {x.numel()}), 0);
}

Tensor gather(const Tensor& table, std::span<const int> ids) {
  require2d(table, "gather");
  const auto rows = table.dim(0);
  const auto d = table.dim(1);
  if (ids.empty()) {
    throw DimensionError("gather: no ids");
  }
  const auto src = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw IndexError(
          "gather: id " + std::to_string(ids[i]) + " out of range for table of " +
          std::to_string(rows) + " rows");
    }
    std::copy_n(src.begin() + ids[i] * d, d, out.begin() + i * d);
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return makeResult(
      {ids.size(), d}, std::move(out), {table}, "gather",
      [d, saved = std::move(saved)](Node& self) {
        auto& p = *self.parents[0];
        if (!p.requiresGrad) {
          return;
        }
        auto& g = p.ensureGrad();
        for (std::size_t i = 0; i < saved.size(); ++i) {
          for (std::size_t c = 0; c < d; ++c) {
            g[saved[i] * d + c] += self.grad[i * d + c];
          }
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shapeNumel(shape) != x.numel()) {
    throw DimensionError(
        "reshape: cannot view " + shapeString(x.shape()) + " as " + shapeString(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return makeResult(std::move(shape), std::move(out), {x}, "reshape", [](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requiresGrad) {
      return;
    }
    auto& g = p.ensureGrad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i];
    }
  });
}

Tensor sliceCols(const Tensor& x, std::size_t start, std::size_t count) {
  require2d(x, "sliceCols");
  const auto rows = x.dim(0);
  const auto cols = x.dim(1);
  if (count == 0 || start + count > cols) {
    throw DimensionError(
        "sliceCols: columns [" + std::to_string(start) + ", " +
        std::to_string(start + count) + ") outside " + shapeString(x.shape()));
  }
  const auto in = x.data();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(in.begin() + r * cols + start, count, out.begin() + r * count);
  }
  return makeResult(
      {rows, count}, std::move(out), {x}, "sliceCols",
      [rows, cols, start, count](Node& self) {
        auto& p = *self.parents[0];
        if (!p.requiresGrad) {
          return;
        }
        auto& g = p.ensureGrad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < count; ++c) {
            g[r * cols + start + c] += self.grad[r * count + c];
          }
        }
      });
}

Tensor concatRows(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw DimensionError("concatRows: nothing to concatenate");
  }
  const auto cols = parts.front().dim(1);
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require2d(p, "concatRows");
    if (p.dim(1) != cols) {
      throw DimensionError(
          "concatRows: column mismatch " + shapeString(parts.front().shape()) +
          " vs " + shapeString(p.shape()));
    }
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return makeResult({rows, cols}, std::move(out), parts, "concatRows", [](Node& self) {
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const auto n = parent->data.size();
      if (parent->requiresGrad) {
        auto& g = parent->ensureGrad();
        for (std::size_t i = 0; i < n; ++i) {
          g[i] += self.grad[offset + i];
        }
      }
      offset += n;
    }
  });
}

Tensor repeatRows(const Tensor& x, std::size_t times) {
  require2d(x, "repeatRows");
  const auto rows = x.dim(0);
  const auto d = x.dim(1);
  const auto in = x.data();
  std::vector<double> out(rows * times * d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < times; ++t) {
      std::copy_n(in.begin() + r * d, d, out.begin() + (r * times + t) * d);
    }
  }
  return makeResult({rows * times, d}, std::move(out), {x}, "repeatRows", [rows, times, d](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requiresGrad) {
      return;
    }
    auto& g = p.ensureGrad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t < times; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
          g[r * d + c] += self.grad[(r * times + t) * d + c];
        }
      }
    }
  });
}

Tensor poolRows(const Tensor& x, std::size_t group, std::span<const double> weights) {
  require2d(x, "poolRows");
  const auto rows = x.dim(0);
  const auto d = x.dim(1);
  if (group == 0 || rows % group != 0 || weights.size() != rows) {
    throw DimensionError(
        "poolRows: " + shapeString(x.shape()) + " with group " + std::to_string(group) +
        " and " + std::to_string(weights.size()) + " weights");
  }
  const auto batch = rows / group;
  const auto in = x.data();
  std::vector<double> out(batch * d, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double w = weights[r];
    if (w == 0.0) {
      continue;
    }
    const auto b = r / group;
    for (std::size_t c = 0; c < d; ++c) {
      out[b * d + c] += w * in[r * d + c];
    }
  }
  std::vector<double> saved(weights.begin(), weights.end());
  return makeResult(
      {batch, d}, std::move(out), {x}, "poolRows",
      [group, d, saved = std::move(saved)](Node& self) {
        auto& p = *self.parents[0];
        if (!p.requiresGrad) {
          return;
        }
        auto& g = p.ensureGrad();
        for (std::size_t r = 0; r < saved.size(); ++r) {
          if (saved[r] == 0.0) {
            continue;
          }
          const auto b = r / group;
          for (std::size_t c = 0; c < d; ++c) {
            g[r * d + c] += saved[r] * self.grad[b * d + c];
          }
        }
      });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) {
    throw ContractError("dropout: probability must be in [0, 1)");
  }
  if (!training || p == 0.0) {
    return x;
  }
  const double keepScale = 1.0 / (1.0 - p);
  const auto in = x.data();
  std::vector<double> mask(in.size());
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    mask[i] = rng.uniform() >= p ? keepScale : 0.0;
    out[i] = in[i] * mask[i];
  }
  return makeResult(x.shape(), std::move(out), {x}, "dropout", [mask = std::move(mask)](Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requiresGrad) {
      return;
    }
    auto& g = parent.ensureGrad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += mask[i] * self.grad[i];
    }
  });
}

Tensor layerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (eps <= 0.0) {
    throw ContractError("layerNorm: eps must be positive");
  }
  const auto d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError(
        "layerNorm: gain/bias " + shapeString(gain.shape()) + "/" +
        shapeString(bias.shape()) + " do not match last axis of " + shapeString(x.shape()));
  }
  const auto rows = x.numel() / d;
  const auto in = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  std::vector<double> out(in.size());
  std::vector<double> xhat(in.size());
  std::vector<double> invStd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      mu += row[c];
    }
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      var += (row[c] - mu) * (row[c] - mu);
    }
    var /= static_cast<double>(d);
    invStd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (row[c] - mu) * invStd[r];
      xhat[r * d + c] = h;
      out[r * d + c] = gv[c] * h + bv[c];
    }
  }
  return makeResult(
      x.shape(), std::move(out), {x, gain, bias}, "layerNorm",
      [d, rows, xhat = std::move(xhat), invStd = std::move(invStd)](Node& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const auto& dy = self.grad;
        if (pg.requiresGrad) {
          auto& gg = pg.ensureGrad();
          for (std::size_t i = 0; i < rows * d; ++i) {
            gg[i % d] += dy[i] * xhat[i];
          }
        }
        if (pb.requiresGrad) {
          auto& gb = pb.ensureGrad();
          for (std::size_t i = 0; i < rows * d; ++i) {
            gb[i % d] += dy[i];
          }
        }
        if (px.requiresGrad) {
          auto& gx = px.ensureGrad();
          const auto& gv = pg.data;
          const double n = static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double sumD = 0.0;
            double sumDH = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              const double dh = dy[r * d + c] * gv[c];
              sumD += dh;
              sumDH += dh * xhat[r * d + c];
            }
            for (std::size_t c = 0; c < d; ++c) {
              const double dh = dy[r * d + c] * gv[c];
              gx[r * d + c] += invStd[r] / n * (n * dh - sumD - xhat[r * d + c] * sumDH);
            }
          }
        }
      });
}

Tensor l2NormalizeRows(const Tensor& x) {
  require2d(x, "l2NormalizeRows");
  const auto rows = x.dim(0);
  const auto d = x.dim(1);
  const auto in = x.data();
  std::vector<double> out(in.size());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      ss += in[r * d + c] * in[r * d + c];
    }
    if (ss == 0.0) {
      throw DomainError("l2NormalizeRows: zero row " + std::to_string(r));
    }
    norms[r] = std::sqrt(ss);
    for (std::size_t c = 0; c < d; ++c) {
      out[r * d + c] = in[r * d + c] / norms[r];
    }
  }
  return makeResult(
      x.shape(), std::move(out), {x}, "l2NormalizeRows",
      [rows, d, norms = std::move(norms)](Node& self) {
        auto& p = *self.parents[0];
        if (!p.requiresGrad) {
          return;
        }
        auto& g = p.ensureGrad();
        const auto& y = self.data;
        const auto& dy = self.grad;
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            dot += y[r * d + c] * dy[r * d + c];
          }
          for (std::size_t c = 0; c < d; ++c) {
            g[r * d + c] += (dy[r * d + c] - y[r * d + c] * dot) / norms[r];
          }
        }
      });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionSpec& spec) {
  require2d(q, "attention");
  require2d(k, "attention");
  require2d(v, "attention");
  const auto B = spec.batch;
  const auto H = spec.heads;
  const auto d = q.dim(1);
  if (B == 0 || H == 0 || d % H != 0 || k.dim(1) != d || v.dim(1) != d ||
      q.dim(0) % B != 0 || k.dim(0) % B != 0 || k.dim(0) != v.dim(0)) {
    throw DimensionError(
        "attention: incompatible q " + shapeString(q.shape()) + ", k " +
        shapeString(k.shape()) + ", v " + shapeString(v.shape()) + " for batch " +
        std::to_string(B) + " and " + std::to_string(H) + " heads");
  }
  const auto Tq = q.dim(0) / B;
  const auto Tk = k.dim(0) / B;
  if (spec.causal && Tq != Tk) {
    throw DimensionError("attention: causal masking needs Tq == Tk");
  }
  if (!spec.keyValid.empty() && spec.keyValid.size() != B * Tk) {
    throw DimensionError("attention: key mask has the wrong length");
  }
  if (!spec.allowed.empty() && spec.allowed.size() != B * Tq * Tk) {
    throw DimensionError("attention: attention mask has the wrong length");
  }
  const bool drop = spec.training && spec.dropout > 0.0;
  if (drop && spec.rng == nullptr) {
    throw ContractError("attention: dropout requires an rng");
  }
  const auto dk = d / H;
  const double invScale = 1.0 / std::sqrt(static_cast<double>(dk));
  const double keepScale = drop ? 1.0 / (1.0 - spec.dropout) : 1.0;

  const auto Q = q.data();
  const auto K = k.data();
  const auto V = v.data();
  // Weights laid out as [B, H, Tq, Tk]; masked entries are exactly zero.
  std::vector<double> probs(B * H * Tq * Tk, 0.0);
  std::vector<double> dropMask;
  if (drop) {
    dropMask.resize(probs.size());
  }
  std::vector<std::uint8_t> allowed(B * Tq * Tk);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < Tq; ++i) {
      bool any = false;
      for (std::size_t j = 0; j < Tk; ++j) {
        const bool ok = (spec.keyValid.empty() || spec.keyValid[b * Tk + j]) &&
            (spec.allowed.empty() || spec.allowed[(b * Tq + i) * Tk + j]) &&
            (!spec.causal || j <= i);
        allowed[(b * Tq + i) * Tk + j] = ok;
        any = any || ok;
      }
      if (!any) {
        throw ContractError(
            "attention: query " + std::to_string(i) + " of sequence " +
            std::to_string(b) + " has every key masked");
      }
    }
  }

  std::vector<double> out(B * Tq * d, 0.0);
  std::vector<double> scores(Tk);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const auto col = h * dk;
      for (std::size_t i = 0; i < Tq; ++i) {
        const double* qi = Q.data() + (b * Tq + i) * d + col;
        const std::uint8_t* ok = allowed.data() + (b * Tq + i) * Tk;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < Tk; ++j) {
          if (!ok[j]) {
            continue;
          }
          const double* kj = K.data() + (b * Tk + j) * d + col;
          double s = 0.0;
          for (std::size_t c = 0; c < dk; ++c) {
            s += qi[c] * kj[c];
          }
          scores[j] = s * invScale;
          mx = std::max(mx, scores[j]);
        }
        double total = 0.0;
        double* p = probs.data() + ((b * H + h) * Tq + i) * Tk;
        for (std::size_t j = 0; j < Tk; ++j) {
          if (ok[j]) {
            p[j] = std::exp(scores[j] - mx);
            total += p[j];
          }
        }
        double* oi = out.data() + (b * Tq + i) * d + col;
        for (std::size_t j = 0; j < Tk; ++j) {
          if (!ok[j]) {
            continue;
          }
          p[j] /= total;
          double w = p[j];
          if (drop) {
            const auto idx = ((b * H + h) * Tq + i) * Tk + j;
            dropMask[idx] = spec.rng->uniform() >= spec.dropout ? keepScale : 0.0;
            w *= dropMask[idx];
          }
          if (w == 0.0) {
            continue;
          }
          const double* vj = V.data() + (b * Tk + j) * d + col;
          for (std::size_t c = 0; c < dk; ++c) {
            oi[c] += w * vj[c];
          }
        }
      }
    }
  }

  return makeResult(
      {B * Tq, d}, std::move(out), {q, k, v}, "attention",
      [B, H, Tq, Tk, d, dk, invScale, probs = std::move(probs),
       dropMask = std::move(dropMask), allowed = std::move(allowed)](Node& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        const auto& Q = pq.data;
        const auto& K = pk.data;
        const auto& V = pv.data;
        const auto& dOut = self.grad;
        double* gq = pq.requiresGrad ? pq.ensureGrad().data() : nullptr;
        double* gk = pk.requiresGrad ? pk.ensureGrad().data() : nullptr;
        double* gv = pv.requiresGrad ? pv.ensureGrad().data() : nullptr;
        const bool drop = !dropMask.empty();
        std::vector<double> dp(Tk);
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t h = 0; h < H; ++h) {
            const auto col = h * dk;
            for (std::size_t i = 0; i < Tq; ++i) {
              const auto rowBase = ((b * H + h) * Tq + i) * Tk;
              const double* p = probs.data() + rowBase;
              const std::uint8_t* ok = allowed.data() + (b * Tq + i) * Tk;
              const double* doi = dOut.data() + (b * Tq + i) * d + col;
              double dot = 0.0;
              for (std::size_t j = 0; j < Tk; ++j) {
                if (!ok[j]) {
                  continue;
                }
                const double m = drop ? dropMask[rowBase + j] : 1.0;
                const double* vj = V.data() + (b * Tk + j) * d + col;
                double s = 0.0;
                for (std::size_t c = 0; c < dk; ++c) {
                  s += doi[c] * vj[c];
                }
                dp[j] = s * m;
                dot += p[j] * dp[j];
                if (gv && p[j] * m != 0.0) {
                  double* gvj = gv + (b * Tk + j) * d + col;
                  for (std::size_t c = 0; c < dk; ++c) {
                    gvj[c] += p[j] * m * doi[c];
                  }
                }
              }
              const double* qi = Q.data() + (b * Tq + i) * d + col;
              for (std::size_t j = 0; j < Tk; ++j) {
                if (!ok[j]) {
                  continue;
                }
                const double ds = p[j] * (dp[j] - dot) * invScale;
                if (ds == 0.0) {
                  continue;
                }
                const double* kj = K.data() + (b * Tk + j) * d + col;
                if (gq) {
                  double* gqi = gq + (b * Tq + i) * d + col;
                  for (std::size_t c = 0; c < dk; ++c) {
                    gqi[c] += ds * kj[c];
                  }
                }
                if (gk) {
                  double* gkj = gk + (b * Tk + j) * d + col;
                  for (std::size_t c = 0; c < dk; ++c) {
                    gkj[c] += ds * qi[c];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor softmaxCrossEntropy(
    const Tensor& logits,
    std::span<const int> targets,
    std::span<const double> weights) {
  require2d(logits, "softmaxCrossEntropy");
  const auto rows = logits.dim(0);
  const auto V = logits.dim(1);
  if (targets.size() != rows || weights.size() != rows) {
    throw DimensionError(
        "softmaxCrossEntropy: " + std::to_string(rows) + " rows but " +
        std::to_string(targets.size()) + " targets and " +
        std::to_string(weights.size()) + " weights");
  }
  const auto z = logits.data();
  std::vector<double> probs(rows * V, 0.0);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (weights[r] == 0.0) {
      continue;
    }
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= V) {
      throw IndexError("softmaxCrossEntropy: target " + std::to_string(targets[r]) + " out of range");
    }
    const double* row = z.data() + r * V;
    const double mx = *std::max_element(row, row + V);
    double total = 0.0;
    for (std::size_t c = 0; c < V; ++c) {
      probs[r * V + c] = std::exp(row[c] - mx);
      total += probs[r * V + c];
    }
    for (std::size_t c = 0; c < V; ++c) {
      probs[r * V + c] /= total;
    }
    loss += weights[r] * (std::log(total) + mx - row[targets[r]]);
  }
  std::vector<int> savedTargets(targets.begin(), targets.end());
  std::vector<double> savedWeights(weights.begin(), weights.end());
  return makeResult(
      {1}, {loss}, {logits}, "softmaxCrossEntropy",
      [rows, V, probs = std::move(probs), savedTargets = std::move(savedTargets),
       savedWeights = std::move(savedWeights)](Node& self) {
        auto& p = *self.parents[0];
        if (!p.requiresGrad) {
          return;
        }
        auto& g = p.ensureGrad();
        const double up = self.grad[0];
        for (std::size_t r = 0; r < rows; ++r) {
          const double w = savedWeights[r];
          if (w == 0.0) {
            continue;
          }
          for (std::size_t c = 0; c < V; ++c) {
            g[r * V + c] += up * w * probs[r * V + c];
          }
          g[r * V + savedTargets[r]] -= up * w;
        }
      });
}

} // namespace salsa
