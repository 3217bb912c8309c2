#include <cmath>
#include <memory>

#include "bridgepress/tensor.hpp"

namespace bridgepress {

namespace {

using detail::accumulate;
using detail::Node;
using MapRM = Eigen::Map<const RowMatrix>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

// Elementwise unary op given f(x) and f'(x, f(x)).
template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  Vector out = a.values().unaryExpr(f);
  return Tensor::make_result(a.shape(), out, {a}, [df](Node& self) {
    const Node& x = *self.parents[0];
    Vector d(x.value.size());
    for (Index i = 0; i < d.size(); ++i) d[i] = df(x.value[i], self.value[i]);
    accumulate(*self.parents[0], self.grad.cwiseProduct(d));
  });
}

struct AxisSplit {
  Index outer = 1;
  Index extent = 1;
  Index inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Index conv_out(Index in, Index k, Index stride, Index pad) { return (in + 2 * pad - k) / stride + 1; }

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise arithmetic

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return Tensor::make_result(a.shape(), a.values() + b.values(), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return Tensor::make_result(a.shape(), a.values() - b.values(), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return Tensor::make_result(a.shape(), a.values().cwiseProduct(b.values()), {a, b},
                             [](Node& self) {
                               Node& x = *self.parents[0];
                               Node& y = *self.parents[1];
                               accumulate(x, self.grad.cwiseProduct(y.value));
                               accumulate(y, self.grad.cwiseProduct(x.value));
                             });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  return Tensor::make_result(a.shape(), a.values().cwiseQuotient(b.values()), {a, b},
                             [](Node& self) {
                               Node& x = *self.parents[0];
                               Node& y = *self.parents[1];
                               accumulate(x, self.grad.cwiseQuotient(y.value));
                               accumulate(y, -self.grad.cwiseProduct(self.value)
                                                  .cwiseQuotient(y.value));
                             });
}

Tensor scale(const Tensor& a, double s) {
  return Tensor::make_result(a.shape(), a.values() * s, {a},
                             [s](Node& self) { accumulate(*self.parents[0], self.grad * s); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return Tensor::make_result(a.shape(), a.values().array() + s, {a},
                             [](Node& self) { accumulate(*self.parents[0], self.grad); });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
  return Tensor::make_result({1}, Vector::Constant(1, a.values().sum()), {a}, [](Node& self) {
    Node& x = *self.parents[0];
    accumulate(x, Vector::Constant(x.value.size(), self.grad[0]));
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// Linear algebra and layout

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul needs rank-2 operands, got " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul inner extents differ: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const Index n = a.dim(0), k = a.dim(1), m = b.dim(1);
  RowMatrix out = a.matrix() * b.matrix();
  return Tensor::make_result({n, m}, Eigen::Map<Vector>(out.data(), out.size()), {a, b},
                             [n, k, m](Node& self) {
                               Node& x = *self.parents[0];
                               Node& y = *self.parents[1];
                               MapRM g(self.grad.data(), n, m);
                               if (x.requires_grad) {
                                 RowMatrix gx = g * MapRM(y.value.data(), k, m).transpose();
                                 accumulate(x, Eigen::Map<Vector>(gx.data(), gx.size()));
                               }
                               if (y.requires_grad) {
                                 RowMatrix gy = MapRM(x.value.data(), n, k).transpose() * g;
                                 accumulate(y, Eigen::Map<Vector>(gy.data(), gy.size()));
                               }
                             });
}

Tensor transpose(const Tensor& a) {
  const Index n = a.dim(0), m = a.dim(1);
  if (a.rank() != 2) throw DimensionError("transpose needs rank 2");
  RowMatrix t = a.matrix().transpose();
  return Tensor::make_result({m, n}, Eigen::Map<Vector>(t.data(), t.size()), {a},
                             [n, m](Node& self) {
                               RowMatrix g = MapRM(self.grad.data(), m, n).transpose();
                               accumulate(*self.parents[0], Eigen::Map<Vector>(g.data(), g.size()));
                             });
}

Tensor add_rowwise(const Tensor& a, const Tensor& row) {
  if (a.rank() != 2 || row.rank() != 1 || row.dim(0) != a.dim(1)) {
    throw DimensionError("add_rowwise: " + shape_string(a.shape()) + " + " +
                         shape_string(row.shape()));
  }
  const Index n = a.dim(0), m = a.dim(1);
  RowMatrix out = a.matrix();
  out.rowwise() += row.values().transpose();
  return Tensor::make_result({n, m}, Eigen::Map<Vector>(out.data(), out.size()), {a, row},
                             [n, m](Node& self) {
                               accumulate(*self.parents[0], self.grad);
                               Vector gr = MapRM(self.grad.data(), n, m).colwise().sum().transpose();
                               accumulate(*self.parents[1], gr);
                             });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  return Tensor::make_result(std::move(shape), a.values(), {a},
                             [](Node& self) { accumulate(*self.parents[0], self.grad); });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  const Shape& first = parts[0].shape();
  Shape out_shape = first;
  if (axis >= first.size()) throw DimensionError("concat axis out of range");
  out_shape[axis] = 0;
  std::vector<Index> extents;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: " + shape_string(s) + " incompatible with " +
                           shape_string(first));
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit total = split_at(out_shape, axis);
  Vector out(shape_size(out_shape));
  Index offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Index block = extents[p] * total.inner;
    const Vector& v = parts[p].values();
    for (Index o = 0; o < total.outer; ++o) {
      out.segment(o * total.extent * total.inner + offset, block) = v.segment(o * block, block);
    }
    offset += block;
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return Tensor::make_result(out_shape, out, parents, [total, extents](Node& self) {
    Index offset = 0;
    for (std::size_t p = 0; p < extents.size(); ++p) {
      const Index block = extents[p] * total.inner;
      Node& parent = *self.parents[p];
      if (parent.requires_grad) {
        Vector g(total.outer * block);
        for (Index o = 0; o < total.outer; ++o) {
          g.segment(o * block, block) =
              self.grad.segment(o * total.extent * total.inner + offset, block);
        }
        accumulate(parent, g);
      }
      offset += block;
    }
  });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& a, std::size_t axis, Index begin, Index end) {
  const AxisSplit s = split_at(a.shape(), axis);
  if (begin < 0 || end > s.extent || begin >= end) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range on axis of extent " + std::to_string(s.extent));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const Index block = (end - begin) * s.inner;
  Vector out(s.outer * block);
  for (Index o = 0; o < s.outer; ++o) {
    out.segment(o * block, block) = a.values().segment((o * s.extent + begin) * s.inner, block);
  }
  return Tensor::make_result(out_shape, out, {a}, [s, begin, block](Node& self) {
    Vector g = Vector::Zero(s.outer * s.extent * s.inner);
    for (Index o = 0; o < s.outer; ++o) {
      g.segment((o * s.extent + begin) * s.inner, block) = self.grad.segment(o * block, block);
    }
    accumulate(*self.parents[0], g);
  });
}

// ---------------------------------------------------------------------------
// Normalization

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  const Vector& v = x.values();
  Vector out(v.size());
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      const Index base = o * s.extent * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (Index e = 0; e < s.extent; ++e) mx = std::max(mx, v[base + e * s.inner]);
      double total = 0.0;
      for (Index e = 0; e < s.extent; ++e) {
        const double w = std::exp(v[base + e * s.inner] - mx);
        out[base + e * s.inner] = w;
        total += w;
      }
      for (Index e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
    }
  }
  return Tensor::make_result(x.shape(), out, {x}, [s](Node& self) {
    // dx = y * (g - <g, y>) along the axis.
    Vector g(self.value.size());
    for (Index o = 0; o < s.outer; ++o) {
      for (Index i = 0; i < s.inner; ++i) {
        const Index base = o * s.extent * s.inner + i;
        double dot = 0.0;
        for (Index e = 0; e < s.extent; ++e) {
          dot += self.grad[base + e * s.inner] * self.value[base + e * s.inner];
        }
        for (Index e = 0; e < s.extent; ++e) {
          const Index k = base + e * s.inner;
          g[k] = self.value[k] * (self.grad[k] - dot);
        }
      }
    }
    if (testing::active_fault() == testing::Fault::softmax_backward_sign) g = -g;
    accumulate(*self.parents[0], g);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& scale, const Tensor& offset, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm of a rank-0 tensor");
  const Index width = x.shape().back();
  if (width == 0) throw DimensionError("layer_norm over a zero-length row");
  const Index rows = x.size() / width;
  if (scale.defined() && (scale.rank() != 1 || scale.dim(0) != width)) {
    throw DimensionError("layer_norm scale must be [" + std::to_string(width) + "]");
  }
  if (offset.defined() && (offset.rank() != 1 || offset.dim(0) != width)) {
    throw DimensionError("layer_norm offset must be [" + std::to_string(width) + "]");
  }

  MapRM in(x.values().data(), rows, width);
  auto normalized = std::make_shared<RowMatrix>(rows, width);
  auto inv_std = std::make_shared<Vector>(rows);
  for (Index r = 0; r < rows; ++r) {
    const double mu = in.row(r).mean();
    const double var = (in.row(r).array() - mu).square().mean();
    (*inv_std)[r] = 1.0 / std::sqrt(var + eps);
    normalized->row(r) = (in.row(r).array() - mu) * (*inv_std)[r];
  }
  RowMatrix out = *normalized;
  if (scale.defined()) out.array().rowwise() *= scale.values().transpose().array();
  if (offset.defined()) out.array().rowwise() += offset.values().transpose().array();

  std::vector<Tensor> parents{x};
  const bool has_scale = scale.defined(), has_offset = offset.defined();
  if (has_scale) parents.push_back(scale);
  if (has_offset) parents.push_back(offset);

  return Tensor::make_result(
      x.shape(), Eigen::Map<Vector>(out.data(), out.size()), parents,
      [rows, width, normalized, inv_std, has_scale, has_offset](Node& self) {
        MapRM g(self.grad.data(), rows, width);
        std::size_t next = 1;
        RowMatrix g_hat = g;
        if (has_scale) {
          Node& sc = *self.parents[next++];
          g_hat.array().rowwise() *= sc.value.transpose().array();
          Vector gs = (g.array() * normalized->array()).colwise().sum().transpose();
          accumulate(sc, gs);
        }
        if (has_offset) {
          Node& off = *self.parents[next++];
          accumulate(off, g.colwise().sum().transpose());
        }
        RowMatrix gx(rows, width);
        for (Index r = 0; r < rows; ++r) {
          const double mean_g = g_hat.row(r).mean();
          const double mean_gx = (g_hat.row(r).array() * normalized->row(r).array()).mean();
          gx.row(r) = (*inv_std)[r] *
                      (g_hat.row(r).array() - mean_g - normalized->row(r).array() * mean_gx);
        }
        accumulate(*self.parents[0], Eigen::Map<Vector>(gx.data(), gx.size()));
      });
}

// ---------------------------------------------------------------------------
// Convolution

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Index stride,
              Index padding) {
  if (x.rank() != 3 || weight.rank() != 4) {
    throw DimensionError("conv2d needs x [C,H,W] and weight [O,C,k,k], got " +
                         shape_string(x.shape()) + ", " + shape_string(weight.shape()));
  }
  const Index C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const Index O = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != C || weight.dim(3) != k) {
    throw DimensionError("conv2d weight " + shape_string(weight.shape()) + " does not fit input " +
                         shape_string(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != O)) {
    throw DimensionError("conv2d bias must be [" + std::to_string(O) + "]");
  }
  if (stride < 1 || padding < 0) throw ConfigError("conv2d stride must be >= 1, padding >= 0");
  const Index Ho = conv_out(H, k, stride, padding), Wo = conv_out(W, k, stride, padding);
  if (Ho < 1 || Wo < 1) {
    throw DimensionError("conv2d kernel " + std::to_string(k) + " larger than padded input " +
                         shape_string(x.shape()));
  }
  const Index P = Ho * Wo, K = C * k * k;

  auto cols = std::make_shared<RowMatrix>(RowMatrix::Zero(K, P));
  const double* xv = x.values().data();
  for (Index c = 0; c < C; ++c) {
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        double* row = cols->row((c * k + ki) * k + kj).data();
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index iy = oy * stride - padding + ki;
          if (iy < 0 || iy >= H) continue;
          for (Index ox = 0; ox < Wo; ++ox) {
            const Index ix = ox * stride - padding + kj;
            if (ix >= 0 && ix < W) row[oy * Wo + ox] = xv[(c * H + iy) * W + ix];
          }
        }
      }
    }
  }
  RowMatrix out = MapRM(weight.values().data(), O, K) * (*cols);
  if (bias.defined()) out.colwise() += bias.values();

  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make_result(
      {O, Ho, Wo}, Eigen::Map<Vector>(out.data(), out.size()), parents,
      [=](Node& self) {
        MapRM g(self.grad.data(), O, P);
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        if (wn.requires_grad) {
          RowMatrix gw = g * cols->transpose();
          accumulate(wn, Eigen::Map<Vector>(gw.data(), gw.size()));
        }
        if (self.parents.size() > 2) accumulate(*self.parents[2], g.rowwise().sum());
        if (xn.requires_grad) {
          RowMatrix gcols = MapRM(wn.value.data(), O, K).transpose() * g;
          Vector gx = Vector::Zero(C * H * W);
          for (Index c = 0; c < C; ++c) {
            for (Index ki = 0; ki < k; ++ki) {
              for (Index kj = 0; kj < k; ++kj) {
                const double* row = gcols.row((c * k + ki) * k + kj).data();
                for (Index oy = 0; oy < Ho; ++oy) {
                  const Index iy = oy * stride - padding + ki;
                  if (iy < 0 || iy >= H) continue;
                  for (Index ox = 0; ox < Wo; ++ox) {
                    const Index ix = ox * stride - padding + kj;
                    if (ix >= 0 && ix < W) gx[(c * H + iy) * W + ix] += row[oy * Wo + ox];
                  }
                }
              }
            }
          }
          accumulate(xn, gx);
        }
      });
}

Tensor upsample2x(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("upsample2x needs [C,H,W]");
  const Index C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const Index H2 = 2 * H, W2 = 2 * W;
  Vector out(C * H2 * W2);
  const Vector& v = x.values();
  for (Index c = 0; c < C; ++c)
    for (Index y = 0; y < H2; ++y)
      for (Index xx = 0; xx < W2; ++xx) out[(c * H2 + y) * W2 + xx] = v[(c * H + y / 2) * W + xx / 2];
  return Tensor::make_result({C, H2, W2}, out, {x}, [C, H, W](Node& self) {
    const Index H2 = 2 * H, W2 = 2 * W;
    Vector g = Vector::Zero(C * H * W);
    for (Index c = 0; c < C; ++c)
      for (Index y = 0; y < H2; ++y)
        for (Index xx = 0; xx < W2; ++xx)
          g[(c * H + y / 2) * W + xx / 2] += self.grad[(c * H2 + y) * W2 + xx];
    accumulate(*self.parents[0], g);
  });
}

Tensor crop2d(const Tensor& x, Index height, Index width) {
  if (x.rank() != 3) throw DimensionError("crop2d needs [C,H,W]");
  Tensor out = x;
  if (height != x.dim(1)) out = slice(out, 1, 0, height);
  if (width != x.dim(2)) out = slice(out, 2, 0, width);
  return out;
}

// ---------------------------------------------------------------------------

Tensor bce_with_logits(const Tensor& logits, double label) {
  if (logits.size() == 0) throw DimensionError("bce_with_logits on an empty tensor");
  const Vector& z = logits.values();
  double total = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    // -[y log s(z) + (1-y) log(1-s(z))] = max(z,0) - z*y + log(1 + exp(-|z|))
    total += std::max(z[i], 0.0) - z[i] * label + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double n = static_cast<double>(z.size());
  return Tensor::make_result({1}, Vector::Constant(1, total / n), {logits},
                             [label, n](Node& self) {
                               const Vector& z = self.parents[0]->value;
                               Vector g(z.size());
                               for (Index i = 0; i < z.size(); ++i) {
                                 g[i] = (1.0 / (1.0 + std::exp(-z[i])) - label) / n;
                               }
                               accumulate(*self.parents[0], g * self.grad[0]);
                             });
}

}  // namespace bridgepress
