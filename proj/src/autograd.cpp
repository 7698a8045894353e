#include "glam/autograd.hpp"

#include <cmath>
#include <unordered_set>

#include "glam/errors.hpp"
#include "glam/simd.hpp"

namespace glam {

struct Var::Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  Adjoint adjoint;
};

namespace {

thread_local bool g_grad_enabled = true;

void accumulate(Tensor& into, const Tensor& g) {
  if (into.empty()) {
    into = g;
    return;
  }
  if (into.shape() != g.shape()) {
    throw ShapeError("gradient shape " + shape_string(g.shape()) + " does not match " +
                     shape_string(into.shape()));
  }
  simd::active().add(into.data(), g.data(), into.data(), into.size());
}

}  // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

const Tensor& Var::value() const {
  if (!node_) throw std::logic_error("Var: access to undefined variable");
  return node_->value;
}

Tensor& Var::mutable_value() {
  if (!node_) throw std::logic_error("Var: access to undefined variable");
  return node_->value;
}

bool Var::requires_grad() const noexcept { return node_ && node_->requires_grad; }

const Tensor& Var::grad() const {
  if (!node_) throw std::logic_error("Var: access to undefined variable");
  return node_->grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

Var Var::from_op(Tensor value, std::vector<Var> inputs, Adjoint adjoint) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& v : inputs) any = any || v.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (Var& v : inputs) node->inputs.push_back(std::move(v.node_));
      node->adjoint = std::move(adjoint);
    }
  }
  return Var(std::move(node));
}

void backward(const Var& root) {
  if (!root.requires_grad()) throw std::logic_error("backward: root does not require grad");
  if (root.value().size() != 1) {
    throw ShapeError("backward: root must hold one element, got " +
                     shape_string(root.value().shape()));
  }
  // Iterative post-order DFS gives a topological order without deep recursion.
  std::vector<Var::Node*> order;
  std::unordered_set<Var::Node*> seen;
  std::vector<std::pair<Var::Node*, std::size_t>> stack{{root.node_.get(), 0}};
  seen.insert(root.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Var::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Interior adjoints are per-pass; only leaves accumulate across calls.
  for (Var::Node* node : order) {
    if (node->adjoint) node->grad = Tensor();
  }
  accumulate(root.node_->grad, Tensor(root.value().shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Var::Node* node = *it;
    if (!node->adjoint || node->grad.empty()) continue;
    std::vector<bool> needed(node->inputs.size());
    for (std::size_t i = 0; i < needed.size(); ++i) needed[i] = node->inputs[i]->requires_grad;
    std::vector<Tensor> grads = node->adjoint(node->grad, needed);
    for (std::size_t i = 0; i < node->inputs.size() && i < grads.size(); ++i) {
      if (needed[i] && !grads[i].empty()) accumulate(node->inputs[i]->grad, grads[i]);
    }
    if (node != root.node_.get()) node->grad = Tensor();
  }
}

// ---------------------------------------------------------------------------

Var conv2d(const Var& input, const Var& weight, const Var& bias, ConvOptions opts) {
  const Tensor empty;
  Tensor out = conv2d(input.value(), weight.value(), bias.defined() ? bias.value() : empty, opts);
  const Tensor x = input.value();
  const Tensor w = weight.value();
  std::vector<Var> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Var::from_op(
      std::move(out), std::move(inputs),
      [x, w, opts](const Tensor& g, const std::vector<bool>& needed) {
        const std::size_t cout = w.extent(0), kh = w.extent(2), kw = w.extent(3);
        const std::size_t npos = g.extent(1) * g.extent(2);
        const Tensor g2 = g.reshaped({cout, npos});
        const Tensor w2 = w.reshaped({cout, w.size() / cout});
        std::vector<Tensor> grads(needed.size());
        if (needed[0]) {
          Tensor dcols = matmul(transpose(w2), g2);
          grads[0] = col2im(dcols, x.shape(), kh, kw, opts);
        }
        if (needed[1]) {
          const Tensor cols = im2col(x, kh, kw, opts);
          grads[1] = matmul(g2, transpose(cols)).reshaped(w.shape());
        }
        if (needed.size() > 2 && needed[2]) {
          Tensor db({cout});
          for (std::size_t c = 0; c < cout; ++c) {
            double s = 0.0;
            for (std::size_t p = 0; p < npos; ++p) s += g2[c * npos + p];
            db[c] = s;
          }
          grads[2] = std::move(db);
        }
        return grads;
      });
}

Var conv1d_same(const Var& input, const Var& kernel) {
  Tensor out = conv1d_same(input.value(), kernel.value());
  const Tensor x = input.value();
  const Tensor k = kernel.value();
  return Var::from_op(std::move(out), {input, kernel},
                      [x, k](const Tensor& g, const std::vector<bool>&) {
                        const auto c = static_cast<std::ptrdiff_t>(x.size());
                        const auto ks = static_cast<std::ptrdiff_t>(k.size());
                        const std::ptrdiff_t half = ks / 2;
                        Tensor gx(x.shape()), gk(k.shape());
                        for (std::ptrdiff_t i = 0; i < c; ++i) {
                          for (std::ptrdiff_t t = 0; t < ks; ++t) {
                            const std::ptrdiff_t j = i + t - half;
                            if (j < 0 || j >= c) continue;
                            gx[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(t)];
                            gk[static_cast<std::size_t>(t)] += g[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
                          }
                        }
                        return std::vector<Tensor>{std::move(gx), std::move(gk)};
                      });
}

Var gap(const Var& input) {
  Tensor out = gap(input.value());
  const Shape shape = input.shape();
  return Var::from_op(std::move(out), {input}, [shape](const Tensor& g, const std::vector<bool>&) {
    const std::size_t n = shape[1] * shape[2];
    Tensor gx(shape);
    for (std::size_t c = 0; c < shape[0]; ++c) {
      const double v = g[c] / static_cast<double>(n);
      std::fill(gx.data() + c * n, gx.data() + (c + 1) * n, v);
    }
    return std::vector<Tensor>{std::move(gx)};
  });
}

Var sigmoid(const Var& x) {
  Tensor out = sigmoid(x.value());
  const Tensor y = out;
  return Var::from_op(std::move(out), {x}, [y](const Tensor& g, const std::vector<bool>&) {
    Tensor gx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] = g[i] * y[i] * (1.0 - y[i]);
    return std::vector<Tensor>{std::move(gx)};
  });
}

Var relu(const Var& x) {
  const Tensor in = x.value();
  return Var::from_op(relu(in), {x}, [in](const Tensor& g, const std::vector<bool>&) {
    Tensor gx(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) gx[i] = in[i] > 0.0 ? g[i] : 0.0;
    return std::vector<Tensor>{std::move(gx)};
  });
}

Var softmax_axis(const Var& x, std::size_t axis) {
  Tensor out = softmax_axis(x.value(), axis);
  const Tensor y = out;
  return Var::from_op(std::move(out), {x}, [y, axis](const Tensor& g, const std::vector<bool>&) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= y.extent(i);
    for (std::size_t i = axis + 1; i < y.rank(); ++i) inner *= y.extent(i);
    const std::size_t n = y.extent(axis);
    Tensor gx(y.shape());
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          gx[base + j * inner] = y[base + j * inner] * (g[base + j * inner] - s);
        }
      }
    }
    return std::vector<Tensor>{std::move(gx)};
  });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor av = a.value(), bv = b.value();
  return Var::from_op(matmul(av, bv), {a, b},
                      [av, bv](const Tensor& g, const std::vector<bool>& needed) {
                        std::vector<Tensor> grads(2);
                        if (needed[0]) grads[0] = matmul(g, transpose(bv));
                        if (needed[1]) grads[1] = matmul(transpose(av), g);
                        return grads;
                      });
}

Var transpose(const Var& m) {
  return Var::from_op(transpose(m.value()), {m}, [](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{transpose(g)};
  });
}

Var ewmul_broadcast(const Var& a, const Var& b) {
  const Tensor av = a.value(), bv = b.value();
  return Var::from_op(ewmul_broadcast(av, bv), {a, b},
                      [av, bv](const Tensor& g, const std::vector<bool>& needed) {
                        std::vector<Tensor> grads(2);
                        if (needed[0]) grads[0] = reduce_to_shape(ewmul_broadcast(g, bv), av.shape());
                        if (needed[1]) grads[1] = reduce_to_shape(ewmul_broadcast(g, av), bv.shape());
                        return grads;
                      });
}

Var add(const Var& a, const Var& b) {
  const Shape sa = a.shape(), sb = b.shape();
  return Var::from_op(add(a.value(), b.value()), {a, b},
                      [sa, sb](const Tensor& g, const std::vector<bool>& needed) {
                        std::vector<Tensor> grads(2);
                        if (needed[0]) grads[0] = reduce_to_shape(g, sa);
                        if (needed[1]) grads[1] = reduce_to_shape(g, sb);
                        return grads;
                      });
}

Var subtract(const Var& a, const Var& b) {
  const Shape sa = a.shape(), sb = b.shape();
  return Var::from_op(subtract(a.value(), b.value()), {a, b},
                      [sa, sb](const Tensor& g, const std::vector<bool>& needed) {
                        std::vector<Tensor> grads(2);
                        if (needed[0]) grads[0] = reduce_to_shape(g, sa);
                        if (needed[1]) grads[1] = scale(reduce_to_shape(g, sb), -1.0);
                        return grads;
                      });
}

Var scale(const Var& x, double alpha) {
  return Var::from_op(scale(x.value(), alpha), {x},
                      [alpha](const Tensor& g, const std::vector<bool>&) {
                        return std::vector<Tensor>{scale(g, alpha)};
                      });
}

Var reshape(const Var& x, Shape shape) {
  const Shape original = x.shape();
  return Var::from_op(x.value().reshaped(std::move(shape)), {x},
                      [original](const Tensor& g, const std::vector<bool>&) {
                        return std::vector<Tensor>{g.reshaped(original)};
                      });
}

Var concat(const std::vector<Var>& parts) {
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  std::vector<Shape> shapes;
  for (const Tensor& t : values) shapes.push_back(t.shape());
  Tensor out = concat(values);
  return Var::from_op(std::move(out), parts,
                      [shapes](const Tensor& g, const std::vector<bool>& needed) {
                        std::vector<Tensor> grads(shapes.size());
                        std::size_t offset = 0;
                        for (std::size_t i = 0; i < shapes.size(); ++i) {
                          const std::size_t n = shape_size(shapes[i]);
                          if (needed[i]) {
                            grads[i] = Tensor(shapes[i], std::vector<double>(g.data() + offset,
                                                                            g.data() + offset + n));
                          }
                          offset += n;
                        }
                        return grads;
                      });
}

Var pad_replicate(const Var& input, std::size_t pad) {
  const Shape shape = input.shape();
  return Var::from_op(pad_replicate(input.value(), pad), {input},
                      [shape, pad](const Tensor& g, const std::vector<bool>&) {
                        const std::size_t h = shape[1], w = shape[2];
                        Tensor gx(shape);
                        for (std::size_t c = 0; c < shape[0]; ++c) {
                          for (std::size_t y = 0; y < h + 2 * pad; ++y) {
                            const std::size_t sy = std::min(h - 1, y < pad ? 0 : y - pad);
                            for (std::size_t x = 0; x < w + 2 * pad; ++x) {
                              const std::size_t sx = std::min(w - 1, x < pad ? 0 : x - pad);
                              gx.at(c, sy, sx) += g.at(c, y, x);
                            }
                          }
                        }
                        return std::vector<Tensor>{std::move(gx)};
                      });
}

Var select(const Var& x, std::size_t index) {
  if (index >= x.value().size()) throw ShapeError("select: index out of range");
  const Shape shape = x.shape();
  return Var::from_op(Tensor::scalar(x.value()[index]), {x},
                      [shape, index](const Tensor& g, const std::vector<bool>&) {
                        Tensor gx(shape);
                        gx[index] = g[0];
                        return std::vector<Tensor>{std::move(gx)};
                      });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t n = rows.front().value().size();
  Tensor out({rows.size(), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& v = rows[r].value();
    if (v.rank() != 1 || v.size() != n) throw ShapeError("stack_rows: rows must be [n] vectors");
    std::copy(v.data(), v.data() + n, out.data() + r * n);
  }
  const std::size_t count = rows.size();
  return Var::from_op(std::move(out), rows,
                      [count, n](const Tensor& g, const std::vector<bool>& needed) {
                        std::vector<Tensor> grads(count);
                        for (std::size_t r = 0; r < count; ++r) {
                          if (needed[r]) {
                            grads[r] = Tensor({n}, std::vector<double>(g.data() + r * n,
                                                                      g.data() + (r + 1) * n));
                          }
                        }
                        return grads;
                      });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const Shape shape = x.shape();
  return Var::from_op(Tensor::scalar(s), {x}, [shape](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{Tensor(shape, g[0])};
  });
}

Var weighted_sum(const Var& x, const Tensor& weights) {
  if (weights.shape() != x.shape()) throw ShapeError("weighted_sum: weight shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += x.value()[i] * weights[i];
  return Var::from_op(Tensor::scalar(s), {x}, [weights](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{scale(weights, g[0])};
  });
}

Var l2_normalize_rows(const Var& x) {
  const Tensor& in = x.value();
  if (in.rank() != 2) throw ShapeError("l2_normalize_rows: expected [B,d]");
  const std::size_t rows = in.extent(0), d = in.extent(1);
  Tensor out(in.shape());
  Tensor norms({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    const Normalized n = l2_normalize(Tensor({d}, std::vector<double>(in.data() + r * d, in.data() + (r + 1) * d)));
    std::copy(n.value.data(), n.value.data() + d, out.data() + r * d);
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += in[r * d + j] * in[r * d + j];
    norms[r] = n.degenerate ? 0.0 : std::sqrt(ss);
  }
  const Tensor y = out;
  return Var::from_op(std::move(out), {x}, [y, norms](const Tensor& g, const std::vector<bool>&) {
    const std::size_t rows = y.extent(0), d = y.extent(1);
    Tensor gx(y.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      if (norms[r] == 0.0) continue;
      double proj = 0.0;
      for (std::size_t j = 0; j < d; ++j) proj += y[r * d + j] * g[r * d + j];
      for (std::size_t j = 0; j < d; ++j) {
        gx[r * d + j] = (g[r * d + j] - y[r * d + j] * proj) / norms[r];
      }
    }
    return std::vector<Tensor>{std::move(gx)};
  });
}

}  // namespace glam
