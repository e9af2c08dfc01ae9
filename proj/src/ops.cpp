// Copyright 2026 The nacasr Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nacasr/ops.hpp"

#include <cmath>
#include <utility>

#include "nacasr/kernels.hpp"

namespace nac::nn {
namespace {

// Parent i's gradient buffer, or nullptr when it does not track gradients.
Tensor* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op, const char* what) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " +
                     std::to_string(rank) + ", got " + shape_to_string(a.shape()));
  }
}

// Elementwise unary op given f(x) and f'(x, y) with y = f(x).
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Tensor out(a.shape());
  const auto& x = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(x[i]);
  return make_result(std::move(out), {a}, [df](Node& self) {
    Tensor* ga = parent_grad(self, 0);
    if (!ga) return;
    const Tensor& x = self.parents[0]->value;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      (*ga)[i] += self.grad[i] * df(x[i], self.value[i]);
    }
  });
}

}  // namespace

Var constant(Tensor value) { return Var(std::move(value), false); }

Var detach(const Var& a) { return constant(a.value()); }

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (Tensor* g = parent_grad(self, p)) {
        for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Var add_scalar(const Var& a, double offset) {
  return unary(a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var elu(const Var& a, double alpha) {
  return unary(a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
               [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(a, [slope](double x) { return x > 0.0 ? x : slope * x; },
               [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var abs(const Var& a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var log(const Var& a, double eps) {
  return unary(a, [eps](double x) { return std::log(x + eps); },
               [eps](double x, double) { return 1.0 / (x + eps); });
}

Activation parse_activation(const std::string& name) {
  if (name == "elu") return Activation::elu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_name(Activation kind) {
  switch (kind) {
    case Activation::elu:
      return "elu";
    case Activation::leaky_relu:
      return "leaky_relu";
    case Activation::tanh:
      return "tanh";
  }
  return "elu";
}

Var activate(const Var& a, Activation kind) {
  switch (kind) {
    case Activation::elu: return elu(a);
    case Activation::leaky_relu: return leaky_relu(a, 0.1);
    case Activation::tanh: return tanh(a);
  }
  return a;
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_result(Tensor::scalar(s), {a}, [](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      const double up = self.grad[0];
      for (auto& v : g->data()) v += up;
    }
  });
}

Var mean(const Var& a) {
  if (a.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Var l1_loss(const Var& a, const Var& b) { return mean(abs(sub(a, b))); }

Var mse_loss(const Var& a, const Var& b) { return mean(square(sub(a, b))); }

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose", "input");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor out({cols, rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a.value()[r * cols + c];
  return make_result(std::move(out), {a}, [rows, cols](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*g)[r * cols + c] += self.grad[c * rows + r];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts[0].dim(1);
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows", "input");
    if (p.dim(1) != cols) {
      throw ShapeError("concat_rows: column count " + std::to_string(p.dim(1)) +
                       " differs from " + std::to_string(cols));
    }
    rows += p.dim(0);
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  return make_result(Tensor({rows, cols}, std::move(data)), parts, [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      const std::size_t n = self.parents[p]->value.numel();
      if (Tensor* g = parent_grad(self, p)) {
        for (std::size_t i = 0; i < n; ++i) (*g)[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  require_rank(a, 2, "slice_rows", "input");
  if (begin > end || end > a.dim(0)) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") outside " + shape_to_string(a.shape()));
  }
  const std::size_t cols = a.dim(1);
  std::vector<double> data(a.value().data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                           a.value().data().begin() + static_cast<std::ptrdiff_t>(end * cols));
  return make_result(Tensor({end - begin, cols}, std::move(data)), {a},
                     [begin, cols](Node& self) {
                       if (Tensor* g = parent_grad(self, 0)) {
                         for (std::size_t i = 0; i < self.grad.numel(); ++i)
                           (*g)[begin * cols + i] += self.grad[i];
                       }
                     });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  require_rank(a, 2, "slice_cols", "input");
  if (begin > end || end > a.dim(1)) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") outside " + shape_to_string(a.shape()));
  }
  const std::size_t rows = a.dim(0), cols = a.dim(1), width = end - begin;
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = a.value()[r * cols + begin + c];
  return make_result(std::move(out), {a}, [rows, cols, begin, width](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < width; ++c)
          (*g)[r * cols + begin + c] += self.grad[r * width + c];
    }
  });
}

Var mean_axis1(const Var& a) {
  require_rank(a, 3, "mean_axis1", "input");
  const std::size_t n0 = a.dim(0), n1 = a.dim(1), n2 = a.dim(2);
  if (n1 == 0) throw ShapeError("mean_axis1: empty middle axis");
  Tensor out({n0, n2});
  const double inv = 1.0 / static_cast<double>(n1);
  for (std::size_t i = 0; i < n0; ++i) {
    for (std::size_t k = 0; k < n2; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < n1; ++j) s += a.value()[(i * n1 + j) * n2 + k];
      out[i * n2 + k] = s * inv;
    }
  }
  return make_result(std::move(out), {a}, [n0, n1, n2, inv](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t j = 0; j < n1; ++j)
          for (std::size_t k = 0; k < n2; ++k)
            (*g)[(i * n1 + j) * n2 + k] += self.grad[i * n2 + k] * inv;
    }
  });
}

Var conv1d(const Var& input, const Var& weight, const Var& bias, ConvOptions opts) {
  require_rank(input, 2, "conv1d", "input");
  require_rank(weight, 3, "conv1d", "weight");
  if (weight.dim(1) != input.dim(0)) {
    throw ShapeError("conv1d: input channels " + std::to_string(input.dim(0)) +
                     " do not match weight in_channels " + std::to_string(weight.dim(1)));
  }
  if (bias.defined() && (bias.value().rank() != 1 || bias.dim(0) != weight.dim(0))) {
    throw ShapeError("conv1d: bias shape " + shape_to_string(bias.shape()) +
                     " does not match out_channels " + std::to_string(weight.dim(0)));
  }
  kernels::ConvGeometry g;
  g.in_channels = input.dim(0);
  g.out_channels = weight.dim(0);
  g.kernel = weight.dim(2);
  g.stride = opts.stride;
  g.dilation = opts.dilation;
  g.pad_left = opts.pad_left;
  g.pad_right = opts.pad_right;
  g.in_length = input.dim(1);
  std::size_t out_len = 0;
  try {
    out_len = g.out_length();
  } catch (const std::invalid_argument& e) {
    throw ShapeError(std::string("conv1d: length ") + std::to_string(g.in_length) + ": " + e.what());
  }
  Tensor out({g.out_channels, out_len});
  kernels::conv1d_forward(g, input.value().data(), weight.value().data(),
                          bias.defined() ? bias.value().data() : std::span<const double>{},
                          out.data());
  std::vector<Var> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result(std::move(out), std::move(parents), [g](Node& self) {
    const Tensor& x = self.parents[0]->value;
    const Tensor& w = self.parents[1]->value;
    if (Tensor* gx = parent_grad(self, 0)) {
      kernels::conv1d_backward_input(g, self.grad.data(), w.data(), gx->data());
    }
    Tensor* gw = parent_grad(self, 1);
    Tensor* gb = self.parents.size() > 2 ? parent_grad(self, 2) : nullptr;
    if (gw || gb) {
      Tensor scratch;
      if (!gw) {
        scratch = Tensor(w.shape());
        gw = &scratch;
      }
      kernels::conv1d_backward_weight(g, self.grad.data(), x.data(), gw->data(),
                                      gb ? gb->data() : std::span<double>{});
    }
  });
}

Var conv_transpose1d(const Var& input, const Var& weight, const Var& bias,
                     std::size_t stride, std::size_t trim_left, std::size_t trim_right) {
  require_rank(input, 2, "conv_transpose1d", "input");
  require_rank(weight, 3, "conv_transpose1d", "weight");
  if (weight.dim(0) != input.dim(0)) {
    throw ShapeError("conv_transpose1d: input channels " + std::to_string(input.dim(0)) +
                     " do not match weight in_channels " + std::to_string(weight.dim(0)));
  }
  if (stride == 0) throw ShapeError("conv_transpose1d: stride must be >= 1");
  const std::size_t in_len = input.dim(1), kernel = weight.dim(2);
  if (in_len == 0) throw ShapeError("conv_transpose1d: empty input");
  const std::size_t full = stride * (in_len - 1) + kernel;
  if (trim_left + trim_right >= full) {
    throw ShapeError("conv_transpose1d: trimming " + std::to_string(trim_left + trim_right) +
                     " leaves no output from length " + std::to_string(full));
  }
  // The adjoint of a strided conv whose input is the transposed conv's output.
  kernels::ConvGeometry g;
  g.in_channels = weight.dim(1);
  g.out_channels = weight.dim(0);
  g.kernel = kernel;
  g.stride = stride;
  g.pad_left = trim_left;
  g.pad_right = trim_right;
  g.in_length = full - trim_left - trim_right;
  const std::size_t c_out = weight.dim(1);
  Tensor out({c_out, g.in_length});
  kernels::conv1d_backward_input(g, input.value().data(), weight.value().data(), out.data());
  if (bias.defined()) {
    if (bias.value().rank() != 1 || bias.dim(0) != c_out) {
      throw ShapeError("conv_transpose1d: bias shape " + shape_to_string(bias.shape()) +
                       " does not match out_channels " + std::to_string(c_out));
    }
    for (std::size_t c = 0; c < c_out; ++c)
      for (std::size_t t = 0; t < g.in_length; ++t) out[c * g.in_length + t] += bias.value()[c];
  }
  std::vector<Var> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result(std::move(out), std::move(parents), [g](Node& self) {
    const Tensor& x = self.parents[0]->value;
    const Tensor& w = self.parents[1]->value;
    if (Tensor* gx = parent_grad(self, 0)) {
      Tensor tmp(x.shape());
      kernels::conv1d_forward(g, self.grad.data(), w.data(), {}, tmp.data());
      for (std::size_t i = 0; i < tmp.numel(); ++i) (*gx)[i] += tmp[i];
    }
    if (Tensor* gw = parent_grad(self, 1)) {
      // Roles swap: the upstream gradient is the conv input, x its output grad.
      kernels::conv1d_backward_weight(g, x.data(), self.grad.data(), gw->data(), {});
    }
    if (self.parents.size() > 2) {
      if (Tensor* gb = parent_grad(self, 2)) {
        const std::size_t len = g.in_length;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          double acc = 0.0;
          for (std::size_t t = 0; t < len; ++t) acc += self.grad[c * len + t];
          (*gb)[c] += acc;
        }
      }
    }
  });
}

Var linear(const Var& input, const Var& weight, const Var& bias) {
  require_rank(input, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  const std::size_t rows = input.dim(0), in = input.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError("linear: input features " + std::to_string(in) +
                     " do not match weight in_features " + std::to_string(weight.dim(1)));
  }
  Tensor out({rows, out_dim});
  if (bias.defined()) {
    if (bias.value().rank() != 1 || bias.dim(0) != out_dim) {
      throw ShapeError("linear: bias shape " + shape_to_string(bias.shape()) +
                       " does not match out_features " + std::to_string(out_dim));
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < out_dim; ++c) out[r * out_dim + c] = bias.value()[c];
  }
  kernels::matmul_nt(rows, in, out_dim, input.value().data(), weight.value().data(), out.data());
  std::vector<Var> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result(std::move(out), std::move(parents), [rows, in, out_dim](Node& self) {
    const Tensor& x = self.parents[0]->value;
    const Tensor& w = self.parents[1]->value;
    if (Tensor* gx = parent_grad(self, 0)) {
      kernels::matmul_nn(rows, out_dim, in, self.grad.data(), w.data(), gx->data());
    }
    if (Tensor* gw = parent_grad(self, 1)) {
      kernels::matmul_tn(out_dim, rows, in, self.grad.data(), x.data(), gw->data());
    }
    if (self.parents.size() > 2) {
      if (Tensor* gb = parent_grad(self, 2)) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < out_dim; ++c) (*gb)[c] += self.grad[r * out_dim + c];
      }
    }
  });
}

Var lstm(const Var& input, const Var& weight_ih, const Var& weight_hh, const Var& bias) {
  require_rank(input, 2, "lstm", "input");
  const std::size_t steps = input.dim(0), in = input.dim(1);
  if (steps == 0) throw ShapeError("lstm: sequence must have at least one step");
  const std::size_t hidden = weight_hh.dim(1);
  const std::size_t gates = 4 * hidden;
  if (weight_ih.shape() != Shape{gates, in} || weight_hh.shape() != Shape{gates, hidden} ||
      bias.shape() != Shape{gates}) {
    throw ShapeError("lstm: weight shapes " + shape_to_string(weight_ih.shape()) + ", " +
                     shape_to_string(weight_hh.shape()) + ", " + shape_to_string(bias.shape()) +
                     " inconsistent with input width " + std::to_string(in));
  }
  // pre[t] = x_t W_ih^T + b, then the recurrent term is added step by step.
  Tensor pre({steps, gates});
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t k = 0; k < gates; ++k) pre[t * gates + k] = bias.value()[k];
  kernels::matmul_nt(steps, in, gates, input.value().data(), weight_ih.value().data(), pre.data());

  const auto& whh = weight_hh.value();
  Tensor acts({steps, gates});      // post-activation i, f, g, o
  Tensor cells({steps, hidden});
  Tensor hidden_prev({steps, hidden});  // h_{t-1}, row 0 is zero
  Tensor out({steps, hidden});
  std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    double* a = &acts[t * gates];
    for (std::size_t k = 0; k < gates; ++k) {
      double acc = pre[t * gates + k];
      const double* wrow = &whh[k * hidden];
      for (std::size_t j = 0; j < hidden; ++j) acc += wrow[j] * h[j];
      a[k] = acc;
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      hidden_prev[t * hidden + j] = h[j];
      const double ig = 1.0 / (1.0 + std::exp(-a[j]));
      const double fg = 1.0 / (1.0 + std::exp(-a[hidden + j]));
      const double gg = std::tanh(a[2 * hidden + j]);
      const double og = 1.0 / (1.0 + std::exp(-a[3 * hidden + j]));
      a[j] = ig;
      a[hidden + j] = fg;
      a[2 * hidden + j] = gg;
      a[3 * hidden + j] = og;
      c[j] = fg * c[j] + ig * gg;
      cells[t * hidden + j] = c[j];
      h[j] = og * std::tanh(c[j]);
      out[t * hidden + j] = h[j];
    }
  }

  return make_result(
      std::move(out), {input, weight_ih, weight_hh, bias},
      [steps, in, hidden, gates, acts = std::move(acts), cells = std::move(cells),
       hidden_prev = std::move(hidden_prev)](Node& self) {
        const Tensor& x = self.parents[0]->value;
        const Tensor& wih = self.parents[1]->value;
        const Tensor& whh = self.parents[2]->value;
        Tensor dpre({steps, gates});
        std::vector<double> dh_next(hidden, 0.0), dc_next(hidden, 0.0);
        for (std::size_t tt = steps; tt-- > 0;) {
          const double* a = &acts[tt * gates];
          double* d = &dpre[tt * gates];
          for (std::size_t j = 0; j < hidden; ++j) {
            const double ig = a[j], fg = a[hidden + j], gg = a[2 * hidden + j],
                         og = a[3 * hidden + j];
            const double ct = cells[tt * hidden + j];
            const double cprev = tt > 0 ? cells[(tt - 1) * hidden + j] : 0.0;
            const double tc = std::tanh(ct);
            const double dh = self.grad[tt * hidden + j] + dh_next[j];
            const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
            d[j] = dc * gg * ig * (1.0 - ig);
            d[hidden + j] = dc * cprev * fg * (1.0 - fg);
            d[2 * hidden + j] = dc * ig * (1.0 - gg * gg);
            d[3 * hidden + j] = dh * tc * og * (1.0 - og);
            dc_next[j] = dc * fg;
          }
          for (std::size_t j = 0; j < hidden; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < gates; ++k) acc += whh[k * hidden + j] * d[k];
            dh_next[j] = acc;
          }
        }
        if (Tensor* gx = parent_grad(self, 0)) {
          kernels::matmul_nn(steps, gates, in, dpre.data(), wih.data(), gx->data());
        }
        if (Tensor* gw = parent_grad(self, 1)) {
          kernels::matmul_tn(gates, steps, in, dpre.data(), x.data(), gw->data());
        }
        if (Tensor* gw = parent_grad(self, 2)) {
          kernels::matmul_tn(gates, steps, hidden, dpre.data(), hidden_prev.data(), gw->data());
        }
        if (Tensor* gb = parent_grad(self, 3)) {
          for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t k = 0; k < gates; ++k) (*gb)[k] += dpre[t * gates + k];
        }
      });
}

Var embedding(const std::vector<std::int32_t>& codes, std::size_t n_tables,
              const std::vector<Var>& tables) {
  if (tables.size() != n_tables) {
    throw ShapeError("embedding: " + std::to_string(n_tables) + " codebooks but " +
                     std::to_string(tables.size()) + " tables");
  }
  if (n_tables == 0 || codes.size() % n_tables != 0) {
    throw ShapeError("embedding: " + std::to_string(codes.size()) +
                     " codes do not split into rows of " + std::to_string(n_tables));
  }
  const std::size_t width = tables[0].dim(1);
  for (const auto& t : tables) {
    require_rank(t, 2, "embedding", "table");
    if (t.dim(1) != width) throw ShapeError("embedding: tables differ in width");
  }
  const std::size_t steps = codes.size() / n_tables;
  Tensor out({steps, n_tables, width});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t n = 0; n < n_tables; ++n) {
      const std::int32_t code = codes[t * n_tables + n];
      if (code < 0 || static_cast<std::size_t>(code) >= tables[n].dim(0)) {
        throw std::out_of_range("embedding: code " + std::to_string(code) + " at frame " +
                                std::to_string(t) + " outside table " + std::to_string(n) +
                                " of size " + std::to_string(tables[n].dim(0)));
      }
      const double* row = &tables[n].value()[static_cast<std::size_t>(code) * width];
      std::copy(row, row + width, &out[(t * n_tables + n) * width]);
    }
  }
  return make_result(std::move(out), tables, [codes, steps, n_tables, width](Node& self) {
    for (std::size_t n = 0; n < n_tables; ++n) {
      Tensor* g = parent_grad(self, n);
      if (!g) continue;
      for (std::size_t t = 0; t < steps; ++t) {
        const auto code = static_cast<std::size_t>(codes[t * n_tables + n]);
        for (std::size_t k = 0; k < width; ++k)
          (*g)[code * width + k] += self.grad[(t * n_tables + n) * width + k];
      }
    }
  });
}

Var straight_through(const Tensor& quantized, const Var& pre_quantized) {
  if (quantized.shape() != pre_quantized.shape()) {
    throw ShapeError("straight_through: quantized " + shape_to_string(quantized.shape()) +
                     " vs pre-quantized " + shape_to_string(pre_quantized.shape()));
  }
  return make_result(quantized, {pre_quantized}, [](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Var mul_constant(const Var& a, const Tensor& mask) {
  if (a.shape() != mask.shape()) throw ShapeError("mul_constant: shape mismatch");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
  return make_result(std::move(out), {a}, [mask](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * mask[i];
    }
  });
}

Var add_constant(const Var& a, const Tensor& offset) {
  if (a.shape() != offset.shape()) throw ShapeError("add_constant: shape mismatch");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += offset[i];
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

}  // namespace nac::nn
