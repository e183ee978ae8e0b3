#include "edit/autodiff.hpp"

#include <cmath>
#include <numbers>

namespace edit {

Parameter::Parameter(std::string n, Tensor v, bool decay)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()), weight_decay(decay) {}

// ---------------------------------------------------------------- Tape

void Tape::check_owner(Var v) const {
  if (!v.valid() || &v.tape() != this || v.index() >= nodes_.size()) {
    throw UsageError("variable does not belong to this tape");
  }
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  if (auto it = parameter_nodes_.find(&p); it != parameter_nodes_.end()) {
    return Var(this, it->second);
  }
  nodes_.push_back(Node{p.value, {}, {}, {}, &p, true});
  parameter_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  if (backward_done_) throw UsageError("tape already consumed by backward()");
  bool needs = false;
  for (const auto& in : inputs) {
    check_owner(in);
    needs = needs || nodes_[in.index()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, std::move(inputs),
                        needs ? std::move(fn) : BackwardFn{}, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_sink(Var input) {
  Node& n = nodes_[input.index()];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
  return &n.grad;
}

void Tape::backward(Var loss) {
  check_owner(loss);
  if (backward_done_) throw UsageError("backward() called twice on one tape");
  if (nodes_[loss.index()].value.size() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " +
                     shape_string(nodes_[loss.index()].value.shape()));
  }
  backward_done_ = true;
  if (!nodes_[loss.index()].requires_grad) return;

  nodes_[loss.index()].grad = Tensor(nodes_[loss.index()].value.shape(), 1.0f);
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.parameter != nullptr) {
      auto dst = n.parameter->grad.data();
      auto src = n.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

// ---------------------------------------------------------------- kernels

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

// out[i,:] += a[i,p] * b[p,:]
void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> out,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    float* o = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float s = a[i * k + p];
      const float* br = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
    }
  }
}

// out (m×k) += g (m×n) · bᵀ, b is k×n
void gemm_nt(std::span<const float> g, std::span<const float> b, std::span<float> out,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* gr = g.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float* br = b.data() + p * n;
      float acc = 0.0f;
      for (std::size_t j = 0; j < n; ++j) acc += gr[j] * br[j];
      out[i * k + p] += acc;
    }
  }
}

// out (k×n) += aᵀ · g, a is m×k, g is m×n
void gemm_tn(std::span<const float> a, std::span<const float> g, std::span<float> out,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* gr = g.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float s = a[i * k + p];
      float* o = out.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += s * gr[j];
    }
  }
}

Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  Tensor out(matrix_shape(a.rows(), b.cols()));
  gemm_nn(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  Tensor y(x.shape());
  const std::size_t m = x.rows(), n = x.cols();
  for (std::size_t r = 0; r < m; ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    float mx = in[0];
    for (float v : in) mx = std::max(mx, v);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      out[c] = std::exp(in[c] - mx);
      total += out[c];
    }
    const double inv = 1.0 / total;
    for (std::size_t c = 0; c < n; ++c) out[c] = static_cast<float>(out[c] * inv);
  }
  return y;
}

namespace {

struct RowStats {
  std::vector<float> mean;
  std::vector<float> inv_std;
};

RowStats row_stats(const Tensor& x, float eps) {
  const std::size_t m = x.rows(), d = x.cols();
  RowStats s{std::vector<float>(m), std::vector<float>(m)};
  for (std::size_t r = 0; r < m; ++r) {
    auto in = x.row(r);
    double mu = 0.0;
    for (float v : in) mu += v;
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (float v : in) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    s.mean[r] = static_cast<float>(mu);
    s.inv_std[r] = static_cast<float>(1.0 / std::sqrt(var + eps));
  }
  return s;
}

void check_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  if (gamma.size() != x.cols() || beta.size() != x.cols()) {
    throw DimensionError("layer_norm: gamma " + shape_string(gamma.shape()) + " / beta " +
                         shape_string(beta.shape()) + " do not match rows of " +
                         shape_string(x.shape()));
  }
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  check_affine(x, gamma, beta);
  const auto stats = row_stats(x, eps);
  Tensor y(x.shape());
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = (in[c] - stats.mean[r]) * stats.inv_std[r] * gamma[c] + beta[c];
    }
  }
  return y;
}

float gelu(float x) {
  return 0.5f * x * (1.0f + std::erf(x * static_cast<float>(std::numbers::sqrt2 / 2)));
}

Tensor gelu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gelu(x[i]);
  return y;
}

// ---------------------------------------------------------------- ops

Var matmul(Var a, Var b) {
  Tape& t = a.tape();
  Tensor out = matmul(a.value(), b.value());
  return t.record(std::move(out), {a, b}, [](Tape& tape, std::size_t self) {
    const auto& in = tape.inputs_at(self);
    const Tensor& g = tape.grad_at(self);
    const Tensor& av = in[0].value();
    const Tensor& bv = in[1].value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (Tensor* ga = tape.grad_sink(in[0])) gemm_nt(g.data(), bv.data(), ga->data(), m, k, n);
    if (Tensor* gb = tape.grad_sink(in[1])) gemm_tn(av.data(), g.data(), gb->data(), m, k, n);
  });
}

Var transpose(Var x) {
  const Tensor& v = x.value();
  const std::size_t m = v.rows(), n = v.cols();
  Tensor out({n, m});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out.at(c, r) = v.at(r, c);
  return x.tape().record(std::move(out), {x}, [m, n](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_at(self);
    if (Tensor* gx = tape.grad_sink(tape.inputs_at(self)[0])) {
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) (*gx)[r * n + c] += g[c * m + r];
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_at(self);
    if (Tensor* gx = tape.grad_sink(tape.inputs_at(self)[0]))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_at(self);
    for (const Var& in : tape.inputs_at(self)) {
      if (Tensor* gi = tape.grad_sink(in))
        for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_at(self);
    const auto& in = tape.inputs_at(self);
    if (Tensor* ga = tape.grad_sink(in[0]))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * in[1].value()[i];
    if (Tensor* gb = tape.grad_sink(in[1]))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * in[0].value()[i];
  });
}

Var add_row(Var x, Var bias) {
  const Tensor& xv = x.value();
  if (bias.value().size() != xv.cols()) {
    throw DimensionError("add_row: bias " + shape_string(bias.value().shape()) +
                         " does not match rows of " + shape_string(xv.shape()));
  }
  Tensor out = xv;
  const std::size_t m = xv.rows(), n = xv.cols();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bias.value()[c];
  return x.tape().record(std::move(out), {x, bias}, [m, n](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_at(self);
    const auto& in = tape.inputs_at(self);
    if (Tensor* gx = tape.grad_sink(in[0]))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    if (Tensor* gb = tape.grad_sink(in[1]))
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) (*gb)[c] += g[r * n + c];
  });
}

Var mul_row(Var x, Var gain) {
  const Tensor& xv = x.value();
  if (gain.value().size() != xv.cols()) {
    throw DimensionError("mul_row: gain " + shape_string(gain.value().shape()) +
                         " does not match rows of " + shape_string(xv.shape()));
  }
  Tensor out = xv;
  const std::size_t m = xv.rows(), n = xv.cols();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] *= gain.value()[c];
  return x.tape().record(std::move(out), {x, gain}, [m, n](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_at(self);
    const auto& in = tape.inputs_at(self);
    const Tensor& xv = in[0].value();
    const Tensor& gv = in[1].value();
    if (Tensor* gx = tape.grad_sink(in[0]))
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) (*gx)[r * n + c] += g[r * n + c] * gv[c];
    if (Tensor* gg = tape.grad_sink(in[1]))
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) (*gg)[c] += g[r * n + c] * xv[r * n + c];
  });
}

Var scale(Var x, float factor) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  return x.tape().record(std::move(out), {x}, [factor](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_at(self);
    if (Tensor* gx = tape.grad_sink(tape.inputs_at(self)[0]))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * factor;
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (float v : x.value().data()) total += v;
  return x.tape().record(Tensor({1}, static_cast<float>(total)), {x},
                         [](Tape& tape, std::size_t self) {
                           const float g = tape.grad_at(self)[0];
                           if (Tensor* gx = tape.grad_sink(tape.inputs_at(self)[0]))
                             for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
                         });
}

Var softmax_rows(Var x) {
  Tensor y = softmax_rows(x.value());
  return x.tape().record(std::move(y), {x}, [](Tape& tape, std::size_t self) {
    Tensor* gx = tape.grad_sink(tape.inputs_at(self)[0]);
    if (!gx) return;
    const Tensor& y = tape.value_at(self);
    const Tensor& g = tape.grad_at(self);
    const std::size_t m = y.rows(), n = y.cols();
    for (std::size_t r = 0; r < m; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * y[r * n + c];
      for (std::size_t c = 0; c < n; ++c)
        (*gx)[r * n + c] += y[r * n + c] * (g[r * n + c] - static_cast<float>(dot));
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, float eps) {
  const Tensor& xv = x.value();
  check_affine(xv, gamma.value(), beta.value());
  auto stats = row_stats(xv, eps);
  const std::size_t m = xv.rows(), d = xv.cols();
  Tensor xhat(xv.shape());
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const float h = (xv[r * d + c] - stats.mean[r]) * stats.inv_std[r];
      xhat[r * d + c] = h;
      y[r * d + c] = h * gamma.value()[c] + beta.value()[c];
    }
  }
  return x.tape().record(
      std::move(y), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(stats.inv_std), m, d](Tape& tape,
                                                                         std::size_t self) {
        const Tensor& g = tape.grad_at(self);
        const auto& in = tape.inputs_at(self);
        const Tensor& gam = in[1].value();
        if (Tensor* gg = tape.grad_sink(in[1]))
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < d; ++c) (*gg)[c] += g[r * d + c] * xhat[r * d + c];
        if (Tensor* gb = tape.grad_sink(in[2]))
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < d; ++c) (*gb)[c] += g[r * d + c];
        Tensor* gx = tape.grad_sink(in[0]);
        if (!gx) return;
        std::vector<float> dxhat(d);
        for (std::size_t r = 0; r < m; ++r) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            dxhat[c] = g[r * d + c] * gam[c];
            mean_dxhat += dxhat[c];
            mean_dxhat_xhat += dxhat[c] * xhat[r * d + c];
          }
          mean_dxhat /= static_cast<double>(d);
          mean_dxhat_xhat /= static_cast<double>(d);
          for (std::size_t c = 0; c < d; ++c) {
            (*gx)[r * d + c] +=
                inv_std[r] * static_cast<float>(dxhat[c] - mean_dxhat -
                                                xhat[r * d + c] * mean_dxhat_xhat);
          }
        }
      });
}

Var gelu(Var x) {
  Tensor y = gelu(x.value());
  return x.tape().record(std::move(y), {x}, [](Tape& tape, std::size_t self) {
    const Var in = tape.inputs_at(self)[0];
    Tensor* gx = tape.grad_sink(in);
    if (!gx) return;
    const Tensor& g = tape.grad_at(self);
    const Tensor& xv = in.value();
    constexpr float inv_sqrt2 = static_cast<float>(std::numbers::sqrt2 / 2);
    constexpr float inv_sqrt2pi = static_cast<float>(std::numbers::inv_sqrtpi * std::numbers::sqrt2 / 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const float v = xv[i];
      const float cdf = 0.5f * (1.0f + std::erf(v * inv_sqrt2));
      const float pdf = inv_sqrt2pi * std::exp(-0.5f * v * v);
      (*gx)[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts[0].value().cols();
  std::size_t m = 0;
  for (const Var& p : parts) {
    if (p.value().cols() != n) {
      throw DimensionError("concat_rows: column count mismatch " +
                           shape_string(parts[0].value().shape()) + " vs " +
                           shape_string(p.value().shape()));
    }
    m += p.value().rows();
  }
  Tensor out({m, n});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + offset);
    offset += p.value().size();
  }
  return parts[0].tape().record(std::move(out), {parts.begin(), parts.end()},
                                [](Tape& tape, std::size_t self) {
                                  const Tensor& g = tape.grad_at(self);
                                  std::size_t offset = 0;
                                  for (const Var& in : tape.inputs_at(self)) {
                                    const std::size_t len = in.value().size();
                                    if (Tensor* gi = tape.grad_sink(in))
                                      for (std::size_t i = 0; i < len; ++i)
                                        (*gi)[i] += g[offset + i];
                                    offset += len;
                                  }
                                });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts[0].value().rows();
  std::size_t n = 0;
  for (const Var& p : parts) {
    if (p.value().rows() != m) {
      throw DimensionError("concat_cols: row count mismatch " +
                           shape_string(parts[0].value().shape()) + " vs " +
                           shape_string(p.value().shape()));
    }
    n += p.value().cols();
  }
  Tensor out({m, n});
  std::size_t col = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out[r * n + col + c] = v.at(r, c);
    col += v.cols();
  }
  return parts[0].tape().record(std::move(out), {parts.begin(), parts.end()},
                                [m, n](Tape& tape, std::size_t self) {
                                  const Tensor& g = tape.grad_at(self);
                                  std::size_t col = 0;
                                  for (const Var& in : tape.inputs_at(self)) {
                                    const std::size_t w = in.value().cols();
                                    if (Tensor* gi = tape.grad_sink(in))
                                      for (std::size_t r = 0; r < m; ++r)
                                        for (std::size_t c = 0; c < w; ++c)
                                          (*gi)[r * w + c] += g[r * n + col + c];
                                    col += w;
                                  }
                                });
}

Var slice_rows(Var x, std::size_t start, std::size_t count) {
  const Tensor& v = x.value();
  if (count == 0 || start + count > v.rows()) {
    throw BoundsError("slice_rows: [" + std::to_string(start) + ", " +
                      std::to_string(start + count) + ") outside " + shape_string(v.shape()));
  }
  const std::size_t n = v.cols();
  Tensor out({count, n});
  std::copy_n(v.data().begin() + start * n, count * n, out.data().begin());
  return x.tape().record(std::move(out), {x}, [start, n](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_at(self);
    if (Tensor* gx = tape.grad_sink(tape.inputs_at(self)[0]))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[start * n + i] += g[i];
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  const Tensor& v = x.value();
  if (count == 0 || start + count > v.cols()) {
    throw BoundsError("slice_cols: [" + std::to_string(start) + ", " +
                      std::to_string(start + count) + ") outside " + shape_string(v.shape()));
  }
  const std::size_t m = v.rows(), n = v.cols();
  Tensor out({m, count});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < count; ++c) out[r * count + c] = v[r * n + start + c];
  return x.tape().record(std::move(out), {x}, [start, count, m, n](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_at(self);
    if (Tensor* gx = tape.grad_sink(tape.inputs_at(self)[0]))
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < count; ++c) (*gx)[r * n + start + c] += g[r * count + c];
  });
}

Var linear(Var x, Var weight, Var bias) { return add_row(matmul(x, weight), bias); }

Var cross_entropy(Var logits, std::size_t target, float smoothing) {
  const Tensor& z = logits.value();
  if (z.rows() != 1) {
    throw DimensionError("cross_entropy: expected one logit row, got " + shape_string(z.shape()));
  }
  const std::size_t k = z.cols();
  if (target >= k) {
    throw BoundsError("cross_entropy: target " + std::to_string(target) + " outside " +
                      std::to_string(k) + " classes");
  }
  if (!(smoothing >= 0.0f && smoothing < 1.0f)) {
    throw std::invalid_argument("cross_entropy: smoothing must lie in [0, 1)");
  }
  float mx = z[0];
  for (float v : z.data()) mx = std::max(mx, v);
  double total = 0.0;
  for (float v : z.data()) total += std::exp(static_cast<double>(v) - mx);
  const double log_total = std::log(total) + mx;
  std::vector<float> probs(k);
  std::vector<float> targets(k, smoothing / static_cast<float>(k));
  targets[target] += 1.0f - smoothing;
  double loss = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double log_p = z[c] - log_total;
    probs[c] = static_cast<float>(std::exp(log_p));
    loss -= targets[c] * log_p;
  }
  return logits.tape().record(
      Tensor({1}, static_cast<float>(loss)), {logits},
      [probs = std::move(probs), targets = std::move(targets)](Tape& tape, std::size_t self) {
        const float g = tape.grad_at(self)[0];
        if (Tensor* gz = tape.grad_sink(tape.inputs_at(self)[0]))
          for (std::size_t c = 0; c < probs.size(); ++c) (*gz)[c] += g * (probs[c] - targets[c]);
      });
}

}  // namespace edit
