#include "chunkcheck/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "chunkcheck/kernels.hpp"

namespace chunkcheck {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  auto d = std::make_shared<TensorData>();
  d->data.assign(product(shape), 0.0);
  d->shape = std::move(shape);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  auto d = std::make_shared<TensorData>();
  d->data.assign(product(shape), value);
  d->shape = std::move(shape);
  return Tensor(std::move(d));
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data,
                    bool requires_grad) {
  if (product(shape) != data.size())
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape product " +
                     std::to_string(product(shape)));
  auto d = std::make_shared<TensorData>();
  d->shape = std::move(shape);
  d->data = std::move(data);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::randn(std::vector<std::size_t> shape, double stddev,
                     std::mt19937_64& rng, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(product(shape));
  for (auto& x : v) x = dist(rng);
  return from(std::move(shape), std::move(v), requires_grad);
}

std::size_t Tensor::rows() const {
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < d_->shape.size(); ++i) r *= d_->shape[i];
  return r;
}

double Tensor::item() const {
  if (size() != 1)
    throw ShapeError("item() on non-scalar tensor of shape " + shape_str());
  return d_->data[0];
}

void Tensor::zero_grad() { d_->grad.assign(d_->data.size(), 0.0); }

bool Tensor::all_finite() const {
  for (double v : d_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < d_->shape.size(); ++i)
    os << (i ? "x" : "") << d_->shape[i];
  os << "]";
  return os.str();
}

// --- Tape ---

std::vector<double>& Tape::grad_buf(const Tensor& t) {
  auto& buf = grads_[t.raw()];
  if (buf.empty()) buf.assign(t.size(), 0.0);
  return buf;
}

bool Tape::has_grad(const Tensor& t) const { return grads_.count(t.raw()) > 0; }

const std::vector<double>* Tape::find_grad(const Tensor& t) const {
  auto it = grads_.find(t.raw());
  return it == grads_.end() ? nullptr : &it->second;
}

void Tape::watch(const Tensor& t) { leaves_.push_back(t); }

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " +
                     loss.shape_str());
  grad_buf(loss)[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
}

void Tape::accumulate_leaf_grads() {
  for (auto& leaf : leaves_) {
    auto it = grads_.find(leaf.raw());
    if (it == grads_.end()) continue;
    auto& g = leaf.raw()->grad;
    if (g.empty()) g.assign(leaf.size(), 0.0);
    const auto& src = it->second;
    for (std::size_t i = 0; i < src.size(); ++i) g[i] += src[i];
  }
}

// --- ops ---

namespace {

bool track(const Tensor& t, Tape* tape) {
  return tape != nullptr && tape->needs(t);
}

// An op output is differentiable if any input is tracked.
bool any_tracked(Tape* tape, std::initializer_list<const Tensor*> ts) {
  if (!tape) return false;
  for (auto* t : ts)
    if (track(*t, tape)) return true;
  return false;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw ShapeError("matmul shape mismatch: " + a.shape_str() + " x " +
                     b.shape_str());
  Tensor out = Tensor::zeros({m, n});
  kernels::matmul(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  if (any_tracked(tape, {&a, &b})) {
    tape->record([a, b, out, m, k, n](Tape& t) {
      const auto& go = t.grad_buf(out);
      if (t.needs(a))
        kernels::matmul_nt(go.data(), b.data().data(), t.grad_buf(a).data(), m,
                           n, k, /*accumulate=*/true);
      if (t.needs(b))
        kernels::matmul_tn(a.data().data(), go.data(), t.grad_buf(b).data(), k,
                           m, n, /*accumulate=*/true);
    });
    tape->mark(out);
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b, Tape* tape) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k)
    throw ShapeError("matmul_nt shape mismatch: " + a.shape_str() + " x " +
                     b.shape_str() + "^T");
  Tensor out = Tensor::zeros({m, n});
  kernels::matmul_nt(a.data().data(), b.data().data(), out.data().data(), m, k,
                     n);
  if (any_tracked(tape, {&a, &b})) {
    tape->record([a, b, out, m, k, n](Tape& t) {
      const auto& go = t.grad_buf(out);
      if (t.needs(a))
        kernels::matmul(go.data(), b.data().data(), t.grad_buf(a).data(), m, n,
                        k, /*accumulate=*/true);
      if (t.needs(b))
        kernels::matmul_tn(go.data(), a.data().data(), t.grad_buf(b).data(), n,
                           m, k, /*accumulate=*/true);
    });
    tape->mark(out);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.shape() != b.shape())
    throw ShapeError("add shape mismatch: " + a.shape_str() + " vs " +
                     b.shape_str());
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = a.data()[i] + b.data()[i];
  if (any_tracked(tape, {&a, &b})) {
    tape->record([a, b, out](Tape& t) {
      const auto& go = t.grad_buf(out);
      if (t.needs(a)) {
        auto& ga = t.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (t.needs(b)) {
        auto& gb = t.grad_buf(b);
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
    tape->mark(out);
  }
  return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& b, Tape* tape) {
  const std::size_t m = a.rows(), n = a.cols();
  if (b.size() != n)
    throw ShapeError("add_rowvec: " + a.shape_str() + " + " + b.shape_str());
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.at(i, j) = a.at(i, j) + b.data()[j];
  if (any_tracked(tape, {&a, &b})) {
    tape->record([a, b, out, m, n](Tape& t) {
      const auto& go = t.grad_buf(out);
      if (t.needs(a)) {
        auto& ga = t.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (t.needs(b)) {
        auto& gb = t.grad_buf(b);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
      }
    });
    tape->mark(out);
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.shape() != b.shape())
    throw ShapeError("mul shape mismatch: " + a.shape_str() + " vs " +
                     b.shape_str());
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = a.data()[i] * b.data()[i];
  if (any_tracked(tape, {&a, &b})) {
    tape->record([a, b, out](Tape& t) {
      const auto& go = t.grad_buf(out);
      if (t.needs(a)) {
        auto& ga = t.grad_buf(a);
        for (std::size_t i = 0; i < go.size(); ++i)
          ga[i] += go[i] * b.data()[i];
      }
      if (t.needs(b)) {
        auto& gb = t.grad_buf(b);
        for (std::size_t i = 0; i < go.size(); ++i)
          gb[i] += go[i] * a.data()[i];
      }
    });
    tape->mark(out);
  }
  return out;
}

Tensor scale(const Tensor& a, double s, Tape* tape) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
  if (any_tracked(tape, {&a})) {
    tape->record([a, out, s](Tape& t) {
      const auto& go = t.grad_buf(out);
      auto& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * s;
    });
    tape->mark(out);
  }
  return out;
}

Tensor gelu(const Tensor& a, Tape* tape) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    const double u = kGeluC * (x + kGeluA * x * x * x);
    out.data()[i] = 0.5 * x * (1.0 + std::tanh(u));
  }
  if (any_tracked(tape, {&a})) {
    tape->record([a, out](Tape& t) {
      const auto& go = t.grad_buf(out);
      auto& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < go.size(); ++i) {
        const double x = a.data()[i];
        const double u = kGeluC * (x + kGeluA * x * x * x);
        const double th = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
        ga[i] += go[i] * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
      }
    });
    tape->mark(out);
  }
  return out;
}

Tensor sigmoid(const Tensor& a, Tape* tape) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
  if (any_tracked(tape, {&a})) {
    tape->record([a, out](Tape& t) {
      const auto& go = t.grad_buf(out);
      auto& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < go.size(); ++i) {
        const double s = out.data()[i];
        ga[i] += go[i] * s * (1.0 - s);
      }
    });
    tape->mark(out);
  }
  return out;
}

Tensor softmax_rows(const Tensor& a, const Tensor* mask, Tape* tape) {
  const std::size_t m = a.rows(), n = a.cols();
  if (mask && mask->shape() != a.shape())
    throw ShapeError("softmax mask shape " + mask->shape_str() +
                     " does not match input " + a.shape_str());
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && mask->at(i, j) == 0.0) continue;
      any = true;
      mx = std::max(mx, a.at(i, j));
    }
    if (!any)
      throw ValueError("softmax_rows: fully masked row " + std::to_string(i));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && mask->at(i, j) == 0.0) continue;
      const double e = std::exp(a.at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && mask->at(i, j) == 0.0)
        out.at(i, j) = 0.0;
      else
        out.at(i, j) /= z;
    }
  }
  if (any_tracked(tape, {&a})) {
    Tensor maskCopy = mask ? *mask : Tensor();
    tape->record([a, out, maskCopy, m, n](Tape& t) {
      const auto& go = t.grad_buf(out);
      auto& ga = t.grad_buf(a);
      const bool masked = maskCopy.defined();
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          dot += go[i * n + j] * out.at(i, j);
        for (std::size_t j = 0; j < n; ++j) {
          if (masked && maskCopy.at(i, j) == 0.0) continue;
          ga[i * n + j] += out.at(i, j) * (go[i * n + j] - dot);
        }
      }
    });
    tape->mark(out);
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps, Tape* tape) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.size() != n || bias.size() != n)
    throw ShapeError("layer_norm: gain/bias length must equal last axis " +
                     std::to_string(n));
  if (eps <= 0.0) throw ValueError("layer_norm: eps must be > 0");
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> inv_sigma(m), xhat(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += x.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (x.at(i, j) - mean) * is;
      xhat[i * n + j] = xh;
      out.at(i, j) = gain.data()[j] * xh + bias.data()[j];
    }
  }
  if (any_tracked(tape, {&x, &gain, &bias})) {
    auto xhat_p = std::make_shared<std::vector<double>>(std::move(xhat));
    auto is_p = std::make_shared<std::vector<double>>(std::move(inv_sigma));
    tape->record([x, gain, bias, out, xhat_p, is_p, m, n](Tape& t) {
      const auto& go = t.grad_buf(out);
      const auto& xh = *xhat_p;
      if (t.needs(gain)) {
        auto& gg = t.grad_buf(gain);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            gg[j] += go[i * n + j] * xh[i * n + j];
      }
      if (t.needs(bias)) {
        auto& gb = t.grad_buf(bias);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
      }
      if (t.needs(x)) {
        auto& gx = t.grad_buf(x);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_dxh = 0.0, mean_dxh_xh = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double dxh = go[i * n + j] * gain.data()[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[i * n + j];
          }
          mean_dxh /= static_cast<double>(n);
          mean_dxh_xh /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            const double dxh = go[i * n + j] * gain.data()[j];
            gx[i * n + j] += (*is_p)[i] * (dxh - mean_dxh -
                                           xh[i * n + j] * mean_dxh_xh);
          }
        }
      }
    });
    tape->mark(out);
  }
  return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids, Tape* tape) {
  const std::size_t v = table.rows(), d = table.cols();
  Tensor out = Tensor::zeros({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
      throw ValueError("embedding: id " + std::to_string(ids[i]) +
                       " out of range [0, " + std::to_string(v) + ")");
    const double* row = table.data().data() + ids[i] * d;
    std::copy(row, row + d, out.data().data() + i * d);
  }
  if (any_tracked(tape, {&table})) {
    tape->record([table, out, ids, d](Tape& t) {
      const auto& go = t.grad_buf(out);
      auto& gt = t.grad_buf(table);
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
          gt[ids[i] * d + j] += go[i * d + j];
    });
    tape->mark(out);
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts, Tape* tape) {
  if (parts.empty()) throw ShapeError("concat_rows: empty input");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n)
      throw ShapeError("concat_rows: column mismatch " + p.shape_str());
    m += p.rows();
  }
  Tensor out = Tensor::zeros({m, n});
  std::size_t r = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(),
              out.data().begin() + r * n);
    r += p.rows();
  }
  bool tracked = false;
  if (tape)
    for (const auto& p : parts)
      if (track(p, tape)) tracked = true;
  if (tracked) {
    tape->record([parts, out, n](Tape& t) {
      const auto& go = t.grad_buf(out);
      std::size_t r = 0;
      for (const auto& p : parts) {
        if (t.needs(p)) {
          auto& gp = t.grad_buf(p);
          for (std::size_t i = 0; i < gp.size(); ++i)
            gp[i] += go[r * n + i];
        }
        r += p.rows();
      }
    });
    tape->mark(out);
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts, Tape* tape) {
  if (parts.empty()) throw ShapeError("concat_cols: empty input");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m)
      throw ShapeError("concat_cols: row mismatch " + p.shape_str());
    n += p.cols();
  }
  Tensor out = Tensor::zeros({m, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy(p.data().begin() + i * pc, p.data().begin() + (i + 1) * pc,
                out.data().begin() + i * n + off);
    off += pc;
  }
  bool tracked = false;
  if (tape)
    for (const auto& p : parts)
      if (track(p, tape)) tracked = true;
  if (tracked) {
    tape->record([parts, out, m, n](Tape& t) {
      const auto& go = t.grad_buf(out);
      std::size_t off = 0;
      for (const auto& p : parts) {
        const std::size_t pc = p.cols();
        if (t.needs(p)) {
          auto& gp = t.grad_buf(p);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pc; ++j)
              gp[i * pc + j] += go[i * n + off + j];
        }
        off += pc;
      }
    });
    tape->mark(out);
  }
  return out;
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t len,
                  Tape* tape) {
  const std::size_t n = a.cols();
  if (start + len > a.rows())
    throw ShapeError("slice_rows out of range on " + a.shape_str());
  Tensor out = Tensor::zeros({len, n});
  std::copy(a.data().begin() + start * n, a.data().begin() + (start + len) * n,
            out.data().begin());
  if (any_tracked(tape, {&a})) {
    tape->record([a, out, start, len, n](Tape& t) {
      const auto& go = t.grad_buf(out);
      auto& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < len * n; ++i) ga[start * n + i] += go[i];
    });
    tape->mark(out);
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len,
                  Tape* tape) {
  const std::size_t m = a.rows(), n = a.cols();
  if (start + len > n)
    throw ShapeError("slice_cols out of range on " + a.shape_str());
  Tensor out = Tensor::zeros({m, len});
  for (std::size_t i = 0; i < m; ++i)
    std::copy(a.data().begin() + i * n + start,
              a.data().begin() + i * n + start + len,
              out.data().begin() + i * len);
  if (any_tracked(tape, {&a})) {
    tape->record([a, out, start, len, m, n](Tape& t) {
      const auto& go = t.grad_buf(out);
      auto& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < len; ++j)
          ga[i * n + start + j] += go[i * len + j];
    });
    tape->mark(out);
  }
  return out;
}

Tensor sum(const Tensor& a, Tape* tape) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = Tensor::from({1}, {s});
  if (any_tracked(tape, {&a})) {
    tape->record([a, out](Tape& t) {
      const double go = t.grad_buf(out)[0];
      auto& ga = t.grad_buf(a);
      for (auto& g : ga) g += go;
    });
    tape->mark(out);
  }
  return out;
}

Tensor bce_with_logits(const Tensor& logit, double target, Tape* tape) {
  if (logit.size() != 1)
    throw ShapeError("bce_with_logits expects a scalar logit, got " +
                     logit.shape_str());
  const double z = logit.data()[0];
  const double loss =
      std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
  Tensor out = Tensor::from({1}, {loss});
  if (any_tracked(tape, {&logit})) {
    tape->record([logit, out, target](Tape& t) {
      const double go = t.grad_buf(out)[0];
      const double s = 1.0 / (1.0 + std::exp(-logit.data()[0]));
      t.grad_buf(logit)[0] += go * (s - target);
    });
    tape->mark(out);
  }
  return out;
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng, Tape* tape) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ValueError("dropout rate must be < 1");
  const double keep = 1.0 - rate;
  std::bernoulli_distribution dist(keep);
  auto mask = std::make_shared<std::vector<double>>(a.size());
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double m = dist(rng) ? 1.0 / keep : 0.0;
    (*mask)[i] = m;
    out.data()[i] = a.data()[i] * m;
  }
  if (any_tracked(tape, {&a})) {
    tape->record([a, out, mask](Tape& t) {
      const auto& go = t.grad_buf(out);
      auto& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (*mask)[i];
    });
    tape->mark(out);
  }
  return out;
}

double finite_difference_check(
    const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x, double h) {
  if (h <= 0.0) throw ValueError("finite_difference_check: h must be > 0");
  Tape tape;
  x.set_requires_grad(true);
  Tensor y = f(tape, x);
  if (y.size() != 1)
    throw ShapeError("finite_difference_check: f must be scalar-valued");
  if (!std::isfinite(y.item()))
    throw ValueError("finite_difference_check: f(x) is not finite");
  tape.backward(y);
  const std::vector<double>* ga = tape.find_grad(x);
  std::vector<double> analytic =
      ga ? *ga : std::vector<double>(x.size(), 0.0);

  double max_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    Tape t1;
    const double fp = f(t1, x).item();
    x.data()[i] = orig - h;
    Tape t2;
    const double fm = f(t2, x).item();
    x.data()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw ValueError("finite_difference_check: perturbed f(x) not finite");
    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace chunkcheck
