#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace chunkcheck {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until a backward pass fills it
};

// Value-semantic handle over shared storage. All ops view a tensor as a 2-D
// array: the last axis is the column axis, everything before it is flattened
// into rows. A 1-D tensor of length n behaves as 1 x n.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor randn(std::vector<std::size_t> shape, double stddev,
                      std::mt19937_64& rng, bool requires_grad = false);

  bool defined() const { return d_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return d_->shape; }
  std::size_t size() const { return d_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const { return d_->shape.back(); }

  std::vector<double>& data() { return d_->data; }
  const std::vector<double>& data() const { return d_->data; }
  double& at(std::size_t r, std::size_t c) { return d_->data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return d_->data[r * cols() + c]; }
  double item() const;  // scalar tensors only

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool v) { d_->requires_grad = v; }
  std::vector<double>& grad() { return d_->grad; }
  const std::vector<double>& grad() const { return d_->grad; }
  void zero_grad();

  TensorData* raw() const { return d_.get(); }
  const std::shared_ptr<TensorData>& ptr() const { return d_; }

  bool all_finite() const;
  std::string shape_str() const;

 private:
  std::shared_ptr<TensorData> d_;
};

// Reverse-mode tape. Forward ops append nodes in evaluation order; backward
// replays them in reverse, accumulating cotangents in tape-local buffers so
// several tapes can coexist over the same weight tensors (one tape per
// example). accumulate_leaf_grads() then folds leaf cotangents into
// TensorData::grad; callers control the fold order for determinism.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }
  std::size_t num_nodes() const { return nodes_.size(); }

  // Cotangent buffer for t, created zero-filled on first touch.
  std::vector<double>& grad_buf(const Tensor& t);
  bool has_grad(const Tensor& t) const;
  const std::vector<double>* find_grad(const Tensor& t) const;

  // Track leaves so accumulate_leaf_grads knows what to fold.
  void watch(const Tensor& t);

  // Ops mark their outputs when any input needs gradients; needs() is how
  // later ops and backward rules decide whether to propagate.
  void mark(const Tensor& t) { tracked_.insert(t.raw()); }
  bool needs(const Tensor& t) const {
    return t.requires_grad() || tracked_.count(t.raw()) > 0;
  }

  // Seeds d(loss)/d(loss) = 1 and replays the tape. loss must be scalar.
  void backward(const Tensor& loss);
  void accumulate_leaf_grads();

 private:
  std::vector<BackwardFn> nodes_;
  std::unordered_map<TensorData*, std::vector<double>> grads_;
  std::unordered_set<TensorData*> tracked_;
  std::vector<Tensor> leaves_;
};

// --- forward ops (tape == nullptr means inference, nothing recorded) ---

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape);
// a[m x k] * b[n x k]^T -> [m x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b, Tape* tape);
Tensor add(const Tensor& a, const Tensor& b, Tape* tape);
// a[m x n] + row vector b[n], broadcast over rows
Tensor add_rowvec(const Tensor& a, const Tensor& b, Tape* tape);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape);
Tensor scale(const Tensor& a, double s, Tape* tape);
Tensor gelu(const Tensor& a, Tape* tape);  // tanh approximation
Tensor sigmoid(const Tensor& a, Tape* tape);
// Row-wise softmax; mask (0/1, same shape) zeroes masked positions exactly.
Tensor softmax_rows(const Tensor& a, const Tensor* mask, Tape* tape);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps, Tape* tape);
Tensor embedding(const Tensor& table, const std::vector<int>& ids, Tape* tape);
Tensor concat_rows(const std::vector<Tensor>& parts, Tape* tape);
Tensor concat_cols(const std::vector<Tensor>& parts, Tape* tape);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t len, Tape* tape);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len, Tape* tape);
Tensor sum(const Tensor& a, Tape* tape);  // scalar [1]
// Binary cross-entropy with logits; logit scalar, target in {0,1}.
Tensor bce_with_logits(const Tensor& logit, double target, Tape* tape);
// Inverted-dropout; identity when rate == 0.
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng, Tape* tape);

// Max over coordinates of |g_analytic - g_central| / max(1, |g_central|).
// f must evaluate a scalar loss from x, recording on the given tape.
double finite_difference_check(
    const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x, double h);

}  // namespace chunkcheck
