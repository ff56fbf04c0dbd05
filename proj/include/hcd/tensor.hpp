#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcd {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Non-finite values or numerically impossible states (e.g. tr(K^2) <= 0).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

struct TensorData {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // sized lazily on first accumulation

  void accumulate(std::size_t i, double g) {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    grad[i] += g;
  }
};

// Dense f64 tensor handle. Values are immutable once an op has consumed the
// tensor; only grad buffers mutate during backward.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  Tensor& requires_grad_(bool on = true) {
    data_->requires_grad = on;
    return *this;
  }

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::size_t dim() const { return data_->shape.size(); }
  std::size_t numel() const { return data_->values.size(); }
  std::size_t extent(std::size_t axis) const { return data_->shape.at(axis); }

  bool requires_grad() const { return data_->requires_grad; }

  const std::vector<double>& values() const { return data_->values; }
  double at(std::size_t flat) const { return data_->values[flat]; }
  double operator()(std::size_t i) const { return data_->values[i]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_->values[i * data_->shape[1] + j];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const;
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const;

  // scalar tensors only
  double value() const;

  // in-place mutation for builders, optimizers and tests; never call on a
  // tensor already consumed by a recorded op
  std::vector<double>& mut_values() { return data_->values; }

  bool has_grad() const { return !data_->grad.empty(); }
  const std::vector<double>& grad() const;
  double grad_at(std::size_t flat) const { return grad()[flat]; }
  void zero_grad() { data_->grad.clear(); }

  // copy of the values with no grad tracking
  Tensor detach() const;
  // deep copy (fresh leaf, same requires_grad flag, no grad)
  Tensor clone() const;

  bool all_finite() const;

  std::shared_ptr<TensorData> data_;
};

// Ordered record of primitive ops for one forward pass. backward() replays
// the record in exact reverse order, accumulating into grad buffers.
class Tape {
 public:
  void record(std::function<void()> step) { nodes_.push_back(std::move(step)); }
  void backward(const Tensor& loss);
  void clear() { nodes_.clear(); }
  std::size_t node_count() const { return nodes_.size(); }

  static Tape* active() { return active_; }

 private:
  std::vector<std::function<void()>> nodes_;
  static thread_local Tape* active_;
  friend struct TapeScope;
};

// RAII activation: ops record onto the innermost active tape. No tape active
// means pure forward evaluation.
struct TapeScope {
  explicit TapeScope(Tape& t) : prev_(Tape::active_) { Tape::active_ = &t; }
  ~TapeScope() { Tape::active_ = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

}  // namespace hcd
