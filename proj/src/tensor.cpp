#include "hcd/tensor.hpp"

#include <cmath>

namespace hcd {

thread_local Tape* Tape::active_ = nullptr;

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not match value count " +
                     std::to_string(values.size()));
  }
  data_ = std::make_shared<TensorData>();
  data_->shape = std::move(shape);
  data_->values = std::move(values);
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }
Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double v) {
  std::vector<double> vals(shape_numel(shape), v);
  return Tensor(std::move(shape), std::move(vals));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

double Tensor::operator()(std::size_t i, std::size_t j, std::size_t k) const {
  const Shape& s = data_->shape;
  return data_->values[(i * s[1] + j) * s[2] + k];
}

double Tensor::operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
  const Shape& s = data_->shape;
  return data_->values[((i * s[1] + j) * s[2] + k) * s[3] + l];
}

double Tensor::value() const {
  if (numel() != 1) {
    throw ShapeError("value() requires a scalar tensor, got " + shape_str(shape()));
  }
  return data_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  if (data_->grad.empty()) {
    throw ValueError("tensor has no gradient buffer (requires_grad=" +
                     std::string(data_->requires_grad ? "true" : "false") + ")");
  }
  return data_->grad;
}

Tensor Tensor::detach() const {
  return Tensor(data_->shape, data_->values);
}

Tensor Tensor::clone() const {
  Tensor t(data_->shape, data_->values);
  t.data_->requires_grad = data_->requires_grad;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_->values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ValueError("backward on a tensor that is not on the tape");
  }
  loss.data_->accumulate(0, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace hcd
