#include "tempattn/tensor.hpp"

#include <cstdlib>
#include <thread>

namespace tempattn {

namespace {
thread_local Tape* g_active_tape = nullptr;
thread_local bool g_grad_enabled = true;
}  // namespace

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = ArrayX::Zero(shape_numel(t.impl_->shape));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  t.data().setConstant(value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> values, bool requires_grad) {
  if (shape_numel(shape) != static_cast<Index>(values.size())) {
    throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                     " values for shape " + shape_to_string(shape));
  }
  Tensor t = zeros(std::move(shape), requires_grad);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = values[static_cast<size_t>(i)];
  return t;
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

ArrayX& Tensor::grad() const {
  if (impl_->grad.size() != impl_->data.size()) {
    impl_->grad = ArrayX::Zero(impl_->data.size());
  }
  return impl_->grad;
}

void Tensor::zero_grad() const {
  if (impl_->grad.size() == impl_->data.size()) impl_->grad.setZero();
}

void Tensor::set_requires_grad(bool v) const { impl_->requires_grad = v; }

Scalar Tensor::value() const {
  if (size() != 1) {
    throw ShapeError("Tensor::value on non-scalar tensor of shape " + shape_to_string(shape()));
  }
  return impl_->data[0];
}

Tensor Tensor::detach() const {
  Tensor t = zeros(impl_->shape, false);
  t.data() = impl_->data;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t = zeros(impl_->shape, impl_->requires_grad);
  t.data() = impl_->data;
  return t;
}

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(Tensor root) {
  if (root.size() != 1) {
    throw ShapeError("Tape::backward root must be a single-element tensor, got " +
                     shape_to_string(root.shape()));
  }
  root.grad().setConstant(1.0);
  for (auto it = adjoints_.rbegin(); it != adjoints_.rend(); ++it) (*it)();
}

bool recording(const Tensor& a) {
  return g_active_tape != nullptr && g_grad_enabled && a.requires_grad();
}

bool recording(const Tensor& a, const Tensor& b) {
  return g_active_tape != nullptr && g_grad_enabled && (a.requires_grad() || b.requires_grad());
}

bool recording(const Tensor& a, const Tensor& b, const Tensor& c) {
  return g_active_tape != nullptr && g_grad_enabled &&
         (a.requires_grad() || b.requires_grad() || c.requires_grad());
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

int worker_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("TEMPATTN_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("TEMPATTN_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    if (v < n) n = static_cast<int>(v);
  }
  return n;
}

}  // namespace tempattn
