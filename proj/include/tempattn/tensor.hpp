#pragma once

#include "tempattn/types.hpp"

#include <functional>
#include <initializer_list>
#include <memory>

namespace tempattn {

using Shape = std::vector<Index>;

// Value-semantics handle onto a shared dense buffer. Rank is the length of
// `shape`; data is stored flat in row-major order (last axis fastest). Feature
// maps use the rank-3 layout H x W x C, so a (H*W) x C matrix view aliases the
// buffer directly.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Scalar> values, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  Index dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  Index size() const { return impl_->data.size(); }

  // A Tensor is a handle: const-ness of the handle does not protect the
  // shared buffer, exactly like a shared_ptr. Adjoint closures rely on this.
  ArrayX& data() const { return impl_->data; }

  // Gradient buffer; allocated lazily as zeros on first access.
  ArrayX& grad() const;
  bool has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }
  void zero_grad() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool v = true) const;

  // Convenience element access (flat index / 2-D / 3-D).
  Scalar& at(Index i) const { return impl_->data[i]; }
  Scalar& at2(Index r, Index c) const { return impl_->data[r * dim(1) + c]; }
  Scalar& at3(Index i, Index j, Index k) const {
    return impl_->data[(i * dim(1) + j) * dim(2) + k];
  }

  // Value of a single-element tensor.
  Scalar value() const;

  // Copy of the data with gradient tracking severed.
  Tensor detach() const;
  // Deep copy preserving requires_grad (fresh buffers, no tape linkage).
  Tensor clone() const;

  // Matrix view of a rank-2 tensor (or any tensor reinterpreted as rows x cols).
  MapMatrix as_matrix(Index rows, Index cols) const {
    return MapMatrix(impl_->data.data(), rows, cols);
  }
  MapMatrix grad_matrix(Index rows, Index cols) const {
    return MapMatrix(grad().data(), rows, cols);
  }

  bool same_shape(const Tensor& other) const { return impl_->shape == other.impl_->shape; }

  // Identity of the underlying buffer (used by parameter registries).
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    ArrayX data;
    ArrayX grad;  // empty until first use
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

Index shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Ordered record of executed ops. Each entry is an adjoint closure that reads
// the output gradient and accumulates into the input gradients. Because ops
// are appended in execution order, replaying the entries strictly in reverse
// is a valid topological order for reverse-mode differentiation.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> adjoint) { adjoints_.push_back(std::move(adjoint)); }
  size_t size() const { return adjoints_.size(); }

  // Seeds d(root)/d(root) = 1 and replays all adjoints in reverse order.
  // The root must be a single-element tensor.
  void backward(Tensor root);

  static Tape* active();

 private:
  std::vector<std::function<void()>> adjoints_;
  Tape* prev_ = nullptr;
};

// True when an op invoked now should record its adjoint.
bool recording(const Tensor& a);
bool recording(const Tensor& a, const Tensor& b);
bool recording(const Tensor& a, const Tensor& b, const Tensor& c);

// Temporarily disables recording even inside an active tape scope (used for
// forward-only evaluation such as validation passes and benchmarks).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();

 private:
  bool prev_;
};

}  // namespace tempattn
