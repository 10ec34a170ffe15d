#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace eaf {

namespace detail {

struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first accumulation

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major tensor of 64-bit floats. Value-semantic handle; the
/// underlying buffer is shared so tapes can record gradient closures
/// against it. Data is treated as immutable once an op has consumed the
/// tensor; only grad accumulates.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data,
         bool requires_grad = false);

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t rank() const { return impl_->shape.size(); }

  // 2-d conveniences (rank-1 tensors count as a single row)
  std::size_t rows() const;
  std::size_t cols() const;

  const std::vector<double>& data() const { return impl_->data; }
  std::vector<double>& mutable_data() { return impl_->data; }

  double value() const;  // scalar tensors only
  double operator()(std::size_t i, std::size_t j) const;
  double& at(std::size_t flat) { return impl_->data[flat]; }
  double at(std::size_t flat) const { return impl_->data[flat]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  /// Accumulated gradient; zeros if backward never reached this tensor.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  detail::TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<detail::TensorImpl> impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Records executed ops and replays them in exact reverse order on
/// backward(). Single-threaded; one backward per tape.
class Tape {
 public:
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);

  // Elementwise. add/mul accept a scalar (size-1) operand on either side.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double s);
  Tensor add_scalar(const Tensor& a, double s);
  Tensor neg(const Tensor& a);
  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);  // input clamped at 1e-12
  Tensor power(const Tensor& a, double exponent);
  Tensor sigmoid(const Tensor& a);
  Tensor relu(const Tensor& a);

  Tensor softmax_rows(const Tensor& a);
  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);

  /// a: m x n, v: 1 x n (or flat n); adds v to every row of a.
  Tensor add_rowvec(const Tensor& a, const Tensor& v);

  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor concat_cols(const std::vector<Tensor>& parts);
  Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);

  /// out[r] = a[index[r]]; index -1 yields a zero row. Backward scatter-adds.
  Tensor gather_rows(const Tensor& a, const std::vector<std::ptrdiff_t>& index);

  /// Same data, new shape (sizes must agree). Gradient passes through.
  Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);

  /// img: (h*w) x c with rows in v*w+u order. Non-overlapping p x p patch
  /// average pooling to (h/p * w/p) x c.
  Tensor pool_patches(const Tensor& img, std::size_t h, std::size_t w,
                      std::size_t p);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Errors on
  /// non-scalar loss and on a tape that already ran backward.
  void backward(const Tensor& loss);

  std::size_t num_ops() const { return nodes_.size(); }

 private:
  struct Node {
    std::function<void()> grad_fn;
  };

  Tensor make(std::vector<std::size_t> shape, std::vector<double> data,
              bool requires_grad);
  void record(bool requires_grad, std::function<void()> fn);

  Tensor unary(const Tensor& a, const char* name,
               const std::function<double(double)>& f,
               const std::function<double(double, double)>& df);  // df(x, y)

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace eaf
