#include "eaf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace eaf {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw std::invalid_argument("tensor: zero extent in shape");
    n *= e;
  }
  return n;
}

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string("tensor: non-finite value after op '") +
                               op + "'");
    }
  }
}

std::pair<std::size_t, std::size_t> as_2d(const Tensor& t) {
  const auto& s = t.shape();
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  throw std::invalid_argument("tensor: op requires rank <= 2");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data,
               bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (shape_size(shape) != data.size()) {
    throw std::invalid_argument("tensor: shape does not match data length");
  }
  check_finite(data, "construct");
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::vector<double> d(shape_size(shape), 0.0);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value,
                    bool requires_grad) {
  std::vector<double> d(shape_size(shape), value);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const { return as_2d(*this).first; }
std::size_t Tensor::cols() const { return as_2d(*this).second; }

double Tensor::value() const {
  if (size() != 1) throw std::invalid_argument("tensor: value() on non-scalar");
  return impl_->data[0];
}

double Tensor::operator()(std::size_t i, std::size_t j) const {
  auto [r, c] = as_2d(*this);
  if (i >= r || j >= c) throw std::out_of_range("tensor: index out of range");
  return impl_->data[i * c + j];
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(size(), 0.0);
  return impl_->grad;
}

// ---------------------------------------------------------------------------

Tensor Tape::make(std::vector<std::size_t> shape, std::vector<double> data,
                  bool requires_grad) {
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

void Tape::record(bool requires_grad, std::function<void()> fn) {
  if (requires_grad) nodes_.push_back({std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw std::runtime_error("tape: backward already ran");
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("tape: loss must be a scalar tensor");
  }
  consumed_ = true;
  loss.impl()->ensure_grad();
  loss.impl()->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->grad_fn();
  }
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  auto [m, k] = as_2d(a);
  auto [k2, n] = as_2d(b);
  if (k != k2) throw std::invalid_argument("matmul: inner dimensions disagree");
  std::vector<double> out(m * n, 0.0);
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * bd[p * n + j];
    }
  }
  check_finite(out, "matmul");
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor o = make({m, n}, std::move(out), rg);
  record(rg, [ai = a.impl_ptr(), bi = b.impl_ptr(), oi = o.impl_ptr(), m, k, n] {
    if (oi->grad.empty()) return;
    const auto& og = oi->grad;
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = og[i * n + j];
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p)
            ai->grad[i * k + p] += g * bi->data[p * n + j];
        }
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = ai->data[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j)
            bi->grad[p * n + j] += av * og[i * n + j];
        }
    }
  });
  return o;
}

Tensor Tape::transpose(const Tensor& a) {
  auto [m, n] = as_2d(a);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  bool rg = a.requires_grad();
  Tensor o = make({n, m}, std::move(out), rg);
  record(rg, [ai = a.impl_ptr(), oi = o.impl_ptr(), m, n] {
    if (oi->grad.empty() || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        ai->grad[i * n + j] += oi->grad[j * m + i];
  });
  return o;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.size() == 1, b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape())
    throw std::invalid_argument("add: shape mismatch");
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a.at(a_scalar ? 0 : i) + b.at(b_scalar ? 0 : i);
  check_finite(out, "add");
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor o = make(a_scalar ? b.shape() : a.shape(), std::move(out), rg);
  record(rg, [ai = a.impl_ptr(), bi = b.impl_ptr(), oi = o.impl_ptr(), n,
              a_scalar, b_scalar] {
    if (oi->grad.empty()) return;
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) ai->grad[a_scalar ? 0 : i] += oi->grad[i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) bi->grad[b_scalar ? 0 : i] += oi->grad[i];
    }
  });
  return o;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.size() == 1, b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape())
    throw std::invalid_argument("mul: shape mismatch");
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a.at(a_scalar ? 0 : i) * b.at(b_scalar ? 0 : i);
  check_finite(out, "mul");
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor o = make(a_scalar ? b.shape() : a.shape(), std::move(out), rg);
  record(rg, [ai = a.impl_ptr(), bi = b.impl_ptr(), oi = o.impl_ptr(), n,
              a_scalar, b_scalar] {
    if (oi->grad.empty()) return;
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        ai->grad[a_scalar ? 0 : i] += oi->grad[i] * bi->data[b_scalar ? 0 : i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        bi->grad[b_scalar ? 0 : i] += oi->grad[i] * ai->data[a_scalar ? 0 : i];
    }
  });
  return o;
}

Tensor Tape::unary(const Tensor& a, const char* name,
                   const std::function<double(double)>& f,
                   const std::function<double(double, double)>& df) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a.at(i));
  check_finite(out, name);
  bool rg = a.requires_grad();
  Tensor o = make(a.shape(), std::move(out), rg);
  record(rg, [ai = a.impl_ptr(), oi = o.impl_ptr(), df] {
    if (oi->grad.empty() || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < ai->data.size(); ++i)
      ai->grad[i] += oi->grad[i] * df(ai->data[i], oi->data[i]);
  });
  return o;
}

Tensor Tape::scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return x * s; },
               [s](double, double) { return s; });
}

Tensor Tape::add_scalar(const Tensor& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; },
               [](double, double) { return 1.0; });
}

Tensor Tape::neg(const Tensor& a) {
  return unary(a, "neg", [](double x) { return -x; },
               [](double, double) { return -1.0; });
}

Tensor Tape::exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor Tape::log(const Tensor& a) {
  constexpr double kClamp = 1e-12;
  return unary(a, "log",
               [kClamp](double x) { return std::log(std::max(x, kClamp)); },
               [kClamp](double x, double) { return 1.0 / std::max(x, kClamp); });
}

Tensor Tape::power(const Tensor& a, double e) {
  return unary(a, "power", [e](double x) { return std::pow(x, e); },
               [e](double x, double) { return e * std::pow(x, e - 1.0); });
}

Tensor Tape::sigmoid(const Tensor& a) {
  return unary(a, "sigmoid",
               [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor Tape::relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor Tape::softmax_rows(const Tensor& a) {
  auto [m, n] = as_2d(a);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = a.data()[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a.data()[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(a.data()[i * n + j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  check_finite(out, "softmax_rows");
  bool rg = a.requires_grad();
  Tensor o = make(a.shape(), std::move(out), rg);
  record(rg, [ai = a.impl_ptr(), oi = o.impl_ptr(), m, n] {
    if (oi->grad.empty() || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        dot += oi->grad[i * n + j] * oi->data[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        ai->grad[i * n + j] +=
            oi->data[i * n + j] * (oi->grad[i * n + j] - dot);
    }
  });
  return o;
}

Tensor Tape::sum(const Tensor& a) {
  double s = std::accumulate(a.data().begin(), a.data().end(), 0.0);
  check_finite({s}, "sum");
  bool rg = a.requires_grad();
  Tensor o = make({1}, {s}, rg);
  record(rg, [ai = a.impl_ptr(), oi = o.impl_ptr()] {
    if (oi->grad.empty() || !ai->requires_grad) return;
    ai->ensure_grad();
    for (double& g : ai->grad) g += oi->grad[0];
  });
  return o;
}

Tensor Tape::mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor Tape::add_rowvec(const Tensor& a, const Tensor& v) {
  auto [m, n] = as_2d(a);
  if (v.size() != n) throw std::invalid_argument("add_rowvec: width mismatch");
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = a.data()[i * n + j] + v.at(j);
  check_finite(out, "add_rowvec");
  bool rg = a.requires_grad() || v.requires_grad();
  Tensor o = make(a.shape(), std::move(out), rg);
  record(rg, [ai = a.impl_ptr(), vi = v.impl_ptr(), oi = o.impl_ptr(), m, n] {
    if (oi->grad.empty()) return;
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < m * n; ++i) ai->grad[i] += oi->grad[i];
    }
    if (vi->requires_grad) {
      vi->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) vi->grad[j] += oi->grad[i * n + j];
    }
  });
  return o;
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  std::size_t cols = as_2d(parts[0]).second;
  std::size_t rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    auto [r, c] = as_2d(p);
    if (c != cols) throw std::invalid_argument("concat_rows: width mismatch");
    rows += r;
    rg = rg || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts)
    out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor o = make({rows, cols}, std::move(out), rg);
  std::vector<std::shared_ptr<detail::TensorImpl>> impls;
  for (const auto& p : parts) impls.push_back(p.impl_ptr());
  record(rg, [impls, oi = o.impl_ptr()] {
    if (oi->grad.empty()) return;
    std::size_t off = 0;
    for (const auto& pi : impls) {
      if (pi->requires_grad) {
        pi->ensure_grad();
        for (std::size_t i = 0; i < pi->data.size(); ++i)
          pi->grad[i] += oi->grad[off + i];
      }
      off += pi->data.size();
    }
  });
  return o;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  std::size_t rows = as_2d(parts[0]).first;
  std::size_t cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    auto [r, c] = as_2d(p);
    if (r != rows) throw std::invalid_argument("concat_cols: height mismatch");
    cols += c;
    rg = rg || p.requires_grad();
  }
  std::vector<double> out(rows * cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::size_t c = as_2d(p).second;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < c; ++j)
        out[i * cols + off + j] = p.data()[i * c + j];
    off += c;
  }
  Tensor o = make({rows, cols}, std::move(out), rg);
  std::vector<std::shared_ptr<detail::TensorImpl>> impls;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    impls.push_back(p.impl_ptr());
    widths.push_back(as_2d(p).second);
  }
  record(rg, [impls, widths, oi = o.impl_ptr(), rows, cols] {
    if (oi->grad.empty()) return;
    std::size_t off = 0;
    for (std::size_t k = 0; k < impls.size(); ++k) {
      const auto& pi = impls[k];
      const std::size_t c = widths[k];
      if (pi->requires_grad) {
        pi->ensure_grad();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < c; ++j)
            pi->grad[i * c + j] += oi->grad[i * cols + off + j];
      }
      off += c;
    }
  });
  return o;
}

Tensor Tape::slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  auto [m, n] = as_2d(a);
  if (c0 >= c1 || c1 > n) throw std::invalid_argument("slice_cols: bad range");
  const std::size_t w = c1 - c0;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out[i * w + j] = a.data()[i * n + c0 + j];
  bool rg = a.requires_grad();
  Tensor o = make({m, w}, std::move(out), rg);
  record(rg, [ai = a.impl_ptr(), oi = o.impl_ptr(), m, n, c0, w] {
    if (oi->grad.empty() || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j)
        ai->grad[i * n + c0 + j] += oi->grad[i * w + j];
  });
  return o;
}

Tensor Tape::gather_rows(const Tensor& a,
                         const std::vector<std::ptrdiff_t>& index) {
  auto [m, n] = as_2d(a);
  std::vector<double> out(index.size() * n, 0.0);
  for (std::size_t r = 0; r < index.size(); ++r) {
    const std::ptrdiff_t src = index[r];
    if (src < 0) continue;
    if (static_cast<std::size_t>(src) >= m)
      throw std::invalid_argument("gather_rows: index out of range");
    for (std::size_t j = 0; j < n; ++j)
      out[r * n + j] = a.data()[static_cast<std::size_t>(src) * n + j];
  }
  bool rg = a.requires_grad();
  Tensor o = make({index.size(), n}, std::move(out), rg);
  record(rg, [ai = a.impl_ptr(), oi = o.impl_ptr(), index, n] {
    if (oi->grad.empty() || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t r = 0; r < index.size(); ++r) {
      const std::ptrdiff_t src = index[r];
      if (src < 0) continue;
      for (std::size_t j = 0; j < n; ++j)
        ai->grad[static_cast<std::size_t>(src) * n + j] += oi->grad[r * n + j];
    }
  });
  return o;
}

Tensor Tape::reshape(const Tensor& a, std::vector<std::size_t> shape) {
  if (shape_size(shape) != a.size())
    throw std::invalid_argument("reshape: element count mismatch");
  bool rg = a.requires_grad();
  Tensor o = make(std::move(shape), a.data(), rg);
  record(rg, [ai = a.impl_ptr(), oi = o.impl_ptr()] {
    if (oi->grad.empty() || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < ai->data.size(); ++i) ai->grad[i] += oi->grad[i];
  });
  return o;
}

Tensor Tape::pool_patches(const Tensor& img, std::size_t h, std::size_t w,
                          std::size_t p) {
  auto [rows, c] = as_2d(img);
  if (rows != h * w) throw std::invalid_argument("pool_patches: row count != h*w");
  if (p == 0 || h % p != 0 || w % p != 0)
    throw std::invalid_argument("pool_patches: image size not divisible by patch");
  const std::size_t oh = h / p, ow = w / p;
  const double inv = 1.0 / static_cast<double>(p * p);
  std::vector<double> out(oh * ow * c, 0.0);
  for (std::size_t v = 0; v < h; ++v)
    for (std::size_t u = 0; u < w; ++u) {
      const std::size_t dst = ((v / p) * ow + (u / p)) * c;
      const std::size_t src = (v * w + u) * c;
      for (std::size_t k = 0; k < c; ++k) out[dst + k] += img.data()[src + k] * inv;
    }
  check_finite(out, "pool_patches");
  bool rg = img.requires_grad();
  Tensor o = make({oh * ow, c}, std::move(out), rg);
  record(rg, [ii = img.impl_ptr(), oi = o.impl_ptr(), h, w, p, ow, c, inv] {
    if (oi->grad.empty() || !ii->requires_grad) return;
    ii->ensure_grad();
    for (std::size_t v = 0; v < h; ++v)
      for (std::size_t u = 0; u < w; ++u) {
        const std::size_t dst = ((v / p) * ow + (u / p)) * c;
        const std::size_t src = (v * w + u) * c;
        for (std::size_t k = 0; k < c; ++k)
          ii->grad[src + k] += oi->grad[dst + k] * inv;
      }
  });
  return o;
}

}  // namespace eaf
