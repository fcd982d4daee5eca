#include "liftpool/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "liftpool/errors.hpp"

namespace liftpool {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::signal(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<std::vector<double>> copy;
  for (const auto& r : rows) copy.emplace_back(r);
  return signal(copy);
}

Tensor Tensor::signal(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) throw ShapeError("signal needs at least one channel and one frame");
  const std::size_t length = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * length);
  for (const auto& r : rows) {
    if (r.size() != length) throw ShapeError("signal rows have different lengths");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({1, rows.size(), length}, std::move(data));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for shape " + shape_string(shape_));
  return shape_[axis];
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t t) {
  return data_[(n * shape_[1] + c) * shape_[2] + t];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t t) const {
  return data_[(n * shape_[1] + c) * shape_[2] + t];
}

std::span<const double> Tensor::row(std::size_t n, std::size_t c) const {
  return std::span<const double>(data_).subspan((n * shape_[1] + c) * shape_[2], shape_[2]);
}

std::span<double> Tensor::row(std::size_t n, std::size_t c) {
  return std::span<double>(data_).subspan((n * shape_[1] + c) * shape_[2], shape_[2]);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

void require_signal(const Tensor& x, const char* what) {
  if (x.rank() != 3) throw ShapeError(std::string(what) + ": expected [batch, channels, time], got " +
                                      shape_string(x.shape()));
  if (x.batch() == 0 || x.channels() == 0 || x.length() == 0) {
    throw ShapeError(std::string(what) + ": empty signal " + shape_string(x.shape()));
  }
  if (!x.all_finite()) throw NumericalError(std::string(what) + ": non-finite input");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace liftpool
