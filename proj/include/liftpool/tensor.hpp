#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace liftpool {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles.
//
// Temporal signals use the layout [batch, channels, time]; a single signal
// is stored with batch 1. Convolution weights are [out, in / groups, width]
// and biases are [out].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  // Builds a [1, channels, time] signal from per-channel rows.
  static Tensor signal(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor signal(const std::vector<std::vector<double>>& rows);
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Signal accessors; valid only for rank-3 tensors.
  std::size_t batch() const { return dim(0); }
  std::size_t channels() const { return dim(1); }
  std::size_t length() const { return dim(2); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::size_t n, std::size_t c, std::size_t t);
  double at(std::size_t n, std::size_t c, std::size_t t) const;

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  // Row [c, :] of sample n as a contiguous view.
  std::span<const double> row(std::size_t n, std::size_t c) const;
  std::span<double> row(std::size_t n, std::size_t c);

  bool all_finite() const noexcept;
  double item() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws ShapeError when the tensor is not a finite rank-3 signal.
void require_signal(const Tensor& x, const char* what);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace liftpool
