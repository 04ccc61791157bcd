#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace iconik {

using cfloat = std::complex<float>;
using cdouble = std::complex<double>;

/// Dense row-major 2D array. Rows index y (ky direction), columns index x.
template <class T>
class Array2
{
public:
  Array2() = default;
  Array2(std::size_t rows, std::size_t cols, T fill = T{})
    : rows_(rows)
    , cols_(cols)
    , data_(rows * cols, fill)
  {
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T const &operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T &operator[](std::size_t i) { return data_[i]; }
  T const &operator[](std::size_t i) const { return data_[i]; }

  T *data() { return data_.data(); }
  T const *data() const { return data_.data(); }
  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<T const> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<T> &values() { return data_; }
  std::vector<T> const &values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool same_shape(Array2 const &o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using ComplexImage = Array2<cdouble>;
using RealImage = Array2<double>;

/// One in-plane k-space location in normalized units, [-1, 1] per axis.
struct KPoint
{
  double kx = 0.0;
  double ky = 0.0;
};

/// Network input coordinate (navigator value, kx, ky).
struct Coord3
{
  double nav = 0.0;
  double kx = 0.0;
  double ky = 0.0;
};

RealImage magnitude(ComplexImage const &img);

} // namespace iconik
