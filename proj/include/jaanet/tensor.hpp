#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>

namespace jaanet {

/// Batch × channels × height × width.
struct Shape {
  int batch = 0;
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(batch) * channels * height * width;
  }
  int plane() const { return height * width; }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.batch) + "x" + std::to_string(s.channels) + "x" +
         std::to_string(s.height) + "x" + std::to_string(s.width);
}

inline std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << to_string(s);
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense NCHW activation array. Each sample is viewable as a
/// channels × (height·width) row-major matrix, which is the layout the
/// convolution GEMMs work on.
template <typename Scalar>
class Tensor {
 public:
  using SampleMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstSampleMap = Eigen::Map<const RowMatrix<Scalar>>;
  using ArrayMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using ConstArrayMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;

  Tensor() = default;
  explicit Tensor(const Shape& shape) : shape_(shape), data_(Vector<Scalar>::Zero(shape.size())) {
    if (shape.batch < 0 || shape.channels < 0 || shape.height < 0 || shape.width < 0)
      throw ShapeError("negative tensor dimension");
  }
  Tensor(int n, int c, int h, int w) : Tensor(Shape{n, c, h, w}) {}

  const Shape& shape() const { return shape_; }
  int batch() const { return shape_.batch; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int plane_size() const { return shape_.plane(); }
  std::size_t size() const { return shape_.size(); }
  bool empty() const { return size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  Scalar operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  SampleMap sample(int n) {
    return SampleMap(data() + offset(n), shape_.channels, shape_.plane());
  }
  ConstSampleMap sample(int n) const {
    return ConstSampleMap(data() + offset(n), shape_.channels, shape_.plane());
  }

  /// One H×W plane viewed as a row-major matrix.
  Eigen::Map<RowMatrix<Scalar>> plane(int n, int c) {
    return {data() + offset(n) + static_cast<std::size_t>(c) * shape_.plane(), shape_.height,
            shape_.width};
  }
  Eigen::Map<const RowMatrix<Scalar>> plane(int n, int c) const {
    return {data() + offset(n) + static_cast<std::size_t>(c) * shape_.plane(), shape_.height,
            shape_.width};
  }

  ArrayMap array() { return ArrayMap(data(), static_cast<Eigen::Index>(size())); }
  ConstArrayMap array() const { return ConstArrayMap(data(), static_cast<Eigen::Index>(size())); }

  Vector<Scalar>& vector() { return data_; }
  const Vector<Scalar>& vector() const { return data_; }

  void set_zero() { data_.setZero(); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.vector() = data_.template cast<Other>();
    return out;
  }

 private:
  std::size_t offset(int n) const {
    return static_cast<std::size_t>(n) * shape_.channels * shape_.plane();
  }
  std::size_t index(int n, int c, int y, int x) const {
    return offset(n) + (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  Shape shape_{};
  Vector<Scalar> data_;
};

template <typename Scalar>
void require_shape(const Tensor<Scalar>& t, const Shape& expected, const char* where) {
  if (t.shape() != expected)
    throw ShapeError(std::string(where) + ": expected " + to_string(expected) + ", got " +
                     to_string(t.shape()));
}

/// Copy a contiguous range of channels [first, first + src.channels()) of dst from src.
template <typename Scalar>
void write_channels(Tensor<Scalar>& dst, const Tensor<Scalar>& src, int first) {
  for (int n = 0; n < src.batch(); ++n)
    dst.sample(n).middleRows(first, src.channels()) = src.sample(n);
}

template <typename Scalar>
Tensor<Scalar> read_channels(const Tensor<Scalar>& src, int first, int count) {
  Tensor<Scalar> out(src.batch(), count, src.height(), src.width());
  for (int n = 0; n < src.batch(); ++n) out.sample(n) = src.sample(n).middleRows(first, count);
  return out;
}

/// Batch × features, flattened row-major by (height, width, channel).
template <typename Scalar>
RowMatrix<Scalar> flatten_hwc(const Tensor<Scalar>& t) {
  RowMatrix<Scalar> out(t.batch(), static_cast<Eigen::Index>(t.channels()) * t.plane_size());
  for (int n = 0; n < t.batch(); ++n) {
    // sample is C × HW; its transpose is HW × C, which row-major flattens to HWC.
    Eigen::Map<RowMatrix<Scalar>>(out.row(n).data(), t.plane_size(), t.channels()) =
        t.sample(n).transpose();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> unflatten_hwc(const RowMatrix<Scalar>& flat, const Shape& shape) {
  Tensor<Scalar> out(shape);
  for (int n = 0; n < shape.batch; ++n)
    out.sample(n) =
        Eigen::Map<const RowMatrix<Scalar>>(flat.row(n).data(), shape.plane(), shape.channels)
            .transpose();
  return out;
}

}  // namespace jaanet
