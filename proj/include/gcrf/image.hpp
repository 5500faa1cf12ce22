#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gcrf {

/// Dense H x W x C buffer of doubles, row-major with channels innermost.
/// Used for guide images (C=3), score maps (C=L) and intermediate filter
/// statistics alike.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : h_(height), w_(width), c_(channels) {
    if (height <= 0 || width <= 0 || channels <= 0)
      throw std::invalid_argument("empty tensor");
    data_.assign(static_cast<size_t>(height) * width * channels, fill);
  }

  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }
  int pixels() const { return h_ * w_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) {
    return data_[(static_cast<size_t>(y) * w_ + x) * c_ + c];
  }
  double at(int y, int x, int c) const {
    return data_[(static_cast<size_t>(y) * w_ + x) * c_ + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Image& o) const {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

  /// (H*W) x C view, one pixel per row.
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mat() {
    return {data_.data(), h_ * static_cast<Eigen::Index>(w_), c_};
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mat() const {
    return {data_.data(), h_ * static_cast<Eigen::Index>(w_), c_};
  }

  /// Flat view over all entries.
  Eigen::Map<Eigen::ArrayXd> array() { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }
  Eigen::Map<const Eigen::ArrayXd> array() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

 private:
  int h_ = 0, w_ = 0, c_ = 0;
  std::vector<double> data_;
};

/// Integer label map (row-major), 255 = ignore.
struct LabelMap {
  int height = 0, width = 0;
  std::vector<uint8_t> data;

  LabelMap() = default;
  LabelMap(int h, int w, uint8_t fill = 0) : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}
  uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
};

enum class ElemOp { Add, Sub, Mul };

/// Windowed mean over the clipped (2r+1)^2 square, O(1) per pixel via
/// integral images. Divisors are true clipped-window pixel counts.
Image box_filter(const Image& src, int radius);

/// Per-pixel clipped-window pixel count for the given radius.
Image window_counts(int height, int width, int radius);

/// Bilinear resampling with half-pixel center alignment. Identity (bitwise)
/// when the output size equals the input size.
Image bilinear_resize(const Image& src, int out_h, int out_w);

Image elementwise(const Image& a, const Image& b, ElemOp op);

/// Throws if any entry is non-finite.
void check_finite(const Image& img, const char* what);

}  // namespace gcrf
