#include "gcrf/conv2d.hpp"

namespace gcrf {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

// Zero-padded copy, (h+2r) x (w+2r) x c.
std::vector<double> pad_image(const Image& img, int r) {
  const int h = img.height(), w = img.width(), c = img.channels();
  const int wp = w + 2 * r;
  std::vector<double> p(static_cast<size_t>(h + 2 * r) * wp * c, 0.0);
  for (int y = 0; y < h; ++y) {
    const double* src = img.data() + static_cast<size_t>(y) * w * c;
    double* dst = p.data() + (static_cast<size_t>(y + r) * wp + r) * c;
    std::copy(src, src + static_cast<size_t>(w) * c, dst);
  }
  return p;
}

}  // namespace

Conv2D::Conv2D(int ksize, int in_channels, int out_channels)
    : k_(ksize), in_c_(in_channels), out_c_(out_channels) {
  if (ksize < 1 || ksize % 2 == 0)
    throw std::invalid_argument("conv2d: kernel size must be odd and positive");
  weights = Eigen::MatrixXd::Zero(ksize * ksize * in_channels, out_channels);
  bias = Eigen::VectorXd::Zero(out_channels);
}

Image Conv2D::forward(const Image& input) const {
  if (input.channels() != in_c_) throw std::invalid_argument("conv2d: channel mismatch");
  const int h = input.height(), w = input.width();
  const int r = k_ / 2;
  const int wp = w + 2 * r;
  const std::vector<double> padded = pad_image(input, r);

  Image out(h, w, out_c_);
  out.mat().rowwise() = bias.transpose();
  for (int dy = 0; dy < k_; ++dy) {
    for (int dx = 0; dx < k_; ++dx) {
      const auto wblock = weights.middleRows((dy * k_ + dx) * in_c_, in_c_);
      for (int y = 0; y < h; ++y) {
        CMapRM in_row(padded.data() + (static_cast<size_t>(y + dy) * wp + dx) * in_c_, w, in_c_);
        MapRM out_row(out.data() + static_cast<size_t>(y) * w * out_c_, w, out_c_);
        out_row.noalias() += in_row * wblock;
      }
    }
  }
  return out;
}

Image Conv2D::backward(const Image& input, const Image& grad_out,
                       Eigen::MatrixXd& grad_weights, Eigen::VectorXd& grad_bias) const {
  if (input.channels() != in_c_ || grad_out.channels() != out_c_)
    throw std::invalid_argument("conv2d: channel mismatch");
  const int h = input.height(), w = input.width();
  const int r = k_ / 2;
  const int wp = w + 2 * r;
  const std::vector<double> padded = pad_image(input, r);
  std::vector<double> grad_padded(padded.size(), 0.0);

  if (grad_weights.rows() != weights.rows() || grad_weights.cols() != weights.cols())
    grad_weights = Eigen::MatrixXd::Zero(weights.rows(), weights.cols());
  if (grad_bias.size() != bias.size()) grad_bias = Eigen::VectorXd::Zero(bias.size());

  grad_bias += grad_out.mat().colwise().sum().transpose();
  for (int dy = 0; dy < k_; ++dy) {
    for (int dx = 0; dx < k_; ++dx) {
      auto gwblock = grad_weights.middleRows((dy * k_ + dx) * in_c_, in_c_);
      const auto wblock = weights.middleRows((dy * k_ + dx) * in_c_, in_c_);
      for (int y = 0; y < h; ++y) {
        CMapRM in_row(padded.data() + (static_cast<size_t>(y + dy) * wp + dx) * in_c_, w, in_c_);
        MapRM gin_row(grad_padded.data() + (static_cast<size_t>(y + dy) * wp + dx) * in_c_, w, in_c_);
        CMapRM gout_row(grad_out.data() + static_cast<size_t>(y) * w * out_c_, w, out_c_);
        gwblock.noalias() += in_row.transpose() * gout_row;
        gin_row.noalias() += gout_row * wblock.transpose();
      }
    }
  }

  Image grad_in(h, w, in_c_);
  for (int y = 0; y < h; ++y) {
    const double* src = grad_padded.data() + (static_cast<size_t>(y + r) * wp + r) * in_c_;
    std::copy(src, src + static_cast<size_t>(w) * in_c_,
              grad_in.data() + static_cast<size_t>(y) * w * in_c_);
  }
  return grad_in;
}

}  // namespace gcrf
