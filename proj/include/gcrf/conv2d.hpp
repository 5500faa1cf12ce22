#pragma once

#include <Eigen/Dense>

#include "gcrf/image.hpp"

namespace gcrf {

/// Same-padded stride-1 convolution over channel-innermost images.
/// Weights are stored as one (k*k*in_c) x out_c matrix; the rows for spatial
/// offset (dy,dx) are the block starting at (dy*k+dx)*in_c.
class Conv2D {
 public:
  Conv2D() = default;
  Conv2D(int ksize, int in_channels, int out_channels);

  int ksize() const { return k_; }
  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }

  Eigen::MatrixXd weights;  // (k*k*in_c) x out_c
  Eigen::VectorXd bias;     // out_c

  Image forward(const Image& input) const;

  /// Accumulates weight/bias gradients and returns the input gradient.
  Image backward(const Image& input, const Image& grad_out,
                 Eigen::MatrixXd& grad_weights, Eigen::VectorXd& grad_bias) const;

 private:
  int k_ = 0, in_c_ = 0, out_c_ = 0;
};

}  // namespace gcrf
