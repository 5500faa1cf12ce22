#pragma once

#include <Eigen/Dense>

#include "gcrf/image.hpp"

namespace gcrf {

struct GuidedFilterConfig {
  int radius = 50;        // window half-width
  double epsilon = 1.0;   // covariance regularizer
  int subsample = 1;      // 1 = exact path; s > 1 enables the down-sampled path

  void validate() const {
    if (radius < 1) throw std::invalid_argument("guided filter: radius must be >= 1");
    if (epsilon <= 0) throw std::invalid_argument("guided filter: epsilon must be > 0");
    if (subsample < 1) throw std::invalid_argument("guided filter: subsample must be >= 1");
  }
};

/// Precomputed per-pixel window statistics of a 3-channel guide: clipped
/// window means, and the inverse of (Sigma_k + eps*I) stored as the six
/// unique entries of the symmetric 3x3. Immutable once built; one plan can
/// filter any number of inputs of matching size.
class GuidedFilterPlan {
 public:
  GuidedFilterPlan(const Image& guide, const GuidedFilterConfig& cfg);

  int height() const { return guide_.height(); }
  int width() const { return guide_.width(); }
  const Image& guide() const { return guide_; }
  const GuidedFilterConfig& config() const { return cfg_; }
  const Image& mean_guide() const { return mean_guide_; }
  const Image& counts() const { return counts_; }
  bool uniform_counts() const { return uniform_counts_; }

  /// Inverse of (Sigma_k + eps*I) at pixel (y,x).
  Eigen::Matrix3d inv_sigma(int y, int x) const;

  /// Covariance Sigma_k at pixel (y,x) (kept for oracle checks).
  Eigen::Matrix3d sigma(int y, int x) const;

 private:
  Image guide_;
  GuidedFilterConfig cfg_;
  Image mean_guide_;   // H x W x 3
  Image sigma_;        // H x W x 6: xx, xy, xz, yy, yz, zz
  Image inv_sigma_;    // H x W x 6, same packing
  Image counts_;       // H x W x 1 clipped-window sizes
  bool uniform_counts_ = false;
};

/// Edge-preserving filtering of an L-channel input through the two-pass
/// coefficient algorithm (per-window linear fit, then overlapping-window
/// averaging). Cost is independent of the window radius.
Image guided_filter(const GuidedFilterPlan& plan, const Image& input);

/// Applies the transpose of the filter's weight matrix. W is symmetric
/// wherever window counts agree (everywhere except a border band), and the
/// exact transpose is n .* W(grad ./ n) with n the window-count map.
Image guided_filter_transpose(const GuidedFilterPlan& plan, const Image& grad);

/// Dense N x N weight matrix of the filter, row i holding the weights that
/// produce output pixel i. Literal per-window evaluation; oracle only.
Eigen::MatrixXd guided_weight_matrix(const Image& guide, const GuidedFilterConfig& cfg);

/// Down-sampled variant: linear coefficients are fitted at low resolution,
/// bilinearly up-sampled and applied against the full-resolution guide.
Image guided_filter_fast(const Image& guide, const Image& input, const GuidedFilterConfig& cfg);

}  // namespace gcrf
