#include "gcrf/guided_filter.hpp"

#include <algorithm>
#include <cmath>

namespace gcrf {

namespace {

Eigen::Matrix3d unpack_sym(const Image& packed, int y, int x) {
  Eigen::Matrix3d m;
  const double xx = packed.at(y, x, 0), xy = packed.at(y, x, 1), xz = packed.at(y, x, 2);
  const double yy = packed.at(y, x, 3), yz = packed.at(y, x, 4), zz = packed.at(y, x, 5);
  m << xx, xy, xz, xy, yy, yz, xz, yz, zz;
  return m;
}

// Per-window linear coefficients a (H x W x 3L) and b (H x W x L) for the
// given input, before the overlapping-window averaging step.
void fit_coefficients(const GuidedFilterPlan& plan, const Image& input, Image& a, Image& b) {
  const int h = input.height(), w = input.width(), L = input.channels();
  const Image& guide = plan.guide();
  const Image& mean_guide = plan.mean_guide();
  const int r = plan.config().radius;

  Image prod(h, w, 3 * L);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        for (int l = 0; l < L; ++l)
          prod.at(y, x, c * L + l) = guide.at(y, x, c) * input.at(y, x, l);

  const Image mean_input = box_filter(input, r);
  const Image mean_prod = box_filter(prod, r);

  a = Image(h, w, 3 * L);
  b = Image(h, w, L);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Matrix3d inv = plan.inv_sigma(y, x);
      const Eigen::Vector3d mu(mean_guide.at(y, x, 0), mean_guide.at(y, x, 1), mean_guide.at(y, x, 2));
      for (int l = 0; l < L; ++l) {
        Eigen::Vector3d cov;
        for (int c = 0; c < 3; ++c)
          cov[c] = mean_prod.at(y, x, c * L + l) - mu[c] * mean_input.at(y, x, l);
        const Eigen::Vector3d ak = inv * cov;
        for (int c = 0; c < 3; ++c) a.at(y, x, c * L + l) = ak[c];
        b.at(y, x, l) = mean_input.at(y, x, l) - ak.dot(mu);
      }
    }
  }
}

Image apply_coefficients(const Image& a_mean, const Image& b_mean, const Image& guide) {
  const int h = guide.height(), w = guide.width();
  const int L = b_mean.channels();
  Image out(h, w, L);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int l = 0; l < L; ++l) {
        double v = b_mean.at(y, x, l);
        for (int c = 0; c < 3; ++c) v += a_mean.at(y, x, c * L + l) * guide.at(y, x, c);
        out.at(y, x, l) = v;
      }
  return out;
}

}  // namespace

GuidedFilterPlan::GuidedFilterPlan(const Image& guide, const GuidedFilterConfig& cfg)
    : guide_(guide), cfg_(cfg) {
  cfg_.validate();
  if (guide.channels() != 3)
    throw std::invalid_argument("guided filter: guide must have exactly 3 channels");

  const int h = guide.height(), w = guide.width();
  mean_guide_ = box_filter(guide, cfg_.radius);

  Image prod(h, w, 6);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = guide.at(y, x, 0), gy = guide.at(y, x, 1), gz = guide.at(y, x, 2);
      prod.at(y, x, 0) = gx * gx;
      prod.at(y, x, 1) = gx * gy;
      prod.at(y, x, 2) = gx * gz;
      prod.at(y, x, 3) = gy * gy;
      prod.at(y, x, 4) = gy * gz;
      prod.at(y, x, 5) = gz * gz;
    }
  const Image corr = box_filter(prod, cfg_.radius);

  sigma_ = Image(h, w, 6);
  inv_sigma_ = Image(h, w, 6);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double mx = mean_guide_.at(y, x, 0), my = mean_guide_.at(y, x, 1), mz = mean_guide_.at(y, x, 2);
      sigma_.at(y, x, 0) = corr.at(y, x, 0) - mx * mx;
      sigma_.at(y, x, 1) = corr.at(y, x, 1) - mx * my;
      sigma_.at(y, x, 2) = corr.at(y, x, 2) - mx * mz;
      sigma_.at(y, x, 3) = corr.at(y, x, 3) - my * my;
      sigma_.at(y, x, 4) = corr.at(y, x, 4) - my * mz;
      sigma_.at(y, x, 5) = corr.at(y, x, 5) - mz * mz;

      Eigen::Matrix3d s = unpack_sym(sigma_, y, x);
      s.diagonal().array() += cfg_.epsilon;
      const Eigen::Matrix3d inv = s.inverse();
      inv_sigma_.at(y, x, 0) = inv(0, 0);
      inv_sigma_.at(y, x, 1) = inv(0, 1);
      inv_sigma_.at(y, x, 2) = inv(0, 2);
      inv_sigma_.at(y, x, 3) = inv(1, 1);
      inv_sigma_.at(y, x, 4) = inv(1, 2);
      inv_sigma_.at(y, x, 5) = inv(2, 2);
    }

  counts_ = window_counts(h, w, cfg_.radius);
  uniform_counts_ = counts_.array().maxCoeff() == counts_.array().minCoeff();
}

Eigen::Matrix3d GuidedFilterPlan::inv_sigma(int y, int x) const { return unpack_sym(inv_sigma_, y, x); }
Eigen::Matrix3d GuidedFilterPlan::sigma(int y, int x) const { return unpack_sym(sigma_, y, x); }

Image guided_filter(const GuidedFilterPlan& plan, const Image& input) {
  if (input.height() != plan.height() || input.width() != plan.width())
    throw std::invalid_argument("guided filter: input dims do not match plan");

  Image a, b;
  fit_coefficients(plan, input, a, b);
  const Image a_mean = box_filter(a, plan.config().radius);
  const Image b_mean = box_filter(b, plan.config().radius);
  return apply_coefficients(a_mean, b_mean, plan.guide());
}

Image guided_filter_transpose(const GuidedFilterPlan& plan, const Image& grad) {
  if (grad.height() != plan.height() || grad.width() != plan.width())
    throw std::invalid_argument("guided filter: grad dims do not match plan");
  if (plan.uniform_counts()) return guided_filter(plan, grad);

  const Image& n = plan.counts();
  Image scaled(grad.height(), grad.width(), grad.channels());
  for (int y = 0; y < grad.height(); ++y)
    for (int x = 0; x < grad.width(); ++x)
      for (int l = 0; l < grad.channels(); ++l)
        scaled.at(y, x, l) = grad.at(y, x, l) / n.at(y, x, 0);
  Image out = guided_filter(plan, scaled);
  for (int y = 0; y < grad.height(); ++y)
    for (int x = 0; x < grad.width(); ++x)
      for (int l = 0; l < grad.channels(); ++l)
        out.at(y, x, l) *= n.at(y, x, 0);
  return out;
}

Eigen::MatrixXd guided_weight_matrix(const Image& guide, const GuidedFilterConfig& cfg) {
  cfg.validate();
  if (guide.channels() != 3)
    throw std::invalid_argument("guided filter: guide must have exactly 3 channels");
  const int h = guide.height(), w = guide.width();
  const int n = h * w;
  if (n > 4096) throw std::invalid_argument("oracle size exceeded");

  GuidedFilterPlan plan(guide, cfg);
  const int r = cfg.radius;

  // S_ij = sum over shared windows k of (1/n_k)(1 + (I_i-mu_k)' invSigma_k (I_j-mu_k)),
  // then row i is divided by the window count n_i.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> members;
  std::vector<Eigen::Vector3d> diffs, vs;
  for (int ky = 0; ky < h; ++ky) {
    for (int kx = 0; kx < w; ++kx) {
      members.clear();
      diffs.clear();
      const Eigen::Vector3d mu(plan.mean_guide().at(ky, kx, 0), plan.mean_guide().at(ky, kx, 1),
                               plan.mean_guide().at(ky, kx, 2));
      const Eigen::Matrix3d inv = plan.inv_sigma(ky, kx);
      for (int y = std::max(ky - r, 0); y <= std::min(ky + r, h - 1); ++y)
        for (int x = std::max(kx - r, 0); x <= std::min(kx + r, w - 1); ++x) {
          members.push_back(y * w + x);
          diffs.push_back(Eigen::Vector3d(guide.at(y, x, 0), guide.at(y, x, 1), guide.at(y, x, 2)) - mu);
        }
      const double inv_nk = 1.0 / members.size();
      vs.resize(diffs.size());
      for (size_t t = 0; t < diffs.size(); ++t) vs[t] = inv * diffs[t];
      for (size_t ii = 0; ii < members.size(); ++ii)
        for (size_t jj = 0; jj < members.size(); ++jj)
          s(members[ii], members[jj]) += inv_nk * (1.0 + diffs[ii].dot(vs[jj]));
    }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      s.row(y * w + x) /= plan.counts().at(y, x, 0);
  return s;
}

Image guided_filter_fast(const Image& guide, const Image& input, const GuidedFilterConfig& cfg) {
  cfg.validate();
  if (cfg.subsample < 2)
    throw std::invalid_argument("guided filter: fast path requires subsample >= 2");
  if (!(
          guide.height() == input.height() && guide.width() == input.width()))
    throw std::invalid_argument("guided filter: input dims do not match guide");

  const int s = cfg.subsample;
  const int lo_h = static_cast<int>(std::lround(static_cast<double>(guide.height()) / s));
  const int lo_w = static_cast<int>(std::lround(static_cast<double>(guide.width()) / s));
  if (lo_h < 2 || lo_w < 2)
    throw std::invalid_argument("guided filter: down-sampled image smaller than 2x2");

  GuidedFilterConfig lo_cfg = cfg;
  lo_cfg.subsample = 1;
  lo_cfg.radius = std::max(1, static_cast<int>(std::lround(static_cast<double>(cfg.radius) / s)));

  const Image guide_lo = bilinear_resize(guide, lo_h, lo_w);
  const Image input_lo = bilinear_resize(input, lo_h, lo_w);
  GuidedFilterPlan plan_lo(guide_lo, lo_cfg);

  Image a, b;
  fit_coefficients(plan_lo, input_lo, a, b);
  const Image a_mean = box_filter(a, lo_cfg.radius);
  const Image b_mean = box_filter(b, lo_cfg.radius);

  // fused bilinear up-sampling of the averaged coefficients and application
  // against the full-resolution guide; one pass, weights precomputed per column
  const int H = guide.height(), W = guide.width(), L = input.channels();
  Image out(H, W, L);
  std::vector<int> x0s(W), x1s(W);
  std::vector<double> wxs(W);
  for (int x = 0; x < W; ++x) {
    double fx = (x + 0.5) * (static_cast<double>(lo_w) / W) - 0.5;
    fx = std::clamp(fx, 0.0, static_cast<double>(lo_w - 1));
    x0s[x] = static_cast<int>(fx);
    x1s[x] = std::min(x0s[x] + 1, lo_w - 1);
    wxs[x] = fx - x0s[x];
  }
  const int ac = 3 * L;
  std::vector<double> arow(static_cast<size_t>(W) * ac), brow(static_cast<size_t>(W) * L);
  for (int y = 0; y < H; ++y) {
    double fy = (y + 0.5) * (static_cast<double>(lo_h) / H) - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(lo_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, lo_h - 1);
    const double wy = fy - y0;
    const double* a0 = a_mean.data() + static_cast<size_t>(y0) * lo_w * ac;
    const double* a1 = a_mean.data() + static_cast<size_t>(y1) * lo_w * ac;
    const double* b0 = b_mean.data() + static_cast<size_t>(y0) * lo_w * L;
    const double* b1 = b_mean.data() + static_cast<size_t>(y1) * lo_w * L;
    for (int x = 0; x < W; ++x) {
      const double wx = wxs[x];
      const double w00 = (1.0 - wy) * (1.0 - wx), w01 = (1.0 - wy) * wx;
      const double w10 = wy * (1.0 - wx), w11 = wy * wx;
      const double* pa00 = a0 + static_cast<size_t>(x0s[x]) * ac;
      const double* pa01 = a0 + static_cast<size_t>(x1s[x]) * ac;
      const double* pa10 = a1 + static_cast<size_t>(x0s[x]) * ac;
      const double* pa11 = a1 + static_cast<size_t>(x1s[x]) * ac;
      for (int k = 0; k < ac; ++k)
        arow[static_cast<size_t>(x) * ac + k] =
            w00 * pa00[k] + w01 * pa01[k] + w10 * pa10[k] + w11 * pa11[k];
      const double* pb00 = b0 + static_cast<size_t>(x0s[x]) * L;
      const double* pb01 = b0 + static_cast<size_t>(x1s[x]) * L;
      const double* pb10 = b1 + static_cast<size_t>(x0s[x]) * L;
      const double* pb11 = b1 + static_cast<size_t>(x1s[x]) * L;
      for (int l = 0; l < L; ++l)
        brow[static_cast<size_t>(x) * L + l] =
            w00 * pb00[l] + w01 * pb01[l] + w10 * pb10[l] + w11 * pb11[l];
    }
    const double* grow = guide.data() + static_cast<size_t>(y) * W * 3;
    double* orow = out.data() + static_cast<size_t>(y) * W * L;
    for (int x = 0; x < W; ++x)
      for (int l = 0; l < L; ++l) {
        double v = brow[static_cast<size_t>(x) * L + l];
        for (int c = 0; c < 3; ++c)
          v += arow[static_cast<size_t>(x) * ac + c * L + l] * grow[static_cast<size_t>(x) * 3 + c];
        orow[static_cast<size_t>(x) * L + l] = v;
      }
  }
  return out;
}

}  // namespace gcrf
