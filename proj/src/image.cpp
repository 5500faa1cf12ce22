#include "gcrf/image.hpp"

#include <algorithm>
#include <cmath>

namespace gcrf {

void check_finite(const Image& img, const char* what) {
  if (!img.array().isFinite().all())
    throw std::runtime_error(std::string("non-finite values in ") + what);
}

Image window_counts(int height, int width, int radius) {
  Image n(height, width, 1);
  for (int y = 0; y < height; ++y) {
    const int ny = std::min(y + radius, height - 1) - std::max(y - radius, 0) + 1;
    for (int x = 0; x < width; ++x) {
      const int nx = std::min(x + radius, width - 1) - std::max(x - radius, 0) + 1;
      n.at(y, x, 0) = static_cast<double>(ny) * nx;
    }
  }
  return n;
}

Image box_filter(const Image& src, int radius) {
  if (src.empty()) throw std::invalid_argument("empty tensor");
  if (radius < 1) throw std::invalid_argument("box_filter: radius must be >= 1");
  const int h = src.height(), w = src.width(), c = src.channels();

  // Integral image with a zero top row / left column, per channel.
  std::vector<double> integ(static_cast<size_t>(h + 1) * (w + 1) * c, 0.0);
  const size_t rowstride = static_cast<size_t>(w + 1) * c;
  for (int y = 0; y < h; ++y) {
    double* cur = integ.data() + (y + 1) * rowstride + c;
    const double* above = integ.data() + y * rowstride + c;
    const double* srcrow = src.data() + static_cast<size_t>(y) * w * c;
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        cur[x * c + ch] = srcrow[x * c + ch] + above[x * c + ch] +
                          cur[(x - 1) * c + ch] - above[(x - 1) * c + ch];
      }
    }
  }

  Image out(h, w, c);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(y - radius, 0);
    const int y1 = std::min(y + radius, h - 1) + 1;
    const double* top = integ.data() + y0 * rowstride;
    const double* bot = integ.data() + y1 * rowstride;
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(x - radius, 0);
      const int x1 = std::min(x + radius, w - 1) + 1;
      const double inv = 1.0 / (static_cast<double>(y1 - y0) * (x1 - x0));
      for (int ch = 0; ch < c; ++ch) {
        const double sum = bot[x1 * c + ch] - bot[x0 * c + ch] -
                           top[x1 * c + ch] + top[x0 * c + ch];
        out.at(y, x, ch) = sum * inv;
      }
    }
  }
  return out;
}

Image bilinear_resize(const Image& src, int out_h, int out_w) {
  if (src.empty()) throw std::invalid_argument("empty tensor");
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: bad output size");
  const int h = src.height(), w = src.width(), c = src.channels();
  Image out(out_h, out_w, c);
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top = src.at(y0, x0, ch) + wx * (src.at(y0, x1, ch) - src.at(y0, x0, ch));
        const double bot = src.at(y1, x0, ch) + wx * (src.at(y1, x1, ch) - src.at(y1, x0, ch));
        out.at(y, x, ch) = top + wy * (bot - top);
      }
    }
  }
  return out;
}

Image elementwise(const Image& a, const Image& b, ElemOp op) {
  if (!a.same_shape(b)) throw std::invalid_argument("elementwise: shape mismatch");
  Image out(a.height(), a.width(), a.channels());
  switch (op) {
    case ElemOp::Add: out.array() = a.array() + b.array(); break;
    case ElemOp::Sub: out.array() = a.array() - b.array(); break;
    case ElemOp::Mul: out.array() = a.array() * b.array(); break;
  }
  return out;
}

}  // namespace gcrf
