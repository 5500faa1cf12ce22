#include "gcrf/softmax.hpp"

#include <cmath>

namespace gcrf {

Image softmax_neg(const Image& phi) {
  const int n = phi.pixels(), L = phi.channels();
  Image p(phi.height(), phi.width(), L);
  const double* src = phi.data();
  double* dst = p.data();
  for (int i = 0; i < n; ++i, src += L, dst += L) {
    double lo = src[0];
    for (int v = 1; v < L; ++v) lo = std::min(lo, src[v]);
    double z = 0.0;
    for (int v = 0; v < L; ++v) {
      dst[v] = std::exp(lo - src[v]);
      z += dst[v];
    }
    const double inv = 1.0 / z;
    for (int v = 0; v < L; ++v) dst[v] *= inv;
  }
  return p;
}

Image softmax_neg_backward(const Image& probs, const Image& grad_probs) {
  if (!probs.same_shape(grad_probs)) throw std::invalid_argument("softmax backward: shape mismatch");
  const int n = probs.pixels(), L = probs.channels();
  Image out(probs.height(), probs.width(), L);
  const double* p = probs.data();
  const double* g = grad_probs.data();
  double* dst = out.data();
  for (int i = 0; i < n; ++i, p += L, g += L, dst += L) {
    double dot = 0.0;
    for (int v = 0; v < L; ++v) dot += g[v] * p[v];
    for (int v = 0; v < L; ++v) dst[v] = -p[v] * (g[v] - dot);
  }
  return out;
}

}  // namespace gcrf
