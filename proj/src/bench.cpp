#include "gcrf/bench.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gcrf/guided_filter.hpp"

namespace gcrf {

double median_seconds(int reps, const std::function<void()>& fn) {
  if (reps < 1) throw std::invalid_argument("bench: reps must be >= 1");
  std::vector<double> times(reps);
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    times[r] = std::chrono::duration<double>(t1 - t0).count();
  }
  std::sort(times.begin(), times.end());
  return times[reps / 2];
}

Image dense_pairwise_message(const Image& guide, const Image& q, double theta_pos,
                             double theta_color) {
  if (guide.height() != q.height() || guide.width() != q.width())
    throw std::invalid_argument("dense pass: dims mismatch");
  const int h = q.height(), w = q.width(), L = q.channels();
  const int n = h * w;
  if (L > 16) throw std::invalid_argument("dense pass: at most 16 labels");
  Image out(h, w, L);
  const double inv_p = 1.0 / (2.0 * theta_pos * theta_pos);
  const double inv_c = 1.0 / (2.0 * theta_color * theta_color);
  for (int i = 0; i < n; ++i) {
    const int yi = i / w, xi = i % w;
    const double* gi = guide.data() + static_cast<size_t>(i) * 3;
    double acc[16] = {0};
    double norm = 0.0;
    for (int j = 0; j < n; ++j) {
      const int yj = j / w, xj = j % w;
      const double* gj = guide.data() + static_cast<size_t>(j) * 3;
      const double dp = static_cast<double>(yi - yj) * (yi - yj) +
                        static_cast<double>(xi - xj) * (xi - xj);
      double dc = 0.0;
      for (int c = 0; c < 3; ++c) dc += (gi[c] - gj[c]) * (gi[c] - gj[c]);
      const double k = std::exp(-dp * inv_p - dc * inv_c);
      norm += k;
      const double* qj = q.data() + static_cast<size_t>(j) * L;
      for (int v = 0; v < L; ++v) acc[v] += k * qj[v];
    }
    double* oi = out.data() + static_cast<size_t>(i) * L;
    for (int v = 0; v < L; ++v) oi[v] = acc[v] / norm;
  }
  return out;
}

Image guided_message_pass(const Image& guide, const Image& q, int radius, double epsilon) {
  GuidedFilterPlan plan(guide, {.radius = radius, .epsilon = epsilon, .subsample = 1});
  return guided_filter(plan, q);
}

}  // namespace gcrf
