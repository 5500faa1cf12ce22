#pragma once

#include <chrono>
#include <functional>

#include "gcrf/image.hpp"

namespace gcrf {

/// Median wall-clock seconds of `fn` over `reps` runs.
double median_seconds(int reps, const std::function<void()>& fn);

/// Brute-force fully connected pairwise message pass with a Gaussian
/// appearance+position kernel, O(N^2 L). Comparison baseline only.
Image dense_pairwise_message(const Image& guide, const Image& q, double theta_pos = 16.0,
                             double theta_color = 0.1);

/// One guided-filter message pass (plan + filtering) over q.
Image guided_message_pass(const Image& guide, const Image& q, int radius, double epsilon);

}  // namespace gcrf
