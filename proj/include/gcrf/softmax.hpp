#pragma once

#include "gcrf/image.hpp"

namespace gcrf {

/// Per-pixel softmax of negated potentials, p = exp(-phi) / Z, with
/// max-subtraction for stability.
Image softmax_neg(const Image& phi);

/// Chains an upstream gradient w.r.t. p back through softmax_neg:
/// dL/dphi(v) = -p_v (g_v - sum_u g_u p_u). `probs` is the forward output.
Image softmax_neg_backward(const Image& probs, const Image& grad_probs);

}  // namespace gcrf
