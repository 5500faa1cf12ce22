#pragma once

#include <Eigen/Dense>
#include <memory>

#include "gcrf/guided_filter.hpp"
#include "gcrf/image.hpp"
#include "gcrf/softmax.hpp"

namespace gcrf {

/// mu(v, v') = 1 for v != v', 0 on the diagonal.
Eigen::MatrixXd potts_init(int labels);

struct GuidanceParams {
  Eigen::MatrixXd mu;            // L x L compatibility
  double lambda = 1.0;           // local-update weight
  GuidedFilterConfig filter_cfg; // exact path config (subsample forced to 1 in training)
  int iters = 3;                 // inference sweeps

  void validate() const {
    if (lambda < 0) throw std::invalid_argument("guidance: lambda must be >= 0");
    if (iters < 1) throw std::invalid_argument("guidance: iters must be >= 1");
    filter_cfg.validate();
  }
};

struct GuidanceCache {
  std::shared_ptr<const GuidedFilterPlan> plan;
  Image q;   // softmax of the input potentials
  Image g;   // filtered probabilities
  Image m;   // compatibility-transformed message
};

struct GuidanceGrads {
  Image grad_phi_u;
  Eigen::MatrixXd grad_mu;
  double grad_lambda = 0.0;
};

/// One training sweep: softmax, guided filtering, compatibility transform,
/// local update phi = phi_u + lambda * (g mu'). Potts-positive mu with the
/// additive update rewards labels with filtered neighborhood support.
Image guidance_forward(const Image& phi_u, std::shared_ptr<const GuidedFilterPlan> plan,
                       const GuidanceParams& params, GuidanceCache* cache = nullptr);

/// Exact reverse-mode pass through the single training sweep.
GuidanceGrads guidance_backward(const Image& grad_phi, const GuidanceParams& params,
                                const GuidanceCache& cache);

/// Inference: params.iters sweeps re-feeding the refined potentials. The
/// plan is built once from the guide; with fast=true the coefficients are
/// fitted at reduced resolution (filter_cfg.subsample).
Image guidance_infer(const Image& phi_u, const Image& guide, const GuidanceParams& params,
                     bool fast = false);

}  // namespace gcrf
