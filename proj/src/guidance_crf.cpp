#include "gcrf/guidance_crf.hpp"

namespace gcrf {

Eigen::MatrixXd potts_init(int labels) {
  if (labels < 2) throw std::invalid_argument("potts_init: need at least 2 labels");
  Eigen::MatrixXd mu = Eigen::MatrixXd::Ones(labels, labels);
  mu.diagonal().setZero();
  return mu;
}

namespace {

// m = g mu', i.e. m(i,v) = sum_v' mu(v,v') g(i,v')
Image compatibility_transform(const Image& g, const Eigen::MatrixXd& mu) {
  Image m(g.height(), g.width(), g.channels());
  m.mat().noalias() = g.mat() * mu.transpose();
  return m;
}

}  // namespace

Image guidance_forward(const Image& phi_u, std::shared_ptr<const GuidedFilterPlan> plan,
                       const GuidanceParams& params, GuidanceCache* cache) {
  params.validate();
  if (!plan) throw std::invalid_argument("guidance: missing filter plan");
  if (phi_u.height() != plan->height() || phi_u.width() != plan->width())
    throw std::invalid_argument("guidance: potential dims do not match guide");
  if (params.mu.rows() != phi_u.channels() || params.mu.cols() != phi_u.channels())
    throw std::invalid_argument("guidance: compatibility matrix shape mismatch");

  Image q = softmax_neg(phi_u);
  Image g = guided_filter(*plan, q);
  Image m = compatibility_transform(g, params.mu);

  Image phi(phi_u.height(), phi_u.width(), phi_u.channels());
  phi.array() = phi_u.array() + params.lambda * m.array();
  if (cache) {
    cache->plan = std::move(plan);
    cache->q = std::move(q);
    cache->g = std::move(g);
    cache->m = std::move(m);
  }
  return phi;
}

GuidanceGrads guidance_backward(const Image& grad_phi, const GuidanceParams& params,
                                const GuidanceCache& cache) {
  if (!cache.plan || cache.q.empty())
    throw std::invalid_argument("guidance backward: missing forward cache");
  if (!grad_phi.same_shape(cache.q))
    throw std::invalid_argument("guidance backward: gradient shape mismatch");

  GuidanceGrads out;
  out.grad_phi_u = grad_phi;  // direct path

  // phi = phi_u + lambda * m
  out.grad_lambda = (grad_phi.array() * cache.m.array()).sum();
  Image grad_m(grad_phi.height(), grad_phi.width(), grad_phi.channels());
  grad_m.array() = params.lambda * grad_phi.array();

  // m(i,v) = sum_v' mu(v,v') g(i,v')
  out.grad_mu.noalias() = grad_m.mat().transpose() * cache.g.mat();
  Image grad_g(grad_phi.height(), grad_phi.width(), grad_phi.channels());
  grad_g.mat().noalias() = grad_m.mat() * params.mu;

  Image grad_q = guided_filter_transpose(*cache.plan, grad_g);
  const Image chain = softmax_neg_backward(cache.q, grad_q);
  out.grad_phi_u.array() += chain.array();
  return out;
}

Image guidance_infer(const Image& phi_u, const Image& guide, const GuidanceParams& params,
                     bool fast) {
  params.validate();
  if (phi_u.height() != guide.height() || phi_u.width() != guide.width())
    throw std::invalid_argument("guidance: potential dims do not match guide");

  std::shared_ptr<GuidedFilterPlan> plan;
  GuidedFilterConfig cfg = params.filter_cfg;
  if (!fast) {
    cfg.subsample = 1;
    plan = std::make_shared<GuidedFilterPlan>(guide, cfg);
  } else if (cfg.subsample < 2) {
    cfg.subsample = 4;
  }

  Image phi = phi_u;
  for (int t = 0; t < params.iters; ++t) {
    const Image q = softmax_neg(phi);
    const Image g = fast ? guided_filter_fast(guide, q, cfg) : guided_filter(*plan, q);
    const Image m = compatibility_transform(g, params.mu);
    phi.array() = phi_u.array() + params.lambda * m.array();
  }
  return phi;
}

}  // namespace gcrf
