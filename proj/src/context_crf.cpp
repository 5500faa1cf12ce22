#include "gcrf/context_crf.hpp"

#include <cmath>
#include <random>

namespace gcrf {

GlobalCompatibility GlobalCompatibility::indicator(int labels) {
  GlobalCompatibility mu(labels);
  for (int l = 0; l < labels; ++l) mu.at(l, l, 1) = 1.0;
  return mu;
}

ContextMessageNet::ContextMessageNet(int labels, int k1, int k2, int hidden)
    : conv1(k1, labels, hidden), conv2(k2, hidden, labels) {}

void ContextMessageNet::init(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (Eigen::Index i = 0; i < conv1.weights.size(); ++i) conv1.weights.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < conv1.bias.size(); ++i) conv1.bias[i] = u(rng);
  conv2.weights.setZero();
  conv2.bias.setZero();
}

Image high_order_message(const Image& p_hat, const ContextMessageNet& net, HighOrderCache* cache) {
  Image pre = net.conv1.forward(p_hat);
  Image hidden(pre.height(), pre.width(), pre.channels());
  hidden.array() = pre.array().max(0.0);
  Image out = net.conv2.forward(hidden);
  if (cache) {
    cache->input = p_hat;
    cache->pre_act = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

Image high_order_backward(const ContextMessageNet& net, const HighOrderCache& cache,
                          const Image& grad_msg, ContextMessageNetGrads& grads) {
  Image grad_hidden = net.conv2.backward(cache.hidden, grad_msg, grads.w2, grads.b2);
  // rectifier gate
  grad_hidden.array() *= (cache.pre_act.array() > 0.0).cast<double>();
  return net.conv1.backward(cache.input, grad_hidden, grads.w1, grads.b1);
}

Eigen::VectorXd global_message_to_local(const Eigen::MatrixXd& p_g, const GlobalCompatibility& mu_g) {
  const int L = mu_g.labels();
  Eigen::VectorXd msg = Eigen::VectorXd::Zero(L);
  for (int v = 0; v < L; ++v)
    for (int l = 0; l < L; ++l)
      for (int y = 0; y < 2; ++y) msg[v] += p_g(l, y) * mu_g.at(l, v, y);
  return msg;
}

Eigen::MatrixXd local_message_to_global(const Image& p_hat, const GlobalCompatibility& mu_g) {
  const int L = mu_g.labels();
  // column sums of p_hat: total probability mass per label
  const Eigen::RowVectorXd mass = p_hat.mat().colwise().sum();
  Eigen::MatrixXd msg = Eigen::MatrixXd::Zero(L, 2);
  for (int l = 0; l < L; ++l)
    for (int y = 0; y < 2; ++y) {
      double m = 0.0;
      for (int v = 0; v < L; ++v) m += mass[v] * mu_g.at(l, v, y);
      msg(l, y) = m;
    }
  return msg;
}

Eigen::MatrixXd global_unary_from_local(const Image& phi, double scale, double bias,
                                        GlobalUnaryCache* cache) {
  const int L = phi.channels();
  Eigen::MatrixXd phi_g = Eigen::MatrixXd::Zero(L, 2);
  std::vector<int> argmin(L, 0);
  Eigen::VectorXd scores(L);
  for (int l = 0; l < L; ++l) {
    double best = phi.data()[l];
    int best_i = 0;
    for (int i = 1; i < phi.pixels(); ++i) {
      const double v = phi.data()[static_cast<size_t>(i) * L + l];
      if (v < best) {
        best = v;
        best_i = i;
      }
    }
    argmin[l] = best_i;
    scores[l] = -best;
    phi_g(l, 1) = -(scale * scores[l] + bias);
  }
  if (cache) {
    cache->argmin = std::move(argmin);
    cache->scores = std::move(scores);
  }
  return phi_g;
}

void global_unary_backward(const Eigen::MatrixXd& grad_phi_g, const GlobalUnaryCache& cache,
                           double scale, Image& grad_phi, double& grad_scale, double& grad_bias) {
  const int L = static_cast<int>(cache.scores.size());
  for (int l = 0; l < L; ++l) {
    const double g = grad_phi_g(l, 1);
    grad_scale += g * (-cache.scores[l]);
    grad_bias += -g;
    grad_phi.data()[static_cast<size_t>(cache.argmin[l]) * L + l] += g * scale;
  }
}

namespace {

Eigen::MatrixXd softmax_rows_neg(const Eigen::MatrixXd& phi) {
  Eigen::MatrixXd p(phi.rows(), phi.cols());
  for (Eigen::Index r = 0; r < phi.rows(); ++r) {
    const double lo = phi.row(r).minCoeff();
    p.row(r) = (-(phi.row(r).array() - lo)).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace

ContextState context_iterate(const Image& phi, const Eigen::MatrixXd& phi_g0,
                             const ContextMessageNet& net, const GlobalCompatibility& mu_g,
                             int iters, bool use_highorder, bool use_global,
                             ContextCache* cache) {
  if (iters < 1) throw std::invalid_argument("context: iters must be >= 1");
  const int L = phi.channels();
  ContextState st{phi, phi_g0, 0};
  for (int k = 0; k < iters; ++k) {
    const Image p_hat = softmax_neg(st.phi_u);
    const Eigen::MatrixXd p_g = softmax_rows_neg(st.phi_g);

    Image next = phi;
    std::optional<HighOrderCache> net_cache;
    if (use_highorder) {
      if (cache) net_cache.emplace();
      const Image msg = high_order_message(p_hat, net, cache ? &*net_cache : nullptr);
      next.array() -= msg.array();
    }
    Eigen::MatrixXd next_g = phi_g0;
    if (use_global) {
      const Eigen::VectorXd to_local = global_message_to_local(p_g, mu_g);
      next.mat().rowwise() -= to_local.transpose();
      next_g -= local_message_to_global(p_hat, mu_g);
    }
    if (cache) {
      cache->p_hat = p_hat;
      cache->p_g = p_g;
      cache->net_cache = std::move(net_cache);
      cache->use_highorder = use_highorder;
      cache->use_global = use_global;
      cache->height = phi.height();
      cache->width = phi.width();
      cache->labels = L;
      cache->sweeps = k + 1;
    }
    st.phi_u = std::move(next);
    st.phi_g = std::move(next_g);
    st.iterations = k + 1;
  }
  return st;
}

ContextGrads context_backward(const Image& grad_phi_u, const Eigen::MatrixXd& grad_phi_g_out,
                              const ContextMessageNet& net, const GlobalCompatibility& mu_g,
                              const ContextCache& cache) {
  if (cache.labels == 0) throw std::invalid_argument("context backward: missing forward cache");
  if (cache.sweeps != 1)
    throw std::invalid_argument("context backward: only single-sweep forward caches are supported");
  const int L = cache.labels;
  ContextGrads grads(net, L);
  grads.grad_phi = grad_phi_u;  // direct path phi_u = phi - messages

  Image grad_p(cache.height, cache.width, L);
  Eigen::MatrixXd grad_p_g = Eigen::MatrixXd::Zero(L, 2);

  if (cache.use_highorder) {
    Image grad_msg(cache.height, cache.width, L);
    grad_msg.array() = -grad_phi_u.array();
    grad_p = high_order_backward(net, *cache.net_cache, grad_msg, grads.net);
  }

  if (cache.use_global) {
    // channel sums of the upstream gradient
    const Eigen::RowVectorXd s = grad_phi_u.mat().colwise().sum();
    for (int l = 0; l < L; ++l)
      for (int y = 0; y < 2; ++y) {
        double acc = 0.0;
        for (int v = 0; v < L; ++v) acc += s[v] * mu_g.at(l, v, y);
        grad_p_g(l, y) = -acc;
      }
    for (int l = 0; l < L; ++l)
      for (int v = 0; v < L; ++v)
        for (int y = 0; y < 2; ++y) grads.mu_g.at(l, v, y) += -s[v] * cache.p_g(l, y);

    if (grad_phi_g_out.size() > 0) {
      grads.grad_phi_g = grad_phi_g_out;  // direct path phi_g = phi_g0 - message
      const Eigen::RowVectorXd mass = cache.p_hat.mat().colwise().sum();
      Eigen::RowVectorXd gp_const = Eigen::RowVectorXd::Zero(L);
      for (int l = 0; l < L; ++l)
        for (int y = 0; y < 2; ++y) {
          const double g = -grad_phi_g_out(l, y);
          for (int v = 0; v < L; ++v) {
            gp_const[v] += g * mu_g.at(l, v, y);
            grads.mu_g.at(l, v, y) += g * mass[v];
          }
        }
      grad_p.mat().rowwise() += gp_const;
    }

    // presence softmax chain
    for (int l = 0; l < L; ++l) {
      const double dot = grad_p_g(l, 0) * cache.p_g(l, 0) + grad_p_g(l, 1) * cache.p_g(l, 1);
      for (int y = 0; y < 2; ++y)
        grads.grad_phi_g(l, y) += -cache.p_g(l, y) * (grad_p_g(l, y) - dot);
    }
  }

  if (cache.use_highorder || cache.use_global) {
    const Image chain = softmax_neg_backward(cache.p_hat, grad_p);
    grads.grad_phi.array() += chain.array();
  }
  return grads;
}

}  // namespace gcrf
