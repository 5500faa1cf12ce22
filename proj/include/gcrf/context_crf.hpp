#pragma once

#include <Eigen/Dense>
#include <optional>

#include "gcrf/conv2d.hpp"
#include "gcrf/image.hpp"
#include "gcrf/softmax.hpp"

namespace gcrf {

/// Coupling table mu(l, v, y) between the per-category presence variable
/// y_l in {0,1} and a pixel taking label v. The default ties presence of
/// category l to pixels labelled l.
class GlobalCompatibility {
 public:
  GlobalCompatibility() = default;
  explicit GlobalCompatibility(int labels) : L_(labels), table_(static_cast<size_t>(labels) * labels * 2, 0.0) {}

  /// mu(l, v, y) = 1 iff v == l and y == 1.
  static GlobalCompatibility indicator(int labels);

  int labels() const { return L_; }
  double& at(int l, int v, int y) { return table_[(static_cast<size_t>(l) * L_ + v) * 2 + y]; }
  double at(int l, int v, int y) const { return table_[(static_cast<size_t>(l) * L_ + v) * 2 + y]; }
  double* data() { return table_.data(); }
  const double* data() const { return table_.data(); }
  size_t size() const { return table_.size(); }

 private:
  int L_ = 0;
  std::vector<double> table_;
};

/// Two stride-1 same-padded convolution layers with a rectifier in between,
/// mapping an L-channel probability map to an L-channel message map.
/// The second layer starts at zero so an untrained net emits no message.
struct ContextMessageNet {
  Conv2D conv1;  // L -> hidden
  Conv2D conv2;  // hidden -> L

  ContextMessageNet() = default;
  ContextMessageNet(int labels, int k1 = 15, int k2 = 15, int hidden = 32);

  /// Small uniform first layer, zero second layer.
  void init(uint64_t seed);

  int labels() const { return conv2.out_channels(); }
  int receptive_field() const { return conv1.ksize() + conv2.ksize() - 1; }
};

struct ContextMessageNetGrads {
  Eigen::MatrixXd w1, w2;
  Eigen::VectorXd b1, b2;

  explicit ContextMessageNetGrads(const ContextMessageNet& net)
      : w1(Eigen::MatrixXd::Zero(net.conv1.weights.rows(), net.conv1.weights.cols())),
        w2(Eigen::MatrixXd::Zero(net.conv2.weights.rows(), net.conv2.weights.cols())),
        b1(Eigen::VectorXd::Zero(net.conv1.bias.size())),
        b2(Eigen::VectorXd::Zero(net.conv2.bias.size())) {}
};

struct HighOrderCache {
  Image input;        // probability map fed to conv1
  Image pre_act;      // conv1 output before the rectifier
  Image hidden;       // rectified conv1 output
};

/// Learned message from the high-order clique around each pixel, a function
/// of the current probability map only.
Image high_order_message(const Image& p_hat, const ContextMessageNet& net,
                         HighOrderCache* cache = nullptr);

Image high_order_backward(const ContextMessageNet& net, const HighOrderCache& cache,
                          const Image& grad_msg, ContextMessageNetGrads& grads);

/// Message from the presence variables into every pixel: a spatially
/// constant L-vector, message(v) = sum_{l,y} p_g(l,y) mu(l,v,y).
Eigen::VectorXd global_message_to_local(const Eigen::MatrixXd& p_g, const GlobalCompatibility& mu_g);

/// Aggregate message from all pixels into the presence variables:
/// message(l,y) = sum_i sum_v p_hat(i,v) mu(l,v,y).
Eigen::MatrixXd local_message_to_global(const Image& p_hat, const GlobalCompatibility& mu_g);

/// Presence unaries derived from the local potential map: per-label peak
/// score through a learnable affine. Column 0 (absent) is fixed at zero.
struct GlobalUnaryCache {
  std::vector<int> argmin;   // pixel index of the per-label peak
  Eigen::VectorXd scores;    // s_l = -min_i phi(i,l)
};

Eigen::MatrixXd global_unary_from_local(const Image& phi, double scale, double bias,
                                        GlobalUnaryCache* cache = nullptr);

void global_unary_backward(const Eigen::MatrixXd& grad_phi_g, const GlobalUnaryCache& cache,
                           double scale, Image& grad_phi, double& grad_scale, double& grad_bias);

struct ContextState {
  Image phi_u;             // refined local marginal potentials
  Eigen::MatrixXd phi_g;   // refined presence potentials, L x 2
  int iterations = 0;
};

/// Forward cache of a single-iteration update, consumed by context_backward.
struct ContextCache {
  Image p_hat;
  Eigen::MatrixXd p_g;
  std::optional<HighOrderCache> net_cache;
  bool use_highorder = false, use_global = false;
  int height = 0, width = 0, labels = 0;
  int sweeps = 0;
};

struct ContextGrads {
  Image grad_phi;
  Eigen::MatrixXd grad_phi_g;
  ContextMessageNetGrads net;
  GlobalCompatibility mu_g;

  ContextGrads(const ContextMessageNet& n, int labels)
      : grad_phi_g(Eigen::MatrixXd::Zero(labels, 2)), net(n), mu_g(labels) {}
};

/// One-to-K sweeps of the coarse-level update. Each sweep recomputes both
/// probability maps from the current potentials, then rebuilds the
/// potentials from the input unaries minus the fresh messages.
ContextState context_iterate(const Image& phi, const Eigen::MatrixXd& phi_g0,
                             const ContextMessageNet& net, const GlobalCompatibility& mu_g,
                             int iters, bool use_highorder = true, bool use_global = true,
                             ContextCache* cache = nullptr);

/// Exact reverse-mode gradients of a single-iteration update. grad_phi_g_out
/// may be empty when nothing downstream consumes the presence potentials.
ContextGrads context_backward(const Image& grad_phi_u, const Eigen::MatrixXd& grad_phi_g_out,
                              const ContextMessageNet& net, const GlobalCompatibility& mu_g,
                              const ContextCache& cache);

}  // namespace gcrf
