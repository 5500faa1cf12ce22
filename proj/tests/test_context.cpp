#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gcrf/context_crf.hpp"
#include "gcrf/training.hpp"

using namespace gcrf;

namespace {

Image random_image(Rng& rng, int h, int w, int c, double lo, double hi) {
  Image img(h, w, c);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform(lo, hi);
  return img;
}

}  // namespace

TEST_CASE("softmax of negated potentials") {
  Image phi(1, 1, 3);
  phi.at(0, 0, 0) = 0.0;
  phi.at(0, 0, 1) = -std::log(2.0);
  phi.at(0, 0, 2) = 0.0;
  const Image p = softmax_neg(phi);
  CHECK(p.at(0, 0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p.at(0, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.at(0, 0, 2) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and stable for large potentials") {
  Image phi(1, 1, 2);
  phi.at(0, 0, 0) = 1000.0;
  phi.at(0, 0, 1) = 1001.0;
  const Image p = softmax_neg(phi);
  CHECK(std::isfinite(p.at(0, 0, 0)));
  CHECK(p.at(0, 0, 0) + p.at(0, 0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.at(0, 0, 0) > p.at(0, 0, 1));  // lower potential, higher probability
}

TEST_CASE("global messages with the indicator coupling") {
  const int L = 3;
  const GlobalCompatibility mu_g = GlobalCompatibility::indicator(L);

  // presence certain for category 1 only
  Eigen::MatrixXd p_g = Eigen::MatrixXd::Zero(L, 2);
  p_g.col(0).setOnes();
  p_g(1, 0) = 0.0;
  p_g(1, 1) = 1.0;
  const Eigen::VectorXd msg = global_message_to_local(p_g, mu_g);
  CHECK(msg[0] == 0.0);
  CHECK(msg[1] == 1.0);
  CHECK(msg[2] == 0.0);

  // everything absent: no message at all
  Eigen::MatrixXd absent = Eigen::MatrixXd::Zero(L, 2);
  absent.col(0).setOnes();
  CHECK(global_message_to_local(absent, mu_g).cwiseAbs().maxCoeff() == 0.0);

  // uniform pixel marginals aggregate to N/L per present category
  const int h = 4, w = 5;
  const Image p_hat(h, w, L, 1.0 / L);
  const Eigen::MatrixXd up = local_message_to_global(p_hat, mu_g);
  for (int l = 0; l < L; ++l) {
    CHECK(up(l, 0) == doctest::Approx(0.0));
    CHECK(up(l, 1) == doctest::Approx(static_cast<double>(h * w) / L).epsilon(1e-12));
  }
}

TEST_CASE("presence unaries track the per-label peak score") {
  Image phi(2, 2, 2);
  phi.at(0, 0, 0) = -3.0;  // best evidence for label 0
  phi.at(0, 1, 0) = 1.0;
  phi.at(1, 0, 0) = 2.0;
  phi.at(1, 1, 0) = 0.5;
  phi.at(0, 0, 1) = 4.0;
  phi.at(0, 1, 1) = -1.0;  // best evidence for label 1
  phi.at(1, 0, 1) = 0.0;
  phi.at(1, 1, 1) = 2.0;
  GlobalUnaryCache cache;
  const Eigen::MatrixXd pg = global_unary_from_local(phi, 2.0, 0.5, &cache);
  CHECK(pg(0, 0) == 0.0);
  CHECK(pg(1, 0) == 0.0);
  CHECK(pg(0, 1) == doctest::Approx(-(2.0 * 3.0 + 0.5)).epsilon(1e-12));
  CHECK(pg(1, 1) == doctest::Approx(-(2.0 * 1.0 + 0.5)).epsilon(1e-12));
  CHECK(cache.argmin[0] == 0);  // pixel (0,0)
  CHECK(cache.argmin[1] == 1);  // pixel (0,1)
}

TEST_CASE("freshly initialized net emits no message: update is an identity") {
  Rng rng(5);
  const int L = 3;
  ContextMessageNet net(L, 3, 3, 4);
  net.init(77);  // second layer zero by construction
  const GlobalCompatibility mu_g = GlobalCompatibility::indicator(L);
  const Image phi = random_image(rng, 5, 5, L, -2.0, 2.0);
  const ContextState st = context_iterate(phi, Eigen::MatrixXd::Zero(L, 2), net, mu_g, 1, true, false);
  for (size_t i = 0; i < phi.size(); ++i)
    CHECK(st.phi_u.data()[i] == doctest::Approx(phi.data()[i]).epsilon(1e-15));
}

TEST_CASE("1x1 kernels reduce the net to a pointwise two-layer perceptron") {
  Rng rng(6);
  const int L = 2, hidden = 3;
  ContextMessageNet net(L, 1, 1, hidden);
  for (Eigen::Index i = 0; i < net.conv1.weights.size(); ++i) net.conv1.weights.data()[i] = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < net.conv1.bias.size(); ++i) net.conv1.bias[i] = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < net.conv2.weights.size(); ++i) net.conv2.weights.data()[i] = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < net.conv2.bias.size(); ++i) net.conv2.bias[i] = rng.uniform(-1.0, 1.0);

  const Image p = random_image(rng, 4, 4, L, 0.0, 1.0);
  const Image msg = high_order_message(p, net);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      Eigen::VectorXd in(L);
      for (int v = 0; v < L; ++v) in[v] = p.at(y, x, v);
      Eigen::VectorXd h = (net.conv1.weights.transpose() * in + net.conv1.bias).cwiseMax(0.0);
      Eigen::VectorXd out = net.conv2.weights.transpose() * h + net.conv2.bias;
      for (int v = 0; v < L; ++v)
        CHECK(msg.at(y, x, v) == doctest::Approx(out[v]).epsilon(1e-12));
    }
}

TEST_CASE("high-order message is translation equivariant away from borders") {
  Rng rng(7);
  const int L = 2;
  ContextMessageNet net(L, 3, 3, 4);
  for (Eigen::Index i = 0; i < net.conv1.weights.size(); ++i) net.conv1.weights.data()[i] = rng.uniform(-0.5, 0.5);
  for (Eigen::Index i = 0; i < net.conv2.weights.size(); ++i) net.conv2.weights.data()[i] = rng.uniform(-0.5, 0.5);

  Image p(12, 12, L, 0.5);
  p.at(4, 4, 0) = 1.0;
  p.at(4, 4, 1) = 0.0;
  Image shifted(12, 12, L, 0.5);
  shifted.at(6, 7, 0) = 1.0;
  shifted.at(6, 7, 1) = 0.0;
  const Image m1 = high_order_message(p, net);
  const Image m2 = high_order_message(shifted, net);
  const int rf = net.receptive_field() / 2;  // stay this far inside both responses
  for (int dy = -rf; dy <= rf; ++dy)
    for (int dx = -rf; dx <= rf; ++dx)
      for (int v = 0; v < L; ++v)
        CHECK(m1.at(4 + dy, 4 + dx, v) == doctest::Approx(m2.at(6 + dy, 7 + dx, v)).epsilon(1e-12));
}

TEST_CASE("hand-traced 2x2 update with a pure global coupling") {
  // two labels, no high-order net, indicator coupling, presence of label 0
  // certain: every pixel's label-0 potential drops by exactly one
  const int L = 2;
  ContextMessageNet net(L, 1, 1, 1);
  Image phi(2, 2, L);
  phi.at(0, 0, 0) = 1.0;
  phi.at(0, 0, 1) = -1.0;
  phi.at(0, 1, 0) = 0.5;
  phi.at(0, 1, 1) = 0.25;
  phi.at(1, 0, 0) = -0.5;
  phi.at(1, 0, 1) = 0.0;
  phi.at(1, 1, 0) = 2.0;
  phi.at(1, 1, 1) = -2.0;
  Eigen::MatrixXd phi_g0(L, 2);
  // presence potentials heavily favoring y_0 = 1 and y_1 = 0
  phi_g0 << 0.0, -50.0, 0.0, 50.0;
  const GlobalCompatibility mu_g = GlobalCompatibility::indicator(L);
  const ContextState st = context_iterate(phi, phi_g0, net, mu_g, 1, false, true);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      CHECK(st.phi_u.at(y, x, 0) == doctest::Approx(phi.at(y, x, 0) - 1.0).epsilon(1e-9));
      CHECK(st.phi_u.at(y, x, 1) == doctest::Approx(phi.at(y, x, 1)).epsilon(1e-9));
    }
  // the refined presence potentials subtract the aggregated pixel mass
  const Image p_hat = softmax_neg(phi);
  const Eigen::MatrixXd up = local_message_to_global(p_hat, mu_g);
  CHECK(st.phi_g(0, 1) == doctest::Approx(phi_g0(0, 1) - up(0, 1)).epsilon(1e-9));
  CHECK(st.phi_g(1, 0) == doctest::Approx(phi_g0(1, 0) - up(1, 0)).epsilon(1e-9));
}

TEST_CASE("multi-sweep forward runs but refuses to produce gradients") {
  Rng rng(8);
  const int L = 2;
  ContextMessageNet net(L, 3, 3, 2);
  net.init(1);
  const GlobalCompatibility mu_g = GlobalCompatibility::indicator(L);
  const Image phi = random_image(rng, 4, 4, L, -1.0, 1.0);
  ContextCache cache;
  const ContextState st =
      context_iterate(phi, Eigen::MatrixXd::Zero(L, 2), net, mu_g, 3, true, true, &cache);
  CHECK(st.iterations == 3);
  CHECK(cache.sweeps == 3);
  const Image g(4, 4, L, 1.0);
  CHECK_THROWS(context_backward(g, Eigen::MatrixXd(), net, mu_g, cache));
}

TEST_CASE("analytic gradients match central finite differences") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull})
    CHECK(grad_check(CheckComponent::Context, seed) < 1e-5);
}
