#include <cmath>
#include <functional>

#include "gcrf/training.hpp"

namespace gcrf {

namespace {

constexpr double kStep = 1e-5;

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Central differences over every entry of every view against the already
// accumulated analytic gradients.
double fd_max_err(const std::vector<ParamView>& params, const std::vector<ParamView>& analytic,
                  const std::function<double()>& loss_fn, double perturb) {
  double worst = 0.0;
  for (size_t g = 0; g < params.size(); ++g) {
    for (size_t i = 0; i < params[g].size; ++i) {
      double& p = params[g].data[i];
      const double saved = p;
      p = saved + kStep;
      const double up = loss_fn();
      p = saved - kStep;
      const double dn = loss_fn();
      p = saved;
      const double fd = (up - dn) / (2.0 * kStep);
      const double a = analytic[g].data[i] + (g == 0 && i == 0 ? perturb : 0.0);
      worst = std::max(worst, rel_err(fd, a));
    }
  }
  return worst;
}

LabelMap random_labels(Rng& rng, int h, int w, int L) {
  LabelMap m(h, w);
  for (auto& v : m.data) v = static_cast<uint8_t>(rng.uniform_int(0, L - 1));
  return m;
}

Image random_image(Rng& rng, int h, int w, int c, double lo, double hi) {
  Image img(h, w, c);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform(lo, hi);
  return img;
}

double check_loss(uint64_t seed, double perturb) {
  Rng rng(seed);
  const int h = 4, w = 4, L = 3;
  Image phi = random_image(rng, h, w, L, -2.0, 2.0);
  const LabelMap labels = random_labels(rng, h, w, L);

  LossResult res = cross_entropy_loss(phi, labels);
  std::vector<ParamView> params{{"phi", phi.data(), phi.size()}};
  std::vector<ParamView> analytic{{"phi", res.grad_phi.data(), res.grad_phi.size()}};
  return fd_max_err(params, analytic, [&] { return cross_entropy_loss(phi, labels).loss; }, perturb);
}

double check_context(uint64_t seed, double perturb) {
  Rng rng(seed);
  const int h = 6, w = 6, L = 3;
  Image phi = random_image(rng, h, w, L, -2.0, 2.0);
  const LabelMap labels = random_labels(rng, h, w, L);

  ContextMessageNet net(L, 3, 3, 4);
  for (Eigen::Index i = 0; i < net.conv1.weights.size(); ++i) net.conv1.weights.data()[i] = rng.uniform(-0.5, 0.5);
  for (Eigen::Index i = 0; i < net.conv1.bias.size(); ++i) net.conv1.bias[i] = rng.uniform(-0.5, 0.5);
  for (Eigen::Index i = 0; i < net.conv2.weights.size(); ++i) net.conv2.weights.data()[i] = rng.uniform(-0.5, 0.5);
  for (Eigen::Index i = 0; i < net.conv2.bias.size(); ++i) net.conv2.bias[i] = rng.uniform(-0.5, 0.5);
  GlobalCompatibility mu_g(L);
  for (size_t i = 0; i < mu_g.size(); ++i) mu_g.data()[i] = rng.uniform(-1.0, 1.0);
  double g_scale = rng.uniform(0.5, 1.5), g_bias = rng.uniform(-0.5, 0.5);
  // random linear readout of the presence potentials so that path is covered
  const Eigen::MatrixXd readout = Eigen::MatrixXd::NullaryExpr(L, 2, [&] { return rng.uniform(-1.0, 1.0); });

  const auto loss_fn = [&]() -> double {
    GlobalUnaryCache gc;
    const Eigen::MatrixXd phi_g0 = global_unary_from_local(phi, g_scale, g_bias, &gc);
    ContextState st = context_iterate(phi, phi_g0, net, mu_g, 1, true, true);
    return cross_entropy_loss(st.phi_u, labels).loss + (st.phi_g.array() * readout.array()).sum();
  };

  GlobalUnaryCache gu_cache;
  ContextCache cache;
  const Eigen::MatrixXd phi_g0 = global_unary_from_local(phi, g_scale, g_bias, &gu_cache);
  ContextState st = context_iterate(phi, phi_g0, net, mu_g, 1, true, true, &cache);
  LossResult lr = cross_entropy_loss(st.phi_u, labels);
  ContextGrads cg = context_backward(lr.grad_phi, readout, net, mu_g, cache);
  double d_scale = 0.0, d_bias = 0.0;
  global_unary_backward(cg.grad_phi_g, gu_cache, g_scale, cg.grad_phi, d_scale, d_bias);

  std::vector<ParamView> params{
      {"phi", phi.data(), phi.size()},
      {"w1", net.conv1.weights.data(), static_cast<size_t>(net.conv1.weights.size())},
      {"b1", net.conv1.bias.data(), static_cast<size_t>(net.conv1.bias.size())},
      {"w2", net.conv2.weights.data(), static_cast<size_t>(net.conv2.weights.size())},
      {"b2", net.conv2.bias.data(), static_cast<size_t>(net.conv2.bias.size())},
      {"mu_g", mu_g.data(), mu_g.size()},
      {"g_scale", &g_scale, 1},
      {"g_bias", &g_bias, 1},
  };
  std::vector<ParamView> analytic{
      {"phi", cg.grad_phi.data(), cg.grad_phi.size()},
      {"w1", cg.net.w1.data(), static_cast<size_t>(cg.net.w1.size())},
      {"b1", cg.net.b1.data(), static_cast<size_t>(cg.net.b1.size())},
      {"w2", cg.net.w2.data(), static_cast<size_t>(cg.net.w2.size())},
      {"b2", cg.net.b2.data(), static_cast<size_t>(cg.net.b2.size())},
      {"mu_g", cg.mu_g.data(), cg.mu_g.size()},
      {"g_scale", &d_scale, 1},
      {"g_bias", &d_bias, 1},
  };
  return fd_max_err(params, analytic, loss_fn, perturb);
}

double check_guidance(uint64_t seed, double perturb) {
  Rng rng(seed);
  const int h = 6, w = 6, L = 3;
  Image phi_u = random_image(rng, h, w, L, -2.0, 2.0);
  const Image guide = random_image(rng, h, w, 3, 0.0, 1.0);
  const LabelMap labels = random_labels(rng, h, w, L);

  GuidanceParams params;
  params.mu = Eigen::MatrixXd::NullaryExpr(L, L, [&] { return rng.uniform(-1.0, 1.0); });
  params.lambda = 0.7;
  params.filter_cfg = {.radius = 1, .epsilon = 1.0, .subsample = 1};
  params.iters = 1;

  const auto loss_fn = [&]() -> double {
    auto plan = std::make_shared<GuidedFilterPlan>(guide, params.filter_cfg);
    return cross_entropy_loss(guidance_forward(phi_u, plan, params), labels).loss;
  };

  GuidanceCache cache;
  auto plan = std::make_shared<GuidedFilterPlan>(guide, params.filter_cfg);
  const Image phi = guidance_forward(phi_u, plan, params, &cache);
  LossResult lr = cross_entropy_loss(phi, labels);
  GuidanceGrads gg = guidance_backward(lr.grad_phi, params, cache);

  std::vector<ParamView> views{
      {"phi_u", phi_u.data(), phi_u.size()},
      {"mu", params.mu.data(), static_cast<size_t>(params.mu.size())},
      {"lambda", &params.lambda, 1},
  };
  std::vector<ParamView> analytic{
      {"phi_u", gg.grad_phi_u.data(), gg.grad_phi_u.size()},
      {"mu", gg.grad_mu.data(), static_cast<size_t>(gg.grad_mu.size())},
      {"lambda", &gg.grad_lambda, 1},
  };
  return fd_max_err(views, analytic, loss_fn, perturb);
}

double check_end_to_end(uint64_t seed, double perturb) {
  Rng rng(seed);
  const int h = 6, w = 6, L = 3;

  ModelConfig cfg;
  cfg.labels = L;
  cfg.net_k1 = cfg.net_k2 = 3;
  cfg.net_channels = 4;
  cfg.filter_cfg = {.radius = 1, .epsilon = 1.0, .subsample = 1};
  Model model(Arch::C, cfg, seed);
  for (Eigen::Index i = 0; i < model.net.conv2.weights.size(); ++i)
    model.net.conv2.weights.data()[i] = rng.uniform(-0.3, 0.3);
  for (Eigen::Index i = 0; i < model.net.conv2.bias.size(); ++i)
    model.net.conv2.bias[i] = rng.uniform(-0.3, 0.3);

  SyntheticSample sample;
  sample.image = random_image(rng, h, w, 3, 0.0, 1.0);
  sample.labels = random_labels(rng, h, w, L);
  sample.unary = random_image(rng, h, w, L, -2.0, 2.0);

  ModelGrads grads(model);
  grads.clear();
  model_loss_and_grads(model, sample, grads);

  std::vector<ParamView> params = model.param_views();
  params.push_back({"unary", sample.unary.data(), sample.unary.size()});

  // input gradient is not part of ModelGrads; recover it separately
  ContextCache ctx_cache;
  GlobalUnaryCache gu_cache;
  const Eigen::MatrixXd phi_g0 =
      global_unary_from_local(sample.unary, model.g_scale, model.g_bias, &gu_cache);
  ContextState st = context_iterate(sample.unary, phi_g0, model.net, model.mu_g, 1, true, true, &ctx_cache);
  GuidanceCache g_cache;
  auto plan = std::make_shared<GuidedFilterPlan>(sample.image, model.guidance.filter_cfg);
  const Image phi = guidance_forward(st.phi_u, plan, model.guidance, &g_cache);
  LossResult lr = cross_entropy_loss(phi, sample.labels);
  GuidanceGrads gg = guidance_backward(lr.grad_phi, model.guidance, g_cache);
  ContextGrads cg = context_backward(gg.grad_phi_u, Eigen::MatrixXd(), model.net, model.mu_g, ctx_cache);
  double d_scale = 0.0, d_bias = 0.0;
  global_unary_backward(cg.grad_phi_g, gu_cache, model.g_scale, cg.grad_phi, d_scale, d_bias);

  ModelGrads check(model);
  check.clear();
  check.net = std::move(cg.net);
  check.mu_g = std::move(cg.mu_g);
  check.g_scale = d_scale;
  check.g_bias = d_bias;
  check.mu = std::move(gg.grad_mu);
  check.lambda = gg.grad_lambda;
  std::vector<ParamView> analytic = check.views(model);
  analytic.push_back({"unary", cg.grad_phi.data(), cg.grad_phi.size()});

  const auto loss_fn = [&]() -> double {
    ModelGrads scratch(model);
    scratch.clear();
    return model_loss_and_grads(model, sample, scratch);
  };
  return fd_max_err(params, analytic, loss_fn, perturb);
}

}  // namespace

double grad_check(CheckComponent component, uint64_t seed, double perturb) {
  switch (component) {
    case CheckComponent::Loss: return check_loss(seed, perturb);
    case CheckComponent::Context: return check_context(seed, perturb);
    case CheckComponent::Guidance: return check_guidance(seed, perturb);
    case CheckComponent::EndToEnd: return check_end_to_end(seed, perturb);
  }
  throw std::invalid_argument("grad_check: unknown component");
}

}  // namespace gcrf
