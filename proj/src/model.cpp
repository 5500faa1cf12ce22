#include <cmath>
#include <numeric>

#include "gcrf/training.hpp"

namespace gcrf {

Arch arch_from_string(const std::string& s) {
  if (s == "unary" || s == "Unary") return Arch::Unary;
  if (s == "A" || s == "a") return Arch::A;
  if (s == "B" || s == "b") return Arch::B;
  if (s == "C" || s == "c") return Arch::C;
  throw std::invalid_argument("unknown architecture setting: " + s);
}

std::string arch_to_string(Arch a) {
  switch (a) {
    case Arch::Unary: return "unary";
    case Arch::A: return "A";
    case Arch::B: return "B";
    case Arch::C: return "C";
  }
  return "?";
}

Model::Model(Arch a, const ModelConfig& c, uint64_t seed) : arch(a), cfg(c) {
  net = ContextMessageNet(cfg.labels, cfg.net_k1, cfg.net_k2, cfg.net_channels);
  net.init(seed);
  mu_g = GlobalCompatibility::indicator(cfg.labels);
  guidance.mu = potts_init(cfg.labels);
  guidance.lambda = cfg.lambda;
  guidance.filter_cfg = cfg.filter_cfg;
  guidance.iters = cfg.guidance_iters;
}

std::vector<ParamView> Model::param_views() {
  std::vector<ParamView> v;
  if (use_highorder()) {
    v.push_back({"net.w1", net.conv1.weights.data(), static_cast<size_t>(net.conv1.weights.size())});
    v.push_back({"net.b1", net.conv1.bias.data(), static_cast<size_t>(net.conv1.bias.size())});
    v.push_back({"net.w2", net.conv2.weights.data(), static_cast<size_t>(net.conv2.weights.size())});
    v.push_back({"net.b2", net.conv2.bias.data(), static_cast<size_t>(net.conv2.bias.size())});
  }
  if (use_global()) {
    v.push_back({"mu_g", mu_g.data(), mu_g.size()});
    v.push_back({"g_scale", &g_scale, 1});
    v.push_back({"g_bias", &g_bias, 1});
  }
  if (use_guidance())
    v.push_back({"mu", guidance.mu.data(), static_cast<size_t>(guidance.mu.size())});
  return v;
}

Image Model::infer(const Image& unary, const Image& guide, bool fast) const {
  Image phi = unary;
  if (use_highorder() || use_global()) {
    const Eigen::MatrixXd phi_g0 =
        use_global() ? global_unary_from_local(phi, g_scale, g_bias) : Eigen::MatrixXd::Zero(cfg.labels, 2);
    ContextState st = context_iterate(phi, phi_g0, net, mu_g, cfg.context_iters,
                                      use_highorder(), use_global());
    phi = std::move(st.phi_u);
  }
  if (use_guidance()) phi = guidance_infer(phi, guide, guidance, fast);
  return phi;
}

ModelGrads::ModelGrads(Model& m)
    : net(m.net),
      mu_g(m.cfg.labels),
      mu(Eigen::MatrixXd::Zero(m.guidance.mu.rows(), m.guidance.mu.cols())) {}

std::vector<ParamView> ModelGrads::views(const Model& m) {
  std::vector<ParamView> v;
  if (m.use_highorder()) {
    v.push_back({"net.w1", net.w1.data(), static_cast<size_t>(net.w1.size())});
    v.push_back({"net.b1", net.b1.data(), static_cast<size_t>(net.b1.size())});
    v.push_back({"net.w2", net.w2.data(), static_cast<size_t>(net.w2.size())});
    v.push_back({"net.b2", net.b2.data(), static_cast<size_t>(net.b2.size())});
  }
  if (m.use_global()) {
    v.push_back({"mu_g", mu_g.data(), mu_g.size()});
    v.push_back({"g_scale", &g_scale, 1});
    v.push_back({"g_bias", &g_bias, 1});
  }
  if (m.use_guidance()) v.push_back({"mu", mu.data(), static_cast<size_t>(mu.size())});
  return v;
}

void ModelGrads::clear() {
  net.w1.setZero();
  net.b1.setZero();
  net.w2.setZero();
  net.b2.setZero();
  std::fill(mu_g.data(), mu_g.data() + mu_g.size(), 0.0);
  g_scale = g_bias = 0.0;
  mu.setZero();
  lambda = 0.0;
}

double model_loss_and_grads(Model& model, const SyntheticSample& sample, ModelGrads& grads) {
  const bool ctx = model.use_highorder() || model.use_global();

  GlobalUnaryCache gu_cache;
  ContextCache ctx_cache;
  Image phi = sample.unary;
  if (ctx) {
    const Eigen::MatrixXd phi_g0 =
        model.use_global() ? global_unary_from_local(phi, model.g_scale, model.g_bias, &gu_cache)
                           : Eigen::MatrixXd::Zero(model.cfg.labels, 2);
    ContextState st = context_iterate(sample.unary, phi_g0, model.net, model.mu_g, 1,
                                      model.use_highorder(), model.use_global(), &ctx_cache);
    phi = std::move(st.phi_u);
  }

  GuidanceCache g_cache;
  if (model.use_guidance()) {
    GuidanceParams train_params = model.guidance;
    train_params.filter_cfg.subsample = 1;  // training always runs the exact path
    auto plan = std::make_shared<GuidedFilterPlan>(sample.image, train_params.filter_cfg);
    phi = guidance_forward(phi, std::move(plan), train_params, &g_cache);
  }

  LossResult loss = cross_entropy_loss(phi, sample.labels);

  Image grad_phi = std::move(loss.grad_phi);
  if (model.use_guidance()) {
    GuidanceParams train_params = model.guidance;
    train_params.filter_cfg.subsample = 1;
    GuidanceGrads gg = guidance_backward(grad_phi, train_params, g_cache);
    grads.mu += gg.grad_mu;
    grads.lambda += gg.grad_lambda;
    grad_phi = std::move(gg.grad_phi_u);
  }
  if (ctx) {
    ContextGrads cg = context_backward(grad_phi, Eigen::MatrixXd(), model.net, model.mu_g, ctx_cache);
    if (model.use_highorder()) {
      grads.net.w1 += cg.net.w1;
      grads.net.b1 += cg.net.b1;
      grads.net.w2 += cg.net.w2;
      grads.net.b2 += cg.net.b2;
    }
    grad_phi = std::move(cg.grad_phi);
    if (model.use_global()) {
      for (size_t i = 0; i < grads.mu_g.size(); ++i) grads.mu_g.data()[i] += cg.mu_g.data()[i];
      global_unary_backward(cg.grad_phi_g, gu_cache, model.g_scale, grad_phi, grads.g_scale,
                            grads.g_bias);
    }
  }
  return loss.loss;
}

EvalResult evaluate(const Model& model, const std::vector<SyntheticSample>& eval, bool fast) {
  if (eval.empty()) return {};
  double miou = 0.0, tiou = 0.0;
  for (const auto& s : eval) {
    const LabelMap pred = argmax_labels(model.infer(s.unary, s.image, fast));
    miou += mean_iou(pred, s.labels, model.cfg.labels).mean;
    tiou += trimap_iou(pred, s.labels, model.cfg.labels).mean;
  }
  return {miou / eval.size(), tiou / eval.size()};
}

std::vector<EpochLog> train_pipeline(Model& model, const std::vector<SyntheticSample>& train,
                                     const std::vector<SyntheticSample>& eval,
                                     const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train: empty dataset");

  std::vector<ParamView> params = model.param_views();
  ModelGrads grads(model);
  SgdOptimizer opt(params, cfg);
  Rng rng(cfg.seed);

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochLog> log;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = rng.next() % i;
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    for (const size_t idx : order) {
      grads.clear();
      const double loss = model_loss_and_grads(model, train[idx], grads);
      if (!std::isfinite(loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", sample " + std::to_string(idx));
      loss_sum += loss;
      opt.step(params, grads.views(model));
    }
    const EvalResult ev = evaluate(model, eval.empty() ? train : eval);
    log.push_back({epoch, loss_sum / train.size(), ev.mean_iou, ev.trimap_iou});
  }
  return log;
}

}  // namespace gcrf
