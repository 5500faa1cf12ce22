// Acceptance suite: one line per criterion, exit 0 iff all pass.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gcrf/bench.hpp"
#include "gcrf/guidance_crf.hpp"
#include "gcrf/guided_filter.hpp"
#include "gcrf/training.hpp"

using namespace gcrf;

namespace {

bool g_all_ok = true;

void report(int index, const char* name, bool pass, const std::string& detail) {
  g_all_ok = g_all_ok && pass;
  std::printf("[%s] %d. %-28s %s\n", pass ? "PASS" : "FAIL", index, name, detail.c_str());
  std::fflush(stdout);
}

double now_minus(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Image random_image(Rng& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
  Image img(h, w, c);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform(lo, hi);
  return img;
}

Eigen::VectorXd channel_vector(const Image& img, int c) {
  Eigen::VectorXd v(img.pixels());
  for (int i = 0; i < img.pixels(); ++i)
    v[i] = img.data()[static_cast<size_t>(i) * img.channels() + c];
  return v;
}

void criterion_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  int fixtures = 0;
  double worst = 0.0;
  for (int radius : {1, 2, 3})
    for (double eps : {0.1, 1.0, 10.0})
      for (int rep = 0; rep < 3; ++rep) {
        const Image guide = random_image(rng, 12, 12, 3);
        const Image p = random_image(rng, 12, 12, 2, -1.0, 1.0);
        const GuidedFilterConfig cfg{.radius = radius, .epsilon = eps, .subsample = 1};
        const GuidedFilterPlan plan(guide, cfg);
        const Image out = guided_filter(plan, p);
        const Eigen::MatrixXd W = guided_weight_matrix(guide, cfg);
        for (int c = 0; c < 2; ++c)
          worst = std::max(worst,
                           (W * channel_vector(p, c) - channel_vector(out, c)).cwiseAbs().maxCoeff());
        ++fixtures;
      }
  const double secs = now_minus(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "max |fast - oracle| %.2e over %d fixtures (tol 1e-6), %.1f s",
                worst, fixtures, secs);
  report(1, "oracle equivalence", fixtures >= 20 && worst < 1e-6 && secs < 10.0, buf);
}

void criterion_stochastic_symmetric() {
  Rng rng(102);
  double row_dev = 0.0, asym = 0.0;
  for (int rep = 0; rep < 4; ++rep) {
    const Image guide = random_image(rng, 8, 8, 3);
    // radius covering the whole image: every window coincides, counts agree
    const Eigen::MatrixXd W = guided_weight_matrix(guide, {.radius = 8, .epsilon = 1.0, .subsample = 1});
    row_dev = std::max(row_dev, (W.rowwise().sum().array() - 1.0).abs().maxCoeff());
    asym = std::max(asym, (W - W.transpose()).cwiseAbs().maxCoeff());
  }
  // row-stochasticity also holds with clipped (unequal) windows
  const Image guide = random_image(rng, 10, 10, 3);
  const Eigen::MatrixXd W = guided_weight_matrix(guide, {.radius = 2, .epsilon = 0.5, .subsample = 1});
  row_dev = std::max(row_dev, (W.rowwise().sum().array() - 1.0).abs().maxCoeff());
  char buf[160];
  std::snprintf(buf, sizeof buf, "row-sum dev %.2e (tol 1e-9), asymmetry %.2e (tol 1e-12)", row_dev,
                asym);
  report(2, "row-stochastic, symmetric W", row_dev < 1e-9 && asym < 1e-12, buf);
}

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double guidance = 0.0, context = 0.0, composed = 0.0;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    guidance = std::max(guidance, grad_check(CheckComponent::Guidance, seed));
    context = std::max(context, grad_check(CheckComponent::Context, seed));
    composed = std::max(composed, grad_check(CheckComponent::EndToEnd, seed));
  }
  const double secs = now_minus(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "guidance %.2e, context %.2e (tol 1e-5); composed %.2e (tol 1e-4), %.1f s", guidance,
                context, composed, secs);
  report(3, "gradient fidelity", guidance < 1e-5 && context < 1e-5 && composed < 1e-4 && secs < 60.0,
         buf);
}

void criterion_radius_independence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(103);
  const Image guide = random_image(rng, 512, 512, 3);
  const Image p = random_image(rng, 512, 512, 2);
  const double t5 = median_seconds(3, [&] { guided_message_pass(guide, p, 5, 1.0); });
  const double t50 = median_seconds(3, [&] { guided_message_pass(guide, p, 50, 1.0); });
  const double secs = now_minus(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "radius 50: %.3f s vs radius 5: %.3f s, ratio %.2f (tol 1.5), %.1f s",
                t50, t5, t50 / t5, secs);
  report(4, "O(1) radius property", t50 <= 1.5 * t5 && secs < 30.0, buf);
}

void criterion_speedup() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(104);
  const Image guide = random_image(rng, 64, 64, 3);
  const Image q = random_image(rng, 64, 64, 4);
  const double dense = median_seconds(3, [&] { dense_pairwise_message(guide, q); });
  const double guided = median_seconds(3, [&] { guided_message_pass(guide, q, 8, 1.0); });
  const double secs = now_minus(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "dense %.4f s / guided %.4f s = %.0fx (floor 50x), %.1f s", dense,
                guided, dense / guided, secs);
  report(5, "speedup over dense pass", dense >= 50.0 * guided && secs < 60.0, buf);
}

void criterion_fast_path() {
  Rng rng(105);
  // timing at full scale
  const Image guide = random_image(rng, 512, 512, 3);
  const Image p = random_image(rng, 512, 512, 2);
  const GuidedFilterConfig exact_cfg{.radius = 50, .epsilon = 1.0, .subsample = 1};
  const GuidedFilterConfig fast_cfg{.radius = 50, .epsilon = 1.0, .subsample = 4};
  const double t_exact = median_seconds(3, [&] {
    const GuidedFilterPlan plan(guide, exact_cfg);
    guided_filter(plan, p);
  });
  const double t_fast = median_seconds(3, [&] { guided_filter_fast(guide, p, fast_cfg); });

  // agreement on a structured fixture
  const int h = 64, w = 64, L = 2;
  Image g2(h, w, 3);
  Image phi(h, w, L);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = x < 32 ? 0.2 : 0.8;
      for (int c = 0; c < 3; ++c) g2.at(y, x, c) = v + 0.01 * rng.normal();
      phi.at(y, x, 0) = (x < 30 ? -1.0 : 1.0) + 0.2 * rng.normal();
      phi.at(y, x, 1) = -phi.at(y, x, 0);
    }
  GuidanceParams params;
  params.mu = potts_init(L);
  params.filter_cfg = {.radius = 20, .epsilon = 0.1, .subsample = 4};
  params.iters = 3;
  const LabelMap le = argmax_labels(guidance_infer(phi, g2, params, false));
  const LabelMap lf = argmax_labels(guidance_infer(phi, g2, params, true));
  int diff = 0;
  for (size_t i = 0; i < le.data.size(); ++i) diff += le.data[i] != lf.data[i];
  const double frac = static_cast<double>(diff) / static_cast<double>(le.data.size());

  char buf[160];
  std::snprintf(buf, sizeof buf, "exact %.3f s / fast %.3f s = %.1fx (floor 5x); disagreement %.2f%%",
                t_exact, t_fast, t_exact / t_fast, 100.0 * frac);
  report(6, "subsampled fast path", t_exact >= 5.0 * t_fast && frac <= 0.02, buf);
}

void criterion_ablation() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticConfig dcfg;
  dcfg.count = 250;
  dcfg.height = 64;
  dcfg.width = 64;
  dcfg.labels = 4;
  dcfg.seed = 9;
  const auto data = make_synthetic_dataset(dcfg);
  const std::vector<SyntheticSample> train(data.begin(), data.begin() + 200);
  const std::vector<SyntheticSample> test(data.begin() + 200, data.end());

  ModelConfig mcfg;
  mcfg.labels = 4;
  mcfg.net_k1 = mcfg.net_k2 = 7;
  mcfg.net_channels = 16;
  mcfg.filter_cfg = {.radius = 8, .epsilon = 0.1, .subsample = 1};
  TrainConfig tcfg;
  tcfg.epochs = 3;
  tcfg.learning_rate = 0.002;
  tcfg.weight_decay = 0.0005;
  tcfg.seed = 7;

  double miou[4] = {0}, tri[4] = {0};
  const Arch archs[4] = {Arch::Unary, Arch::A, Arch::B, Arch::C};
  for (int i = 0; i < 4; ++i) {
    Model model(archs[i], mcfg, 11);
    const auto log = train_pipeline(model, train, test, tcfg);
    miou[i] = log.back().mean_iou;
    tri[i] = log.back().trimap_iou;
  }
  const double secs = now_minus(t0);
  const bool ordered = miou[0] < miou[1] && miou[1] < miou[3] && miou[2] >= miou[1];
  const bool boundary = tri[3] > tri[0] + 0.02;
  // regression bounds pinned from the first verified run
  // (unary 0.510, A 0.784, B 0.797, C 0.801; trimap unary 0.466, C 0.651)
  const bool pinned = std::abs(miou[0] - 0.510) < 0.05 && std::abs(miou[1] - 0.784) < 0.05 &&
                      std::abs(miou[2] - 0.797) < 0.05 && std::abs(miou[3] - 0.801) < 0.05 &&
                      std::abs(tri[0] - 0.466) < 0.07 && std::abs(tri[3] - 0.651) < 0.07;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "mIoU unary %.3f < A %.3f <= B %.3f < C %.3f; trimap C %.3f vs unary %.3f, %.0f s",
                miou[0], miou[1], miou[2], miou[3], tri[3], tri[0], secs);
  report(7, "ablation ordering", ordered && boundary && pinned && secs < 900.0, buf);
}

void criterion_identities() {
  Rng rng(106);
  bool ok = true;
  std::string detail = "all identities exact";

  // untrained high-order net: context update leaves potentials unchanged
  const int L = 3;
  ContextMessageNet net(L, 5, 5, 4);
  net.init(1);
  const Image phi = random_image(rng, 6, 6, L, -2.0, 2.0);
  const GlobalCompatibility zero_mu(L);
  const ContextState st =
      context_iterate(phi, Eigen::MatrixXd::Zero(L, 2), net, zero_mu, 1, true, true);
  for (size_t i = 0; i < phi.size(); ++i) ok = ok && st.phi_u.data()[i] == phi.data()[i];
  if (!ok) detail = "context zero-net identity violated";

  // lambda = 0 guidance identity
  const Image guide = random_image(rng, 6, 6, 3);
  GuidanceParams params;
  params.mu = potts_init(L);
  params.lambda = 0.0;
  params.filter_cfg = {.radius = 2, .epsilon = 1.0, .subsample = 1};
  auto plan = std::make_shared<GuidedFilterPlan>(guide, params.filter_cfg);
  const Image out = guidance_forward(phi, plan, params);
  bool lam_ok = true;
  for (size_t i = 0; i < phi.size(); ++i) lam_ok = lam_ok && out.data()[i] == phi.data()[i];
  if (!lam_ok) detail = "guidance lambda=0 identity violated";
  ok = ok && lam_ok;

  // filtering a constant returns the constant (up to arithmetic roundoff)
  const GuidedFilterPlan plan2(guide, {.radius = 2, .epsilon = 1.0, .subsample = 1});
  const Image c = guided_filter(plan2, Image(6, 6, 1, 0.4));
  bool const_ok = true;
  for (size_t i = 0; i < c.size(); ++i) const_ok = const_ok && std::abs(c.data()[i] - 0.4) < 1e-12;
  if (!const_ok) detail = "constant preservation violated";
  ok = ok && const_ok;

  // unary architecture refines nothing
  Model model(Arch::Unary, ModelConfig{.labels = L}, 1);
  const Image refined = model.infer(phi, guide);
  bool un_ok = true;
  for (size_t i = 0; i < phi.size(); ++i) un_ok = un_ok && refined.data()[i] == phi.data()[i];
  if (!un_ok) detail = "unary passthrough violated";
  ok = ok && un_ok;

  report(8, "zero-parameter identities", ok, detail);
}

}  // namespace

int main() {
  criterion_oracle_equivalence();
  criterion_stochastic_symmetric();
  criterion_gradients();
  criterion_radius_independence();
  criterion_speedup();
  criterion_fast_path();
  criterion_ablation();
  criterion_identities();
  return g_all_ok ? 0 : 1;
}
