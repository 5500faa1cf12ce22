#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gcrf/context_crf.hpp"
#include "gcrf/guidance_crf.hpp"
#include "gcrf/image.hpp"

namespace gcrf {

inline constexpr uint8_t kIgnoreLabel = 255;

/// Deterministic generator used everywhere randomness is needed: fixed
/// splitmix64/xoshiro-free stream so runs are reproducible across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  uint64_t next();
  double uniform();                       // [0,1)
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);        // inclusive bounds
  double normal(double sigma = 1.0);

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Loss and metrics

struct LossResult {
  double loss = 0.0;
  Image grad_phi;
};

/// Mean over non-ignored pixels of -log softmax(-phi)[label], with the
/// analytic gradient w.r.t. phi.
LossResult cross_entropy_loss(const Image& phi, const LabelMap& labels);

LabelMap argmax_labels(const Image& phi);

struct IouResult {
  std::vector<double> per_class;  // NaN for classes absent from pred and truth
  double mean = 0.0;
};

IouResult mean_iou(const LabelMap& pred, const LabelMap& truth, int labels);

/// IoU restricted to a band of the given half-width (Chebyshev) around the
/// true inter-class boundaries.
IouResult trimap_iou(const LabelMap& pred, const LabelMap& truth, int labels, int band = 3);

// ---------------------------------------------------------------------------
// Optimizer

struct ParamView {
  std::string name;
  double* data = nullptr;
  size_t size = 0;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  double momentum = 0.9;
  int epochs = 10;
  uint64_t seed = 1;

  void validate() const {
    if (learning_rate < 0 || weight_decay < 0) throw std::invalid_argument("train: negative rate");
    if (momentum < 0 || momentum >= 1) throw std::invalid_argument("train: momentum must be in [0,1)");
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  }
};

/// v <- momentum*v - lr*(g + decay*p); p <- p + v.
class SgdOptimizer {
 public:
  SgdOptimizer(const std::vector<ParamView>& params, const TrainConfig& cfg);
  void step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads);

 private:
  TrainConfig cfg_;
  std::vector<std::vector<double>> velocity_;
};

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticConfig {
  int count = 200;
  int height = 64, width = 64;
  int labels = 4;
  uint64_t seed = 1;
  double noise_sigma = 1.0;  // additive unary noise
  int jitter = 2;            // max boundary displacement in pixels
  double unary_margin = 2.5; // potential gap between true and false labels
};

struct SyntheticSample {
  Image image;      // H x W x 3 guide in [0,1]
  LabelMap labels;  // ground truth
  Image unary;      // noisy potentials, H x W x L
};

/// Colored shapes on a textured background. Class colors are distinctive,
/// classes appear in a stereotyped vertical order (context cue) and unaries
/// are the true potentials corrupted by noise and boundary jitter.
std::vector<SyntheticSample> make_synthetic_dataset(const SyntheticConfig& cfg);

// ---------------------------------------------------------------------------
// Model

enum class Arch { Unary, A, B, C };

Arch arch_from_string(const std::string& s);
std::string arch_to_string(Arch a);

struct ModelConfig {
  int labels = 4;
  int net_k1 = 15, net_k2 = 15, net_channels = 32;
  int context_iters = 1;
  GuidedFilterConfig filter_cfg{.radius = 50, .epsilon = 1.0, .subsample = 1};
  double lambda = 1.0;
  int guidance_iters = 3;
};

/// The trainable pipeline: context CRF (high-order net, presence nodes)
/// followed by the guidance CRF, with which parts are active selected by
/// the architecture setting.
struct Model {
  Arch arch = Arch::C;
  ModelConfig cfg;

  ContextMessageNet net;
  GlobalCompatibility mu_g;
  double g_scale = 1.0, g_bias = 0.0;
  GuidanceParams guidance;

  Model() = default;
  Model(Arch a, const ModelConfig& c, uint64_t seed);

  bool use_highorder() const { return arch != Arch::Unary; }
  bool use_global() const { return arch == Arch::B || arch == Arch::C; }
  bool use_guidance() const { return arch == Arch::C; }

  std::vector<ParamView> param_views();

  /// Inference-mode refinement of a unary potential map.
  Image infer(const Image& unary, const Image& guide, bool fast = false) const;
};

struct ModelGrads {
  ContextMessageNetGrads net;
  GlobalCompatibility mu_g;
  double g_scale = 0.0, g_bias = 0.0;
  Eigen::MatrixXd mu;
  double lambda = 0.0;

  explicit ModelGrads(Model& m);
  std::vector<ParamView> views(const Model& m);
  void clear();
};

/// Forward + backward through the enabled components for one sample.
/// Returns the loss; gradients are accumulated into `grads`.
double model_loss_and_grads(Model& model, const SyntheticSample& sample, ModelGrads& grads);

// ---------------------------------------------------------------------------
// Training loop

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double mean_iou = 0.0;
  double trimap_iou = 0.0;
};

/// Single-threaded SGD over the train set, one sample per step, evaluating
/// on the eval set after each epoch. Deterministic for a fixed seed.
/// Throws on divergence (non-finite loss).
std::vector<EpochLog> train_pipeline(Model& model, const std::vector<SyntheticSample>& train,
                                     const std::vector<SyntheticSample>& eval,
                                     const TrainConfig& cfg);

struct EvalResult {
  double mean_iou = 0.0;
  double trimap_iou = 0.0;
};

EvalResult evaluate(const Model& model, const std::vector<SyntheticSample>& eval, bool fast = false);

void write_metric_csv(const std::string& path, const std::vector<EpochLog>& log);

// ---------------------------------------------------------------------------
// Gradient checking

enum class CheckComponent { Loss, Context, Guidance, EndToEnd };

/// Central finite differences (h = 1e-5) over every parameter and input of
/// a small fixture; returns the maximum relative error under
/// |a-b| / max(|a|,|b|,1e-8). A nonzero `perturb` is added to the first
/// analytic gradient entry before comparison — a mutation hook so the
/// verification harness can prove the check actually bites.
double grad_check(CheckComponent component, uint64_t seed, double perturb = 0.0);

}  // namespace gcrf
