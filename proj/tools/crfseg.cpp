// Command-line front end: inference, training, benchmarking and the
// self-verification suite. Exit codes: 0 success, 1 verification failure,
// 2 usage or input error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>

#include "gcrf/bench.hpp"
#include "gcrf/io.hpp"
#include "gcrf/training.hpp"

namespace {

gcrf::RunConfig read_config(const std::string& path) {
  if (path.empty()) return {};
  return gcrf::load_run_config(path);
}

int cmd_infer(const std::string& unary_path, const std::string& image_path,
              const std::string& params_path, const std::string& config_path,
              const std::string& out_path, const std::string& out_label_path, bool fast) {
  const gcrf::RunConfig rc = read_config(config_path);
  gcrf::Image unary = gcrf::load_score_map(unary_path);
  const gcrf::Image guide = gcrf::load_image(image_path);

  // coarse-to-fine: score maps produced at reduced resolution are
  // up-sampled to the guide's size before refinement
  if (unary.height() < guide.height() || unary.width() < guide.width())
    unary = gcrf::bilinear_resize(unary, guide.height(), guide.width());
  if (unary.height() != guide.height() || unary.width() != guide.width())
    throw std::runtime_error("unary dimensions exceed the image dimensions");

  gcrf::Model model(gcrf::Arch::C, rc.model_config(unary.channels()), rc.seed);
  gcrf::bundle_to_model(gcrf::load_param_bundle(params_path), model);
  if (fast && model.guidance.filter_cfg.subsample <= 1)
    model.guidance.filter_cfg.subsample = rc.subsample > 1 ? rc.subsample : 4;

  const gcrf::Image refined = model.infer(unary, guide, fast);
  if (!out_path.empty()) gcrf::save_score_map(out_path, refined);
  if (!out_label_path.empty()) gcrf::save_label_map(out_label_path, gcrf::argmax_labels(refined));
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& arch_str, const std::string& out_path,
              const std::string& log_path) {
  const gcrf::RunConfig rc = read_config(config_path);
  const auto entries = gcrf::load_manifest(manifest_path);
  const auto samples = gcrf::load_samples(entries);
  if (samples.empty()) throw std::runtime_error("manifest is empty: nothing to train on");
  const int labels = samples.front().unary.channels();

  gcrf::Model model(gcrf::arch_from_string(arch_str), rc.model_config(labels), rc.seed);
  const auto log = gcrf::train_pipeline(model, samples, {}, rc.train_config());

  if (!out_path.empty()) gcrf::save_param_bundle(out_path, gcrf::model_to_bundle(model));
  if (!log_path.empty()) gcrf::write_metric_csv(log_path, log);
  std::printf("trained %s: %d epochs, final loss %.6f, mean IoU %.4f\n", arch_str.c_str(),
              static_cast<int>(log.size()), log.back().loss, log.back().mean_iou);
  return 0;
}

int cmd_synth(const std::string& out_dir, int count, int height, int width, int labels,
              uint64_t seed) {
  gcrf::SyntheticConfig cfg;
  cfg.count = count;
  cfg.height = height;
  cfg.width = width;
  cfg.labels = labels;
  cfg.seed = seed;
  const auto samples = gcrf::make_synthetic_dataset(cfg);

  std::filesystem::create_directories(out_dir);
  std::vector<gcrf::ManifestEntry> entries;
  for (size_t i = 0; i < samples.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%04zu", i);
    gcrf::ManifestEntry e{std::string(stem) + ".ppm", std::string(stem) + ".pgm",
                          std::string(stem) + ".scm"};
    const auto base = std::filesystem::path(out_dir);
    gcrf::save_image_ppm((base / e.image).string(), samples[i].image);
    gcrf::save_label_map((base / e.labels).string(), samples[i].labels);
    gcrf::save_score_map((base / e.unary).string(), samples[i].unary);
    entries.push_back(std::move(e));
  }
  gcrf::save_manifest((std::filesystem::path(out_dir) / "manifest.tsv").string(), entries);
  std::printf("wrote %zu samples to %s\n", samples.size(), out_dir.c_str());
  return 0;
}

gcrf::Image random_guide(gcrf::Rng& rng, int h, int w) {
  gcrf::Image img(h, w, 3);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  return img;
}

int cmd_bench(const std::string& size_str, int radius, int reps, bool compare_dense) {
  int h = 0, w = 0;
  if (std::sscanf(size_str.c_str(), "%dx%d", &h, &w) != 2 || h < 4 || w < 4)
    throw CLI::ValidationError("--size", "expected HxW with H,W >= 4");

  gcrf::Rng rng(7);
  const gcrf::Image guide = random_guide(rng, h, w);
  gcrf::Image q(h, w, 4);
  for (size_t i = 0; i < q.size(); ++i) q.data()[i] = rng.uniform();

  const double guided_s = gcrf::median_seconds(
      reps, [&] { gcrf::guided_message_pass(guide, q, radius, 1.0); });
  std::printf("guided message pass  %4dx%-4d radius %-3d  median %.6f s\n", h, w, radius,
              guided_s);

  if (compare_dense) {
    const int cap = 64;
    const int dh = std::min(h, cap), dw = std::min(w, cap);
    gcrf::Rng rng2(7);
    const gcrf::Image dguide = random_guide(rng2, dh, dw);
    gcrf::Image dq(dh, dw, 4);
    for (size_t i = 0; i < dq.size(); ++i) dq.data()[i] = rng2.uniform();
    const double dense_s = gcrf::median_seconds(
        reps, [&] { gcrf::dense_pairwise_message(dguide, dq); });
    const double guided_small_s = gcrf::median_seconds(
        reps, [&] { gcrf::guided_message_pass(dguide, dq, radius, 1.0); });
    std::printf("dense pairwise pass  %4dx%-4d            median %.6f s\n", dh, dw, dense_s);
    std::printf("speedup at %dx%d: %.1fx\n", dh, dw, dense_s / guided_small_s);
  }
  return 0;
}

int cmd_check(const std::string& component, double perturb) {
  struct Row {
    const char* name;
    double err;
    double tol;
  };
  std::vector<Row> rows;
  const bool all = component == "all";

  if (all || component == "guided") {
    // coefficient algorithm vs the explicit dense weight matrix
    double worst = 0.0;
    gcrf::Rng rng(11);
    for (int radius : {1, 2, 3}) {
      for (double eps : {0.1, 1.0, 10.0}) {
        const gcrf::Image guide = random_guide(rng, 12, 12);
        gcrf::Image p(12, 12, 2);
        for (size_t i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform();
        const gcrf::GuidedFilterConfig cfg{.radius = radius, .epsilon = eps, .subsample = 1};
        const gcrf::GuidedFilterPlan plan(guide, cfg);
        const gcrf::Image fast = gcrf::guided_filter(plan, p);
        const Eigen::MatrixXd W = gcrf::guided_weight_matrix(guide, cfg);
        for (int c = 0; c < p.channels(); ++c) {
          Eigen::VectorXd col(144), ref(144);
          for (int i = 0; i < 144; ++i) col[i] = p.data()[static_cast<size_t>(i) * 2 + c];
          ref = W * col;
          for (int i = 0; i < 144; ++i)
            worst = std::max(worst,
                             std::abs(ref[i] - fast.data()[static_cast<size_t>(i) * 2 + c]));
        }
      }
    }
    rows.push_back({"guided oracle equivalence", worst + perturb, 1e-6});
  }
  if (all || component == "loss")
    rows.push_back({"loss gradient", gcrf::grad_check(gcrf::CheckComponent::Loss, 3, perturb), 1e-5});
  if (all || component == "context")
    rows.push_back(
        {"context gradient", gcrf::grad_check(gcrf::CheckComponent::Context, 3, perturb), 1e-5});
  if (all || component == "guidance")
    rows.push_back(
        {"guidance gradient", gcrf::grad_check(gcrf::CheckComponent::Guidance, 3, perturb), 1e-5});
  if (all)
    rows.push_back(
        {"end-to-end gradient", gcrf::grad_check(gcrf::CheckComponent::EndToEnd, 3, perturb), 1e-4});

  if (rows.empty()) throw CLI::ValidationError("--component", "unknown component: " + component);

  bool ok = true;
  std::printf("%-28s %-14s %-10s %s\n", "check", "max error", "tolerance", "status");
  for (const auto& r : rows) {
    const bool pass = r.err <= r.tol;
    ok = ok && pass;
    std::printf("%-28s %-14.3e %-10.0e %s\n", r.name, r.err, r.tol, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coarse-to-fine CRF segmentation refinement"};
  app.require_subcommand(1);

  std::string unary_path, image_path, params_path, config_path, out_path, out_label_path;
  bool fast = false;
  auto* infer = app.add_subcommand("infer", "refine a score map against its image");
  infer->add_option("--unary", unary_path, "input score map (.scm)")->required();
  infer->add_option("--image", image_path, "guidance image (PPM or PNG)")->required();
  infer->add_option("--params", params_path, "trained parameter bundle")->required();
  infer->add_option("--config", config_path, "key=value run configuration");
  infer->add_option("--out", out_path, "refined score map output");
  infer->add_option("--out-label", out_label_path, "argmax label map output (PGM)");
  infer->add_flag("--fast", fast, "subsampled guided-filter coefficients");

  std::string manifest_path, arch_str = "C", log_path;
  auto* train = app.add_subcommand("train", "train the pipeline on a manifest");
  train->add_option("--manifest", manifest_path, "dataset manifest (TSV)")->required();
  train->add_option("--config", config_path, "key=value run configuration");
  train->add_option("--arch", arch_str, "unary|A|B|C")
      ->check(CLI::IsMember({"unary", "A", "B", "C"}));
  train->add_option("--out", out_path, "parameter bundle output");
  train->add_option("--log", log_path, "per-epoch metric CSV output");

  std::string out_dir = "dataset";
  int count = 200, height = 64, width = 64, labels = 4;
  uint64_t seed = 1;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset and manifest");
  synth->add_option("--out-dir", out_dir, "output directory");
  synth->add_option("--count", count, "sample count");
  synth->add_option("--height", height, "sample height");
  synth->add_option("--width", width, "sample width");
  synth->add_option("--labels", labels, "label count");
  synth->add_option("--seed", seed, "generator seed");

  std::string size_str = "512x512";
  int radius = 50, reps = 3;
  bool compare_dense = false;
  auto* bench = app.add_subcommand("bench", "time the guided message pass");
  bench->add_option("--size", size_str, "image size HxW");
  bench->add_option("--radius", radius, "filter radius");
  bench->add_option("--reps", reps, "repetitions (median reported)")->check(CLI::PositiveNumber);
  bench->add_flag("--compare-dense", compare_dense, "also time the dense pairwise pass");

  std::string component = "all";
  double perturb = 0.0;
  auto* check = app.add_subcommand("check", "run the verification suite");
  check->add_option("--component", component, "all|guided|guidance|context|loss");
  check->add_option("--perturb", perturb,
                    "offset added to one analytic result (harness mutation hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (infer->parsed())
      return cmd_infer(unary_path, image_path, params_path, config_path, out_path, out_label_path,
                       fast);
    if (train->parsed()) return cmd_train(manifest_path, config_path, arch_str, out_path, log_path);
    if (synth->parsed()) return cmd_synth(out_dir, count, height, width, labels, seed);
    if (bench->parsed()) return cmd_bench(size_str, radius, reps, compare_dense);
    if (check->parsed()) return cmd_check(component, perturb);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
