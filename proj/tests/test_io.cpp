#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "gcrf/io.hpp"

using namespace gcrf;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("gcrf_io_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("score map round trip at f32 precision") {
  TempDir tmp;
  Image m(3, 3, 2);
  for (size_t i = 0; i < m.size(); ++i) m.data()[i] = 0.125 * static_cast<double>(i) - 1.0;
  save_score_map(tmp.file("a.scm"), m);
  const Image back = load_score_map(tmp.file("a.scm"));
  REQUIRE(back.same_shape(m));
  for (size_t i = 0; i < m.size(); ++i)
    CHECK(back.data()[i] == doctest::Approx(m.data()[i]).epsilon(1e-7));
}

TEST_CASE("score map loader rejects bad files") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.scm"), std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS(load_score_map(tmp.file("bad.scm")));
  Image m(2, 2, 1, 1.0);
  save_score_map(tmp.file("trunc.scm"), m);
  std::filesystem::resize_file(tmp.file("trunc.scm"), 12);
  CHECK_THROWS(load_score_map(tmp.file("trunc.scm")));
  CHECK_THROWS(load_score_map(tmp.file("missing.scm")));
}

TEST_CASE("ppm image round trip") {
  TempDir tmp;
  Image img(2, 3, 3);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(i) / 17.0;
  save_image_ppm(tmp.file("img.ppm"), img);
  const Image back = load_image(tmp.file("img.ppm"));
  REQUIRE(back.same_shape(img));
  for (size_t i = 0; i < img.size(); ++i)
    CHECK(std::abs(back.data()[i] - img.data()[i]) < 1.0 / 255.0);
}

TEST_CASE("hand-written 1x1 ppm pixel values") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("one.ppm"), std::ios::binary);
    out << "P6\n1 1\n255\n";
    const unsigned char px[3] = {255, 0, 128};
    out.write(reinterpret_cast<const char*>(px), 3);
  }
  const Image img = load_image(tmp.file("one.ppm"));
  CHECK(img.at(0, 0, 0) == doctest::Approx(1.0));
  CHECK(img.at(0, 0, 1) == doctest::Approx(0.0));
  CHECK(img.at(0, 0, 2) == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("label map round trip keeps the ignore value") {
  TempDir tmp;
  LabelMap m(2, 2, 1);
  m.at(0, 1) = 255;
  m.at(1, 0) = 3;
  save_label_map(tmp.file("l.pgm"), m);
  const LabelMap back = load_label_map(tmp.file("l.pgm"));
  CHECK(back.data == m.data);
}

TEST_CASE("param bundle round trip and validation") {
  TempDir tmp;
  Model model(Arch::C, ModelConfig{}, 3);
  model.guidance.lambda = 1.25;
  save_param_bundle(tmp.file("m.gpb"), model_to_bundle(model));
  ParamBundle bundle = load_param_bundle(tmp.file("m.gpb"));

  Model back(Arch::C, ModelConfig{}, 99);
  bundle_to_model(bundle, back);
  CHECK(back.guidance.lambda == doctest::Approx(1.25));
  const auto va = model.param_views();
  auto vb = back.param_views();
  for (size_t g = 0; g < va.size(); ++g)
    for (size_t i = 0; i < va[g].size; ++i)
      CHECK(vb[g].data[i] == doctest::Approx(va[g].data[i]).epsilon(1e-6));

  SUBCASE("unknown component name is rejected") {
    bundle["mystery.block"] = {{1}, {0.0f}};
    CHECK_THROWS_WITH_AS(bundle_to_model(bundle, back), doctest::Contains("unknown component"),
                         std::runtime_error);
  }
  SUBCASE("wrong compatibility shape is rejected") {
    bundle["guidance.mu"] = {{2, 2}, {0, 1, 1, 0}};
    CHECK_THROWS_WITH_AS(bundle_to_model(bundle, back), doctest::Contains("shape mismatch"),
                         std::runtime_error);
  }
}

TEST_CASE("manifest round trip and empty manifest") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("empty.tsv"));
    out << "# nothing here\n";
  }
  CHECK(load_manifest(tmp.file("empty.tsv")).empty());
  CHECK(load_samples({}).empty());

  const std::vector<ManifestEntry> entries{{"a.ppm", "a.pgm", "a.scm"}};
  save_manifest(tmp.file("m.tsv"), entries);
  const auto back = load_manifest(tmp.file("m.tsv"));
  REQUIRE(back.size() == 1);
  CHECK(std::filesystem::path(back[0].image).filename() == "a.ppm");
  CHECK(std::filesystem::path(back[0].unary).filename() == "a.scm");
}

TEST_CASE("run config parsing") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("run.cfg"));
    out << "# comment\nradius = 7\nepsilon=0.5\ntrain.lr=0.02\nnet.channels=16\nseed=42\n";
  }
  const RunConfig rc = load_run_config(tmp.file("run.cfg"));
  CHECK(rc.radius == 7);
  CHECK(rc.epsilon == 0.5);
  CHECK(rc.train_lr == 0.02);
  CHECK(rc.net_channels == 16);
  CHECK(rc.seed == 42);
  const ModelConfig mc = rc.model_config(5);
  CHECK(mc.labels == 5);
  CHECK(mc.filter_cfg.radius == 7);
  CHECK(mc.net_channels == 16);

  {
    std::ofstream out(tmp.file("bad.cfg"));
    out << "volume=11\n";
  }
  CHECK_THROWS(load_run_config(tmp.file("bad.cfg")));
}
