#pragma once

#include <map>
#include <string>
#include <vector>

#include "gcrf/image.hpp"
#include "gcrf/training.hpp"

namespace gcrf {

// ---------------------------------------------------------------------------
// Score maps: "SCM1", u32 height/width/channels, f32 payload, little-endian.

void save_score_map(const std::string& path, const Image& map);
Image load_score_map(const std::string& path);

// ---------------------------------------------------------------------------
// Images. Loading accepts 8-bit PNG and binary PPM (P6); gray inputs are
// expanded to 3 channels; values are mapped to [0,1]. Saving writes PPM.
// Label maps are 8-bit PGM (P5), 255 = ignore.

Image load_image(const std::string& path);
void save_image_ppm(const std::string& path, const Image& img);

LabelMap load_label_map(const std::string& path);
void save_label_map(const std::string& path, const LabelMap& labels);

// ---------------------------------------------------------------------------
// Parameter bundles: named shaped f32 arrays, "GPB1" container.

struct ParamArray {
  std::vector<uint32_t> dims;
  std::vector<float> values;

  size_t count() const {
    size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

using ParamBundle = std::map<std::string, ParamArray>;

void save_param_bundle(const std::string& path, const ParamBundle& bundle);
ParamBundle load_param_bundle(const std::string& path);

/// Serialization of a whole model. Loading validates every array's shape
/// against the model's configured architecture and rejects unknown names.
ParamBundle model_to_bundle(const Model& model);
void bundle_to_model(const ParamBundle& bundle, Model& model);

// ---------------------------------------------------------------------------
// Dataset manifests: one sample per line, tab-separated image/label/unary
// paths resolved relative to the manifest location.

struct ManifestEntry {
  std::string image, labels, unary;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

std::vector<SyntheticSample> load_samples(const std::vector<ManifestEntry>& entries);

// ---------------------------------------------------------------------------
// Run configuration: plain-text key=value file with a fixed key set.

struct RunConfig {
  int radius = 50;
  double epsilon = 1.0;
  int subsample = 4;
  double lambda = 1.0;
  int iters = 3;
  int context_k = 1;
  int net_k1 = 15, net_k2 = 15, net_channels = 32;
  double train_lr = 0.01, train_decay = 0.0005, train_momentum = 0.9;
  int train_epochs = 10;
  uint64_t seed = 1;

  void set(const std::string& key, const std::string& value);  // rejects unknown keys
  ModelConfig model_config(int labels) const;
  TrainConfig train_config() const;
};

RunConfig load_run_config(const std::string& path);

}  // namespace gcrf
