#include "gcrf/io.hpp"

#include <png.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gcrf {

namespace {

void write_u32(std::ostream& out, uint32_t v) {
  const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                        static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const std::string& path) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("truncated payload: " + path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, const float* data, size_t n) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

void read_f32(std::istream& in, float* data, size_t n, const std::string& path) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
  if (!in) throw std::runtime_error("truncated payload: " + path);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  return out;
}

void expect_magic(std::istream& in, const char* magic, const std::string& path) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0)
    throw std::runtime_error("magic mismatch (expected " + std::string(magic) + "): " + path);
}

// Skips PNM whitespace and '#' comments, returns the next integer.
int pnm_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = in.get();
    c = in.get();
  }
  int v = 0;
  bool any = false;
  while (std::isdigit(c)) {
    v = v * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw std::runtime_error("corrupt PNM header at offset " +
                                     std::to_string(in.tellg()) + ": " + path);
  return v;
}

Image load_ppm(std::ifstream& in, const std::string& path) {
  const int w = pnm_int(in, path), h = pnm_int(in, path), maxval = pnm_int(in, path);
  if (maxval != 255) throw std::runtime_error("unsupported PPM maxval: " + path);
  std::vector<uint8_t> raw(static_cast<size_t>(h) * w * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("truncated payload: " + path);
  Image img(h, w, 3);
  for (size_t i = 0; i < raw.size(); ++i) img.data()[i] = raw[i] / 255.0;
  return img;
}

Image load_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open file: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("corrupt PNG: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int h = static_cast<int>(png_get_image_height(png, info));
  const int w = static_cast<int>(png_get_image_width(png, info));
  std::vector<uint8_t> raw(static_cast<size_t>(h) * w * 3);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = raw.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  Image img(h, w, 3);
  for (size_t i = 0; i < raw.size(); ++i) img.data()[i] = raw[i] / 255.0;
  return img;
}

}  // namespace

void save_score_map(const std::string& path, const Image& map) {
  auto out = open_out(path);
  out.write("SCM1", 4);
  write_u32(out, static_cast<uint32_t>(map.height()));
  write_u32(out, static_cast<uint32_t>(map.width()));
  write_u32(out, static_cast<uint32_t>(map.channels()));
  std::vector<float> payload(map.size());
  for (size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<float>(map.data()[i]);
  write_f32(out, payload.data(), payload.size());
}

Image load_score_map(const std::string& path) {
  auto in = open_in(path);
  expect_magic(in, "SCM1", path);
  const uint32_t h = read_u32(in, path), w = read_u32(in, path), c = read_u32(in, path);
  if (h == 0 || w == 0 || c == 0 || h > 1u << 20 || w > 1u << 20 || c > 4096)
    throw std::runtime_error("shape mismatch: bad score map dims in " + path);
  Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  std::vector<float> payload(img.size());
  read_f32(in, payload.data(), payload.size(), path);
  for (size_t i = 0; i < payload.size(); ++i) img.data()[i] = payload[i];
  return img;
}

Image load_image(const std::string& path) {
  auto in = open_in(path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in) throw std::runtime_error("corrupt header at offset 0: " + path);
  if (magic[0] == 'P' && magic[1] == '6') return load_ppm(in, path);
  if (static_cast<uint8_t>(magic[0]) == 0x89 && magic[1] == 'P') {
    in.close();
    return load_png(path);
  }
  throw std::runtime_error("unsupported image format at offset 0: " + path);
}

void save_image_ppm(const std::string& path, const Image& img) {
  if (img.channels() != 3) throw std::invalid_argument("save_image_ppm: need 3 channels");
  auto out = open_out(path);
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<uint8_t> raw(img.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(img.data()[i], 0.0, 1.0);
    raw[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

LabelMap load_label_map(const std::string& path) {
  auto in = open_in(path);
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5')
    throw std::runtime_error("magic mismatch (expected P5): " + path);
  const int w = pnm_int(in, path), h = pnm_int(in, path), maxval = pnm_int(in, path);
  if (maxval != 255) throw std::runtime_error("unsupported PGM maxval: " + path);
  LabelMap labels(h, w);
  in.read(reinterpret_cast<char*>(labels.data.data()), static_cast<std::streamsize>(labels.data.size()));
  if (!in) throw std::runtime_error("truncated payload: " + path);
  return labels;
}

void save_label_map(const std::string& path, const LabelMap& labels) {
  auto out = open_out(path);
  out << "P5\n" << labels.width << ' ' << labels.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(labels.data.data()),
            static_cast<std::streamsize>(labels.data.size()));
}

void save_param_bundle(const std::string& path, const ParamBundle& bundle) {
  auto out = open_out(path);
  out.write("GPB1", 4);
  write_u32(out, 1);  // version
  write_u32(out, static_cast<uint32_t>(bundle.size()));
  for (const auto& [name, arr] : bundle) {
    write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<uint32_t>(arr.dims.size()));
    for (auto d : arr.dims) write_u32(out, d);
    if (arr.values.size() != arr.count())
      throw std::runtime_error("shape mismatch: bundle entry " + name);
    write_f32(out, arr.values.data(), arr.values.size());
  }
}

ParamBundle load_param_bundle(const std::string& path) {
  auto in = open_in(path);
  expect_magic(in, "GPB1", path);
  const uint32_t version = read_u32(in, path);
  if (version != 1) throw std::runtime_error("unsupported bundle version: " + path);
  const uint32_t count = read_u32(in, path);
  ParamBundle bundle;
  for (uint32_t e = 0; e < count; ++e) {
    const uint32_t name_len = read_u32(in, path);
    if (name_len > 4096) throw std::runtime_error("corrupt bundle entry name: " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("truncated payload: " + path);
    ParamArray arr;
    const uint32_t ndim = read_u32(in, path);
    if (ndim > 8) throw std::runtime_error("corrupt bundle entry dims: " + path);
    arr.dims.resize(ndim);
    for (auto& d : arr.dims) d = read_u32(in, path);
    arr.values.resize(arr.count());
    read_f32(in, arr.values.data(), arr.values.size(), path);
    bundle.emplace(std::move(name), std::move(arr));
  }
  return bundle;
}

namespace {

ParamArray to_array(const double* data, size_t n, std::vector<uint32_t> dims) {
  ParamArray arr;
  arr.dims = std::move(dims);
  arr.values.resize(n);
  for (size_t i = 0; i < n; ++i) arr.values[i] = static_cast<float>(data[i]);
  return arr;
}

void from_array(const ParamBundle& bundle, const std::string& name, double* data, size_t n,
                const std::vector<uint32_t>& dims) {
  const auto it = bundle.find(name);
  if (it == bundle.end()) throw std::runtime_error("bundle missing component: " + name);
  if (it->second.dims != dims || it->second.values.size() != n)
    throw std::runtime_error("shape mismatch: bundle entry " + name);
  for (size_t i = 0; i < n; ++i) data[i] = it->second.values[i];
}

}  // namespace

ParamBundle model_to_bundle(const Model& model) {
  const Model& m = model;
  ParamBundle b;
  const uint32_t L = static_cast<uint32_t>(m.cfg.labels);
  b["meta.arch"] = {{1}, {static_cast<float>(static_cast<int>(m.arch))}};
  b["meta.labels"] = {{1}, {static_cast<float>(L)}};
  b["context.conv1.weights"] = to_array(m.net.conv1.weights.data(),
                                        static_cast<size_t>(m.net.conv1.weights.size()),
                                        {static_cast<uint32_t>(m.net.conv1.weights.rows()),
                                         static_cast<uint32_t>(m.net.conv1.weights.cols())});
  b["context.conv1.bias"] = to_array(m.net.conv1.bias.data(),
                                     static_cast<size_t>(m.net.conv1.bias.size()),
                                     {static_cast<uint32_t>(m.net.conv1.bias.size())});
  b["context.conv2.weights"] = to_array(m.net.conv2.weights.data(),
                                        static_cast<size_t>(m.net.conv2.weights.size()),
                                        {static_cast<uint32_t>(m.net.conv2.weights.rows()),
                                         static_cast<uint32_t>(m.net.conv2.weights.cols())});
  b["context.conv2.bias"] = to_array(m.net.conv2.bias.data(),
                                     static_cast<size_t>(m.net.conv2.bias.size()),
                                     {static_cast<uint32_t>(m.net.conv2.bias.size())});
  b["context.mu_g"] = to_array(m.mu_g.data(), m.mu_g.size(), {L, L, 2});
  const double affine[2] = {m.g_scale, m.g_bias};
  b["context.global_affine"] = to_array(affine, 2, {2});
  b["guidance.mu"] = to_array(m.guidance.mu.data(), static_cast<size_t>(m.guidance.mu.size()), {L, L});
  const double misc[4] = {m.guidance.lambda, static_cast<double>(m.guidance.filter_cfg.radius),
                          m.guidance.filter_cfg.epsilon, static_cast<double>(m.guidance.iters)};
  b["guidance.settings"] = to_array(misc, 4, {4});
  return b;
}

void bundle_to_model(const ParamBundle& bundle, Model& model) {
  static const char* known[] = {"meta.arch", "meta.labels", "context.conv1.weights",
                                "context.conv1.bias", "context.conv2.weights", "context.conv2.bias",
                                "context.mu_g", "context.global_affine", "guidance.mu",
                                "guidance.settings"};
  for (const auto& [name, arr] : bundle) {
    bool ok = false;
    for (const char* k : known) ok = ok || name == k;
    if (!ok) throw std::runtime_error("unknown component in bundle: " + name);
  }

  const auto meta = bundle.find("meta.labels");
  if (meta == bundle.end() || meta->second.values.size() != 1)
    throw std::runtime_error("bundle missing component: meta.labels");
  const uint32_t L = static_cast<uint32_t>(meta->second.values[0]);
  if (static_cast<int>(L) != model.cfg.labels)
    throw std::runtime_error("shape mismatch: bundle label count differs from configuration");
  model.arch = static_cast<Arch>(static_cast<int>(bundle.at("meta.arch").values.at(0)));

  from_array(bundle, "context.conv1.weights", model.net.conv1.weights.data(),
             static_cast<size_t>(model.net.conv1.weights.size()),
             {static_cast<uint32_t>(model.net.conv1.weights.rows()),
              static_cast<uint32_t>(model.net.conv1.weights.cols())});
  from_array(bundle, "context.conv1.bias", model.net.conv1.bias.data(),
             static_cast<size_t>(model.net.conv1.bias.size()),
             {static_cast<uint32_t>(model.net.conv1.bias.size())});
  from_array(bundle, "context.conv2.weights", model.net.conv2.weights.data(),
             static_cast<size_t>(model.net.conv2.weights.size()),
             {static_cast<uint32_t>(model.net.conv2.weights.rows()),
              static_cast<uint32_t>(model.net.conv2.weights.cols())});
  from_array(bundle, "context.conv2.bias", model.net.conv2.bias.data(),
             static_cast<size_t>(model.net.conv2.bias.size()),
             {static_cast<uint32_t>(model.net.conv2.bias.size())});
  from_array(bundle, "context.mu_g", model.mu_g.data(), model.mu_g.size(), {L, L, 2});
  double affine[2];
  from_array(bundle, "context.global_affine", affine, 2, {2});
  model.g_scale = affine[0];
  model.g_bias = affine[1];
  from_array(bundle, "guidance.mu", model.guidance.mu.data(),
             static_cast<size_t>(model.guidance.mu.size()), {L, L});
  double misc[4];
  from_array(bundle, "guidance.settings", misc, 4, {4});
  model.guidance.lambda = misc[0];
  model.guidance.filter_cfg.radius = static_cast<int>(misc[1]);
  model.guidance.filter_cfg.epsilon = misc[2];
  model.guidance.iters = static_cast<int>(misc[3]);
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestEntry e;
    if (!std::getline(ss, e.image, '\t') || !std::getline(ss, e.labels, '\t') ||
        !std::getline(ss, e.unary, '\t'))
      throw std::runtime_error("manifest line needs image<TAB>labels<TAB>unary: " + line);
    e.image = (base / e.image).string();
    e.labels = (base / e.labels).string();
    e.unary = (base / e.unary).string();
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open manifest for writing: " + path);
  for (const auto& e : entries) out << e.image << '\t' << e.labels << '\t' << e.unary << '\n';
}

std::vector<SyntheticSample> load_samples(const std::vector<ManifestEntry>& entries) {
  std::vector<SyntheticSample> samples;
  samples.reserve(entries.size());
  for (const auto& e : entries) {
    SyntheticSample s;
    s.image = load_image(e.image);
    s.labels = load_label_map(e.labels);
    s.unary = load_score_map(e.unary);
    samples.push_back(std::move(s));
  }
  return samples;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto as_int = [&] { return std::stoi(value); };
  const auto as_double = [&] { return std::stod(value); };
  if (key == "radius") radius = as_int();
  else if (key == "epsilon") epsilon = as_double();
  else if (key == "subsample") subsample = as_int();
  else if (key == "lambda") lambda = as_double();
  else if (key == "iters") iters = as_int();
  else if (key == "context.k") context_k = as_int();
  else if (key == "net.k1") net_k1 = as_int();
  else if (key == "net.k2") net_k2 = as_int();
  else if (key == "net.channels") net_channels = as_int();
  else if (key == "train.lr") train_lr = as_double();
  else if (key == "train.decay") train_decay = as_double();
  else if (key == "train.momentum") train_momentum = as_double();
  else if (key == "train.epochs") train_epochs = as_int();
  else if (key == "seed") seed = std::stoull(value);
  else throw std::runtime_error("unknown config key: " + key);
}

ModelConfig RunConfig::model_config(int labels) const {
  ModelConfig cfg;
  cfg.labels = labels;
  cfg.net_k1 = net_k1;
  cfg.net_k2 = net_k2;
  cfg.net_channels = net_channels;
  cfg.context_iters = context_k;
  cfg.filter_cfg = {.radius = radius, .epsilon = epsilon, .subsample = 1};
  cfg.lambda = lambda;
  cfg.guidance_iters = iters;
  return cfg;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.learning_rate = train_lr;
  cfg.weight_decay = train_decay;
  cfg.momentum = train_momentum;
  cfg.epochs = train_epochs;
  cfg.seed = seed;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) throw std::runtime_error("bad config line: " + line);
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace gcrf
