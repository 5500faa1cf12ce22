#include "gcrf/training.hpp"

#include <cmath>
#include <fstream>

namespace gcrf {

uint64_t Rng::next() {
  // splitmix64
  uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1));
}

double Rng::normal(double sigma) {
  if (have_spare_) {
    have_spare_ = false;
    return spare_ * sigma;
  }
  double u1 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a) * sigma;
}

LossResult cross_entropy_loss(const Image& phi, const LabelMap& labels) {
  if (phi.height() != labels.height || phi.width() != labels.width)
    throw std::invalid_argument("loss: label map dims do not match potentials");
  const int L = phi.channels();
  const Image p = softmax_neg(phi);

  LossResult res;
  res.grad_phi = Image(phi.height(), phi.width(), L);
  size_t valid = 0;
  double loss = 0.0;
  for (int i = 0; i < phi.pixels(); ++i) {
    const uint8_t y = labels.data[i];
    if (y == kIgnoreLabel) continue;
    if (y >= L) throw std::invalid_argument("loss: label out of range");
    ++valid;
    loss += -std::log(std::max(p.data()[static_cast<size_t>(i) * L + y], 1e-300));
  }
  if (valid == 0) throw std::invalid_argument("loss: all pixels ignored");
  const double inv = 1.0 / static_cast<double>(valid);
  loss *= inv;

  // d(-log p_y)/dphi_v = delta(v==y) - p_v
  for (int i = 0; i < phi.pixels(); ++i) {
    const uint8_t y = labels.data[i];
    if (y == kIgnoreLabel) continue;
    double* g = res.grad_phi.data() + static_cast<size_t>(i) * L;
    const double* pv = p.data() + static_cast<size_t>(i) * L;
    for (int v = 0; v < L; ++v) g[v] = ((v == y ? 1.0 : 0.0) - pv[v]) * inv;
  }
  res.loss = loss;
  return res;
}

LabelMap argmax_labels(const Image& phi) {
  const int L = phi.channels();
  LabelMap out(phi.height(), phi.width());
  for (int i = 0; i < phi.pixels(); ++i) {
    const double* row = phi.data() + static_cast<size_t>(i) * L;
    int best = 0;
    for (int v = 1; v < L; ++v)
      if (row[v] < row[best]) best = v;  // lowest potential wins
    out.data[i] = static_cast<uint8_t>(best);
  }
  return out;
}

namespace {

IouResult iou_over_mask(const LabelMap& pred, const LabelMap& truth, int labels,
                        const std::vector<uint8_t>& mask) {
  std::vector<size_t> inter(labels, 0), uni(labels, 0);
  for (size_t i = 0; i < truth.data.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const uint8_t t = truth.data[i];
    if (t == kIgnoreLabel) continue;
    const uint8_t p = pred.data[i];
    if (p == t) {
      ++inter[t];
      ++uni[t];
    } else {
      if (t < labels) ++uni[t];
      if (p < labels) ++uni[p];
    }
  }
  IouResult res;
  res.per_class.assign(labels, std::nan(""));
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < labels; ++c) {
    if (uni[c] == 0) continue;
    res.per_class[c] = static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    sum += res.per_class[c];
    ++present;
  }
  res.mean = present ? sum / present : 0.0;
  return res;
}

}  // namespace

IouResult mean_iou(const LabelMap& pred, const LabelMap& truth, int labels) {
  if (pred.height != truth.height || pred.width != truth.width)
    throw std::invalid_argument("iou: dims mismatch");
  return iou_over_mask(pred, truth, labels, {});
}

IouResult trimap_iou(const LabelMap& pred, const LabelMap& truth, int labels, int band) {
  if (pred.height != truth.height || pred.width != truth.width)
    throw std::invalid_argument("iou: dims mismatch");
  const int h = truth.height, w = truth.width;
  std::vector<uint8_t> boundary(truth.data.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const uint8_t t = truth.at(y, x);
      if (t == kIgnoreLabel) continue;
      const bool edge = (x + 1 < w && truth.at(y, x + 1) != t && truth.at(y, x + 1) != kIgnoreLabel) ||
                        (y + 1 < h && truth.at(y + 1, x) != t && truth.at(y + 1, x) != kIgnoreLabel);
      if (edge) boundary[static_cast<size_t>(y) * w + x] = 1;
    }
  // Chebyshev dilation by `band`
  std::vector<uint8_t> mask(truth.data.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!boundary[static_cast<size_t>(y) * w + x]) continue;
      for (int dy = -band; dy <= band; ++dy)
        for (int dx = -band; dx <= band; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) mask[static_cast<size_t>(yy) * w + xx] = 1;
        }
    }
  return iou_over_mask(pred, truth, labels, mask);
}

SgdOptimizer::SgdOptimizer(const std::vector<ParamView>& params, const TrainConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  velocity_.reserve(params.size());
  for (const auto& p : params) velocity_.emplace_back(p.size, 0.0);
}

void SgdOptimizer::step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads) {
  if (params.size() != velocity_.size() || grads.size() != params.size())
    throw std::invalid_argument("sgd: parameter/gradient group mismatch");
  for (size_t g = 0; g < params.size(); ++g) {
    if (params[g].size != grads[g].size) throw std::invalid_argument("sgd: shape mismatch");
    double* p = params[g].data;
    const double* gr = grads[g].data;
    double* v = velocity_[g].data();
    for (size_t i = 0; i < params[g].size; ++i) {
      v[i] = cfg_.momentum * v[i] - cfg_.learning_rate * (gr[i] + cfg_.weight_decay * p[i]);
      p[i] += v[i];
    }
  }
}

void write_metric_csv(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open metric log for writing: " + path);
  out << "epoch,loss,mean_iou,trimap_iou\n";
  out.precision(17);
  for (const auto& e : log)
    out << e.epoch << ',' << e.loss << ',' << e.mean_iou << ',' << e.trimap_iou << '\n';
}

}  // namespace gcrf
