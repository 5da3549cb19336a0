#include "cdlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdlab/bytes.hpp"
#include "cdlab/netpbm.hpp"
#include "cdlab/random.hpp"

namespace cdlab {

Model::Model(int width, int height, int channels, std::vector<std::size_t> hidden, int classes)
    : width_(width), height_(height), channels_(channels), classes_(classes), hidden_(std::move(hidden)) {
  if (width < 1 || height < 1 || (channels != 1 && channels != 3)) throw ParameterError("model: bad input shape");
  if (classes < 2) throw ParameterError("model: need at least two classes");
  std::size_t in = input_size();
  std::vector<std::size_t> outs = hidden_;
  outs.push_back(static_cast<std::size_t>(classes));
  for (std::size_t out : outs) {
    if (out == 0) throw ParameterError("model: hidden layer of size zero");
    layers_.push_back({in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)});
    in = out;
  }
}

void Model::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : layers_) {
    const double sd = std::sqrt(2.0 / static_cast<double>(l.inputs));
    for (double& w : l.weights) w = sd * rng.normal();
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

void Model::check_input(const Image& img) const {
  if (img.width() != width_ || img.height() != height_ || img.channels() != channels_)
    throw ShapeError("model expects " + std::to_string(width_) + "x" + std::to_string(height_) + "x" +
                     std::to_string(channels_) + " input, got " + std::to_string(img.width()) + "x" +
                     std::to_string(img.height()) + "x" + std::to_string(img.channels()));
}

void Model::validate() const {
  if (classes_ < 2) throw ParameterError("model: need at least two classes");
  if (layers_.size() != hidden_.size() + 1) throw ParameterError("model: layer count mismatch");
  std::size_t in = input_size();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const std::size_t out = i < hidden_.size() ? hidden_[i] : static_cast<std::size_t>(classes_);
    if (l.inputs != in || l.outputs != out || l.weights.size() != in * out || l.bias.size() != out)
      throw ParameterError("model: layer " + std::to_string(i) + " shape mismatch");
    for (double w : l.weights)
      if (!std::isfinite(w)) throw ParameterError("model: non-finite weight");
    for (double b : l.bias)
      if (!std::isfinite(b)) throw ParameterError("model: non-finite bias");
    in = out;
  }
  if (!std::isfinite(input_scale_) || !std::isfinite(input_shift_)) throw ParameterError("model: bad normalization");
}

namespace {

// Activations of every layer; acts[0] is the normalized input, acts.back()
// the logits. Hidden entries are post-ReLU.
struct Trace {
  std::vector<std::vector<double>> acts;
};

void dense(const DenseLayer& l, const std::vector<double>& in, std::vector<double>& out) {
  out.assign(l.outputs, 0.0);
  for (std::size_t o = 0; o < l.outputs; ++o) {
    const double* w = &l.weights[o * l.inputs];
    double s = l.bias[o];
    for (std::size_t i = 0; i < l.inputs; ++i) s += w[i] * in[i];
    out[o] = s;
  }
}

void run_forward(const Model& m, const Image& img, Trace& t) {
  m.check_input(img);
  const auto& ls = m.layers();
  t.acts.resize(ls.size() + 1);
  auto& x = t.acts[0];
  x.resize(m.input_size());
  const auto s = img.samples();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = s[i] * m.input_scale() + m.input_shift();
  for (std::size_t k = 0; k < ls.size(); ++k) {
    dense(ls[k], t.acts[k], t.acts[k + 1]);
    if (k + 1 < ls.size())
      for (double& v : t.acts[k + 1]) v = std::max(v, 0.0);
  }
}

// Backpropagates dlogits; returns d/d(normalized input) and, when grads is
// given, accumulates parameter gradients into it.
std::vector<double> run_backward(const Model& m, const Trace& t, std::vector<double> delta,
                                 std::vector<DenseLayer>* grads) {
  const auto& ls = m.layers();
  for (std::size_t k = ls.size(); k-- > 0;) {
    const DenseLayer& l = ls[k];
    const auto& in = t.acts[k];
    if (grads) {
      DenseLayer& g = (*grads)[k];
      for (std::size_t o = 0; o < l.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        g.bias[o] += d;
        double* gw = &g.weights[o * l.inputs];
        for (std::size_t i = 0; i < l.inputs; ++i) gw[i] += d * in[i];
      }
    }
    std::vector<double> prev(l.inputs, 0.0);
    for (std::size_t o = 0; o < l.outputs; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* w = &l.weights[o * l.inputs];
      for (std::size_t i = 0; i < l.inputs; ++i) prev[i] += d * w[i];
    }
    if (k > 0)
      for (std::size_t i = 0; i < prev.size(); ++i)
        if (in[i] <= 0.0) prev[i] = 0.0;
    delta = std::move(prev);
  }
  return delta;
}

double cross_entropy(const std::vector<double>& z, int label, std::vector<double>& probs) {
  probs = softmax(z);
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  return -(z[static_cast<std::size_t>(label)] - mx - std::log(sum));
}

}  // namespace

std::vector<double> softmax(const std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] - mx);
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> logits(const Model& m, const Image& img) {
  Trace t;
  run_forward(m, img, t);
  return t.acts.back();
}

std::vector<double> forward(const Model& m, const Image& img) { return softmax(logits(m, img)); }

int predict(const Model& m, const Image& img) {
  const auto z = logits(m, img);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

LossGrad loss_and_input_grad(const Model& m, const Image& img, int label) {
  if (label < 0 || label >= m.classes()) throw ParameterError("label " + std::to_string(label) + " out of range");
  Trace t;
  run_forward(m, img, t);
  LossGrad out;
  out.loss = cross_entropy(t.acts.back(), label, out.probs);
  out.dlogits = out.probs;
  out.dlogits[static_cast<std::size_t>(label)] -= 1.0;
  const auto dx = run_backward(m, t, out.dlogits, nullptr);
  out.grad = Image(img.width(), img.height(), img.channels());
  auto g = out.grad.samples_mut();
  for (std::size_t i = 0; i < dx.size(); ++i) g[i] = dx[i] * m.input_scale();
  return out;
}

Model train(const Dataset& data, const TrainConfig& cfg, TrainReport* report) {
  if (data.empty()) throw ParameterError("train: empty dataset");
  if (cfg.epochs < 0 || cfg.batch_size == 0 || !(cfg.learning_rate >= 0.0) || !(cfg.momentum >= 0.0) ||
      cfg.momentum >= 1.0)
    throw ParameterError("train: bad configuration");
  data.validate();
  const Image& first = data.samples.front().image;
  Model m(first.width(), first.height(), first.channels(), cfg.hidden, data.num_classes);

  Rng rng(cfg.seed);
  m.initialize(rng.next());

  auto zero_like = [&] {
    std::vector<DenseLayer> g;
    for (const auto& l : m.layers())
      g.push_back({l.inputs, l.outputs, std::vector<double>(l.weights.size(), 0.0),
                   std::vector<double>(l.bias.size(), 0.0)});
    return g;
  };
  auto velocity = zero_like();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  double epoch_loss = 0.0;
  Trace t;
  std::vector<double> probs;
  for (int e = 0; e < cfg.epochs; ++e) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      auto grads = zero_like();
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = data.samples[order[k]];
        run_forward(m, s.image, t);
        epoch_loss += cross_entropy(t.acts.back(), s.label, probs);
        probs[static_cast<std::size_t>(s.label)] -= 1.0;
        run_backward(m, t, probs, &grads);
      }
      const double scale = cfg.learning_rate / static_cast<double>(end - start);
      for (std::size_t l = 0; l < grads.size(); ++l) {
        auto step = [&](std::vector<double>& p, std::vector<double>& v, const std::vector<double>& g) {
          for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = cfg.momentum * v[i] - scale * g[i];
            p[i] += v[i];
          }
        };
        step(m.layers()[l].weights, velocity[l].weights, grads[l].weights);
        step(m.layers()[l].bias, velocity[l].bias, grads[l].bias);
      }
    }
  }
  m.validate();
  if (report) {
    std::size_t correct = 0;
    for (const auto& s : data.samples) correct += predict(m, s.image) == s.label;
    report->train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    report->final_loss = cfg.epochs > 0 ? epoch_loss / static_cast<double>(data.size()) : 0.0;
  }
  return m;
}

// Layout: "CDM1", u32 width, u32 height, u32 channels, u32 classes,
// u32 hidden count, u32 per hidden size, f64 input scale, f64 input shift,
// then per layer the weights (row-major) and biases as f64.
std::vector<std::uint8_t> save_model(const Model& m) {
  ByteWriter w;
  w.raw("CDM1", 4);
  w.u32(static_cast<std::uint32_t>(m.width()));
  w.u32(static_cast<std::uint32_t>(m.height()));
  w.u32(static_cast<std::uint32_t>(m.channels()));
  w.u32(static_cast<std::uint32_t>(m.classes()));
  w.u32(static_cast<std::uint32_t>(m.hidden().size()));
  for (std::size_t h : m.hidden()) w.u32(static_cast<std::uint32_t>(h));
  w.f64(m.input_scale());
  w.f64(m.input_shift());
  for (const auto& l : m.layers()) {
    for (double v : l.weights) w.f64(v);
    for (double v : l.bias) w.f64(v);
  }
  return w.take();
}

Model load_model(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "model");
  r.expect_magic("CDM1");
  const std::uint32_t width = r.u32(), height = r.u32(), channels = r.u32(), classes = r.u32();
  const std::uint32_t nh = r.u32();
  if (width == 0 || height == 0 || width > 4096 || height > 4096 || (channels != 1 && channels != 3) ||
      classes < 2 || classes > 100000 || nh > 64)
    throw FormatError("model: implausible header");
  std::vector<std::size_t> hidden;
  for (std::uint32_t i = 0; i < nh; ++i) {
    const std::uint32_t h = r.u32();
    if (h == 0 || h > 1u << 20) throw FormatError("model: implausible hidden size at byte offset " +
                                                  std::to_string(r.pos() - 4));
    hidden.push_back(h);
  }
  const double scale = r.f64(), shift = r.f64();
  // Check the parameter count against what is left before allocating.
  std::uint64_t params = 0, in = static_cast<std::uint64_t>(width) * height * channels;
  for (std::size_t h : hidden) {
    params += in * h + h;
    in = h;
  }
  params += in * classes + classes;
  if (params * 8 != r.remaining()) throw FormatError("model: parameter block size mismatch");
  Model m(static_cast<int>(width), static_cast<int>(height), static_cast<int>(channels), hidden,
          static_cast<int>(classes));
  if (scale != m.input_scale() || shift != m.input_shift())
    throw FormatError("model: unsupported input normalization");
  for (auto& l : m.layers()) {
    for (double& v : l.weights) v = r.f64();
    for (double& v : l.bias) v = r.f64();
  }
  try {
    m.validate();
  } catch (const ParameterError& e) {
    throw FormatError(e.what());
  }
  return m;
}

void write_model(const std::filesystem::path& path, const Model& m) { write_file(path, save_model(m)); }

Model read_model(const std::filesystem::path& path) { return load_model(read_file(path)); }

std::uint64_t model_hash(const Model& m) {
  const auto b = save_model(m);
  return fnv1a(b.data(), b.size());
}

}  // namespace cdlab
