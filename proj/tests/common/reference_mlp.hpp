#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "cdlab/model.hpp"

namespace cdlab::testing {

// Forward pass written out directly from the layer parameters.
struct Reference {
  std::vector<double> logits;
  std::vector<std::vector<double>> pre;  // hidden pre-activations
};

inline Reference reference_forward(const Model& m, const Image& img) {
  std::vector<double> a;
  for (double v : img.samples()) a.push_back(v * m.input_scale() + m.input_shift());
  Reference r;
  const auto& layers = m.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> z(layers[l].outputs);
    for (std::size_t o = 0; o < z.size(); ++o) {
      z[o] = layers[l].bias[o];
      for (std::size_t i = 0; i < a.size(); ++i) z[o] += layers[l].weights[o * layers[l].inputs + i] * a[i];
    }
    if (l + 1 == layers.size()) {
      r.logits = z;
    } else {
      r.pre.push_back(z);
      for (double& v : z) v = std::max(0.0, v);
      a = z;
    }
  }
  return r;
}

// Cross-entropy as log(1 + sum_{k != label} exp(z_k - z_label)); stays
// accurate when the loss is close to zero.
inline double reference_loss(const Model& m, const Image& img, int label) {
  const auto z = reference_forward(m, img).logits;
  const double zl = z[static_cast<std::size_t>(label)];
  const double mx = *std::max_element(z.begin(), z.end());
  if (mx - zl > 30.0) {
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    return mx - zl + std::log(sum);
  }
  double rest = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k)
    if (static_cast<int>(k) != label) rest += std::exp(z[k] - zl);
  return std::log1p(rest);
}

inline bool same_pattern(const Reference& a, const Reference& b) {
  for (std::size_t l = 0; l < a.pre.size(); ++l)
    for (std::size_t i = 0; i < a.pre[l].size(); ++i)
      if ((a.pre[l][i] > 0) != (b.pre[l][i] > 0)) return false;
  return true;
}

// Central-difference check of one input-gradient entry. Returns nullopt when
// a ReLU changes state inside [x - h, x + h].
inline std::optional<double> gradient_probe_error(const Model& m, const Image& img, int label, std::size_t pixel,
                                                  double analytic, double h = 0.1) {
  Image up = img, down = img;
  up.samples_mut()[pixel] += h;
  down.samples_mut()[pixel] -= h;
  const Reference base = reference_forward(m, img);
  if (!same_pattern(base, reference_forward(m, up)) || !same_pattern(base, reference_forward(m, down)))
    return std::nullopt;
  const double fd = (reference_loss(m, up, label) - reference_loss(m, down, label)) / (2 * h);
  return std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-12});
}

}  // namespace cdlab::testing
