#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "cdlab/image.hpp"
#include "cdlab/random.hpp"

namespace cdlab::testing {

inline Image random_image(int w, int h, int channels, std::uint64_t seed, bool integer = true) {
  Rng rng(seed);
  Image img(w, h, channels);
  for (double& v : img.samples_mut()) v = integer ? static_cast<double>(rng.below(256)) : rng.uniform(0.0, 255.0);
  return img;
}

// Smooth gradient plus mild noise; compresses like a photograph would.
inline Image smooth_image(int w, int h, int channels, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h, channels);
  const double fx = rng.uniform(0.02, 0.15), fy = rng.uniform(0.02, 0.15);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.set(c, x, y,
                std::round(128 + 60 * std::sin(fx * x + c) * std::cos(fy * y) + 0.5 * x - 0.3 * y +
                           4 * rng.normal()));
  return img;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("cdlab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace cdlab::testing
