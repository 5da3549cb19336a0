#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cdlab/image.hpp"

namespace cdlab {

struct Sample {
  std::string name;
  Image image;
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  int num_classes = 0;
  std::string split = "test";

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  // Throws ShapeError / ParameterError when labels or shapes are inconsistent.
  void validate() const;
};

// Directory of .pgm/.ppm files plus labels.csv with `filename,label_index` rows.
Dataset load_dataset(const std::filesystem::path& dir, int num_classes = 0);
void save_dataset(const Dataset& data, const std::filesystem::path& dir);

// FNV-1a over names, labels and quantized samples.
std::uint64_t dataset_hash(const Dataset& data);
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

namespace synth {

inline constexpr int kDeskClasses = 10;
inline constexpr int kDeskSize = 32;

// Ten classes of anti-aliased shapes (disk, square, triangle, ring, plus,
// cross, horizontal bars, vertical bars, twin blobs, checker) on a shaded
// background with additive noise. Balanced: sample i has label i % 10.
Dataset desk_dataset(std::size_t count, std::uint64_t seed, const std::string& split);
Image desk_image(int label, std::uint64_t seed);

// Gray image with multi-octave value noise, soft-edged shapes and fine
// grain; a stand-in for photographic content.
Image natural_image(int size, std::uint64_t seed);
std::vector<Image> natural_corpus(std::size_t count, int size, std::uint64_t seed);

}  // namespace synth

}  // namespace cdlab
