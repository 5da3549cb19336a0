#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdlab/image.hpp"

namespace cdlab {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary P5 (gray) / P6 (RGB), maxval 255. Samples are rounded to integers
// on write.
std::vector<unsigned char> encode_netpbm(const Image& img);
Image decode_netpbm(const std::vector<unsigned char>& bytes);

void write_netpbm(const std::filesystem::path& path, const Image& img);
Image read_netpbm(const std::filesystem::path& path);

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

}  // namespace cdlab
