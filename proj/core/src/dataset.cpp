#include "cdlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cdlab/netpbm.hpp"
#include "cdlab/random.hpp"

namespace cdlab {

void Dataset::validate() const {
  if (num_classes < 1) throw ParameterError("dataset: class count must be >= 1");
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= num_classes)
      throw ParameterError("dataset: label " + std::to_string(s.label) + " out of range for " + s.name);
    if (!s.image.same_shape(samples.front().image)) throw ShapeError("dataset: image shapes differ at " + s.name);
  }
}

Dataset load_dataset(const std::filesystem::path& dir, int num_classes) {
  std::ifstream csv(dir / "labels.csv");
  if (!csv) throw IoError("dataset: cannot open " + (dir / "labels.csv").string());
  Dataset d;
  std::string line;
  int max_label = -1;
  while (std::getline(csv, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw FormatError("labels.csv: malformed row '" + line + "'");
    const std::string name = line.substr(0, comma);
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      if (d.samples.empty() && max_label < 0) continue;  // header row
      throw FormatError("labels.csv: bad label in row '" + line + "'");
    }
    d.samples.push_back({name, read_netpbm(dir / name), label});
    max_label = std::max(max_label, label);
  }
  d.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  d.split = dir.filename().string();
  if (d.samples.empty()) throw ParameterError("dataset: no samples in " + dir.string());
  d.validate();
  return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("dataset: cannot create " + dir.string());
  std::ostringstream csv;
  for (const auto& s : data.samples) {
    write_netpbm(dir / s.name, s.image);
    csv << s.name << ',' << s.label << '\n';
  }
  const std::string text = csv.str();
  write_file(dir / "labels.csv", std::vector<unsigned char>(text.begin(), text.end()));
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t dataset_hash(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : data.samples) {
    h = fnv1a(s.name.data(), s.name.size(), h);
    h = fnv1a(&s.label, sizeof s.label, h);
    const auto bytes = encode_netpbm(s.image);
    h = fnv1a(bytes.data(), bytes.size(), h);
  }
  return h;
}

namespace synth {

namespace {

bool inside_shape(int label, double u, double v, double r) {
  const double box = std::max(std::abs(u), std::abs(v));
  switch (label) {
    case 0: return u * u + v * v <= r * r;
    case 1: return box <= 0.8 * r;
    case 2: return v <= 0.8 * r && v >= -r && std::abs(u) <= (v + r) / 1.8;
    case 3: {
      const double d = std::sqrt(u * u + v * v);
      return d <= r && d >= 0.55 * r;
    }
    case 4: return (std::abs(u) <= 0.3 * r && std::abs(v) <= r) || (std::abs(v) <= 0.3 * r && std::abs(u) <= r);
    case 5:
      return box <= r && (std::abs(u - v) <= 0.4 * r || std::abs(u + v) <= 0.4 * r);
    case 6: return box <= r && static_cast<int>(std::floor((v + r) / (0.5 * r))) % 2 == 0;
    case 7: return box <= r && static_cast<int>(std::floor((u + r) / (0.5 * r))) % 2 == 0;
    case 8: {
      const double a = (u - 0.55 * r) * (u - 0.55 * r) + v * v;
      const double b = (u + 0.55 * r) * (u + 0.55 * r) + v * v;
      return std::min(a, b) <= 0.2 * r * r;
    }
    case 9: {
      if (box > r) return false;
      const int i = static_cast<int>(std::floor((u + r) / (0.5 * r)));
      const int j = static_cast<int>(std::floor((v + r) / (0.5 * r)));
      return (i + j) % 2 == 1;
    }
    default: return false;
  }
}

// Smooth value noise on a (cells+1)^2 lattice, sampled at (x, y) in [0, 1).
class ValueNoise {
 public:
  ValueNoise(int cells, Rng& rng) : cells_(cells), lattice_(static_cast<std::size_t>((cells + 1) * (cells + 1))) {
    for (double& v : lattice_) v = rng.uniform(-1.0, 1.0);
  }
  double at(double x, double y) const {
    const double fx = x * cells_, fy = y * cells_;
    const int ix = std::min(static_cast<int>(fx), cells_ - 1), iy = std::min(static_cast<int>(fy), cells_ - 1);
    const double tx = smooth(fx - ix), ty = smooth(fy - iy);
    auto L = [&](int a, int b) { return lattice_[static_cast<std::size_t>(b * (cells_ + 1) + a)]; };
    const double top = L(ix, iy) * (1 - tx) + L(ix + 1, iy) * tx;
    const double bot = L(ix, iy + 1) * (1 - tx) + L(ix + 1, iy + 1) * tx;
    return top * (1 - ty) + bot * ty;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  int cells_;
  std::vector<double> lattice_;
};

}  // namespace

Image desk_image(int label, std::uint64_t seed) {
  Rng rng(seed);
  const int n = kDeskSize;
  const double background = rng.uniform(40.0, 110.0);
  const double contrast = rng.uniform(60.0, 110.0) * (rng.uniform() < 0.5 ? 1.0 : -1.0);
  const double gx = rng.uniform(-1.0, 1.0), gy = rng.uniform(-1.0, 1.0);
  const double cx = n / 2.0 + rng.uniform(-2.5, 2.5), cy = n / 2.0 + rng.uniform(-2.5, 2.5);
  const double r = 10.0 * rng.uniform(0.85, 1.15);
  const double noise = 5.0;
  Image img(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      int hits = 0;
      for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx)
          hits += inside_shape(label, x + (sx + 0.5) / 4.0 - cx, y + (sy + 0.5) / 4.0 - cy, r) ? 1 : 0;
      const double shade = background + gx * (x - n / 2.0) + gy * (y - n / 2.0);
      const double v = shade + contrast * hits / 16.0 + noise * rng.normal();
      img.set(0, x, y, std::round(v));
    }
  return img;
}

Dataset desk_dataset(std::size_t count, std::uint64_t seed, const std::string& split) {
  Dataset d;
  d.num_classes = kDeskClasses;
  d.split = split;
  Rng seeds(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % kDeskClasses);
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.pgm", i);
    d.samples.push_back({name, desk_image(label, seeds.next()), label});
  }
  return d;
}

Image natural_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> field(static_cast<std::size_t>(size) * size, 0.0);
  // 1/f-like octave stack.
  double amp = 1.0;
  for (int cells = 2; cells <= size / 2; cells *= 2) {
    ValueNoise vn(cells, rng);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        field[static_cast<std::size_t>(y) * size + x] += amp * vn.at((x + 0.5) / size, (y + 0.5) / size);
    amp *= 0.72;
  }
  // Soft-edged ellipses and rectangles.
  const int shapes = rng.integer(4, 9);
  for (int s = 0; s < shapes; ++s) {
    const double cx = rng.uniform(0.1, 0.9) * size, cy = rng.uniform(0.1, 0.9) * size;
    const double rx = rng.uniform(0.05, 0.25) * size, ry = rng.uniform(0.05, 0.25) * size;
    const double level = rng.uniform(-1.2, 1.2);
    const bool ellipse = rng.uniform() < 0.5;
    const double edge = rng.uniform(0.5, 3.0);
    // Some regions carry an oriented stripe texture.
    const double tex_amp = rng.uniform() < 0.5 ? rng.uniform(0.1, 0.5) : 0.0;
    const double theta = rng.uniform(0.0, 3.14159265358979);
    const double freq = rng.uniform(0.15, 0.9);
    const double fx = std::cos(theta) * freq, fy = std::sin(theta) * freq;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double u = (x - cx) / rx, v = (y - cy) / ry;
        const double d = ellipse ? std::sqrt(u * u + v * v) : std::max(std::abs(u), std::abs(v));
        const double t = 1.0 / (1.0 + std::exp((d - 1.0) * std::min(rx, ry) / edge));
        double& f = field[static_cast<std::size_t>(y) * size + x];
        f = f * (1.0 - t) + (level + tex_amp * std::sin(fx * x + fy * y)) * t;
      }
  }
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  const double span = std::max(*hi - *lo, 1e-9);
  Image img(size, size, 1);
  const double grain = rng.uniform(1.0, 4.0);
  auto p = img.plane_mut(0);
  for (std::size_t i = 0; i < field.size(); ++i)
    p[i] = std::clamp(std::round(15.0 + 225.0 * (field[i] - *lo) / span + grain * rng.normal()), 0.0, 255.0);
  return img;
}

std::vector<Image> natural_corpus(std::size_t count, int size, std::uint64_t seed) {
  Rng seeds(seed);
  std::vector<Image> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(natural_image(size, seeds.next()));
  return out;
}

}  // namespace synth

}  // namespace cdlab
