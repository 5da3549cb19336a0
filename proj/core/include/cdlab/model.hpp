#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cdlab/dataset.hpp"
#include "cdlab/image.hpp"

namespace cdlab {

// Fully connected layer: out = W * in + b, W row-major (out x in).
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

// Multilayer perceptron over raw pixels: ReLU hidden layers, softmax output.
// Pixels are normalized as (x * input_scale + input_shift).
class Model {
 public:
  Model() = default;
  // All parameters zero.
  Model(int width, int height, int channels, std::vector<std::size_t> hidden, int classes);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  int classes() const { return classes_; }
  std::size_t input_size() const { return static_cast<std::size_t>(width_) * height_ * channels_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  double input_scale() const { return input_scale_; }
  double input_shift() const { return input_shift_; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // He-normal weights, zero biases; draws layer by layer in row-major order.
  void initialize(std::uint64_t seed);

  // Throws ShapeError when the image does not fit the architecture.
  void check_input(const Image& img) const;
  // Throws ParameterError on inconsistent shapes or non-finite parameters.
  void validate() const;

  bool operator==(const Model&) const = default;

 private:
  int width_ = 0, height_ = 0, channels_ = 0, classes_ = 0;
  std::vector<std::size_t> hidden_;
  double input_scale_ = 1.0 / 255.0;
  double input_shift_ = 0.0;
  std::vector<DenseLayer> layers_;
};

std::vector<double> logits(const Model& m, const Image& img);
std::vector<double> softmax(const std::vector<double>& z);
std::vector<double> forward(const Model& m, const Image& img);
// Argmax of the output; ties go to the lowest class index.
int predict(const Model& m, const Image& img);

struct LossGrad {
  double loss = 0.0;
  Image grad;                  // d loss / d pixel, on the 0..255 scale
  std::vector<double> probs;
  std::vector<double> dlogits;  // d loss / d logits = probs - onehot
};

LossGrad loss_and_input_grad(const Model& m, const Image& img, int label);

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 0.02;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden{128, 64};
};

struct TrainReport {
  double train_accuracy = 0.0;
  double final_loss = 0.0;  // mean over the last epoch
};

// Deterministic minibatch SGD on cross-entropy. One generator seeded from
// cfg.seed supplies the initialization and then one shuffle per epoch.
Model train(const Dataset& data, const TrainConfig& cfg, TrainReport* report = nullptr);

std::vector<std::uint8_t> save_model(const Model& m);
Model load_model(const std::vector<std::uint8_t>& bytes);
void write_model(const std::filesystem::path& path, const Model& m);
Model read_model(const std::filesystem::path& path);
std::uint64_t model_hash(const Model& m);

}  // namespace cdlab
