#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdlab/attacks.hpp"
#include "cdlab/dataset.hpp"
#include "cdlab/model.hpp"
#include "cdlab/ratecontrol.hpp"

namespace cdlab {

inline constexpr const char* kToolVersion = "0.1.0";

// Bad experiment configuration (maps to exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReferenceMode { adversarial, clean };

struct ExperimentGrid {
  std::string dataset;  // test split directory
  std::string model;    // trained model file; empty = train one per seed
  std::string train_dataset;
  TrainConfig train{};
  std::vector<AttackConfig> attacks;
  std::vector<Codec> codecs;
  std::vector<double> targets{23.0, 25.0, 28.0, 31.0};
  bool include_max_compression = true;
  bool include_uncompressed_baseline = true;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir;
  ReferenceMode reference = ReferenceMode::adversarial;
  unsigned workers = 0;   // 0 = hardware concurrency
  std::size_t limit = 0;  // evaluate only the first N images; 0 = all

  void validate() const;  // throws ConfigError
};

ExperimentGrid parse_grid(const std::string& json_text);
std::string grid_to_json(const ExperimentGrid& grid);

struct AccuracyCell {
  std::uint64_t seed = 0;
  std::string attack;  // "none" for the clean baseline, else "fgsm" / "bim"
  double epsilon = 0.0;
  std::string codec;    // "uncompressed", "dct" or "wavelet"
  std::string setting;  // "none", "max" or the PSNR target, e.g. "25"
  std::optional<double> target_db;
  std::size_t correct = 0;
  std::size_t count = 0;
  std::size_t excluded = 0;  // infeasible targets
  double psnr_sum = 0.0;     // finite achieved PSNRs only
  std::size_t psnr_count = 0;
  double bytes_sum = 0.0;
  std::size_t exact_hits = 0;

  // Empty when every image was excluded.
  std::optional<double> accuracy() const;
  std::optional<double> mean_psnr() const;
  std::optional<double> mean_bytes() const;
  std::optional<double> exact_hit_rate() const;
  std::string key() const;
};

struct Report {
  std::string tool_version = kToolVersion;
  std::string dataset_hash;
  std::vector<std::pair<std::uint64_t, std::string>> model_hashes;  // per seed
  std::string reference = "adversarial";
  std::vector<AccuracyCell> cells;

  const AccuracyCell* find(std::uint64_t seed, const std::string& attack, double epsilon, const std::string& codec,
                           const std::string& setting) const;
};

std::string report_to_json(const Report& r);
Report report_from_json(const std::string& text);

// Fraction of argmax-correct predictions after integer quantization.
double evaluate_accuracy(const Model& m, const Dataset& data);
double evaluate_accuracy(const Model& m, const std::vector<Image>& images, const std::vector<int>& labels);

// Per-image outcome for one compressed cell, written to records.jsonl.
struct CompressionRecord {
  std::uint64_t seed = 0;
  std::string cell;
  std::string image;
  std::optional<CompressionResult> result;  // empty = infeasible
  int predicted = -1;
};

using RecordSink = std::function<void(const CompressionRecord&)>;

// Runs every cell; records arrive in image order regardless of workers.
Report run_experiment(const ExperimentGrid& grid, const RecordSink& sink = {});

// Writes report.json and records.jsonl under grid.output_dir.
Report run_experiment_to_disk(const ExperimentGrid& grid);

enum class TableFormat { csv, markdown };
enum class TableKind { psnr, max };

struct TableOptions {
  TableFormat format = TableFormat::markdown;
  TableKind kind = TableKind::psnr;
  bool bold_best = false;  // bold the highest cell per column
};

// Rows: codec x setting (plus the uncompressed row); columns: attack x eps.
// Cells pool counts over seeds; empty cells print NA.
std::string emit_table(const Report& r, const TableOptions& options = {});

// Writes n (clean, adversarial, decoded) triplets per compressed cell and a
// manifest.jsonl; uses the first seed's model.
void dump_samples(const ExperimentGrid& grid, std::size_t n, const std::filesystem::path& out_dir);

}  // namespace cdlab
