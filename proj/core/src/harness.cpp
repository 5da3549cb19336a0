#include "cdlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "cdlab/netpbm.hpp"

namespace cdlab {

using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* reference_name(ReferenceMode m) { return m == ReferenceMode::adversarial ? "adversarial" : "clean"; }

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

}  // namespace

void ExperimentGrid::validate() const {
  if (dataset.empty()) throw ConfigError("grid: dataset path is required");
  if (model.empty() && train_dataset.empty()) throw ConfigError("grid: need a model or a train_dataset");
  if (attacks.empty()) throw ConfigError("grid: attack list is empty");
  if (codecs.empty()) throw ConfigError("grid: codec list is empty");
  if (seeds.empty()) throw ConfigError("grid: seed list is empty");
  for (double t : targets)
    if (!std::isfinite(t)) throw ConfigError("grid: PSNR targets must be finite");
  for (const auto& a : attacks) {
    try {
      a.validate();
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  }
  std::set<std::string> labels;
  for (const auto& a : attacks)
    if (!labels.insert(a.label()).second) throw ConfigError("grid: duplicate attack " + a.label());
}

ExperimentGrid parse_grid(const std::string& text) {
  ExperimentGrid g;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("grid: top level must be an object");
    reject_unknown(j,
                   {"dataset", "model", "train_dataset", "train", "attacks", "codecs", "targets",
                    "include_max_compression", "include_uncompressed_baseline", "seeds", "output_dir", "reference",
                    "workers", "limit"},
                   "grid");
    g.dataset = get_or<std::string>(j, "dataset", "");
    g.model = get_or<std::string>(j, "model", "");
    g.train_dataset = get_or<std::string>(j, "train_dataset", "");
    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown(t, {"epochs", "batch_size", "learning_rate", "momentum", "hidden"}, "grid.train");
      g.train.epochs = get_or(t, "epochs", g.train.epochs);
      g.train.batch_size = get_or(t, "batch_size", g.train.batch_size);
      g.train.learning_rate = get_or(t, "learning_rate", g.train.learning_rate);
      g.train.momentum = get_or(t, "momentum", g.train.momentum);
      g.train.hidden = get_or(t, "hidden", g.train.hidden);
    }
    for (const json& a : j.value("attacks", json::array())) {
      reject_unknown(a, {"kind", "epsilon", "alpha", "iterations"}, "grid.attacks");
      AttackConfig c;
      c.kind = parse_attack(a.at("kind").get<std::string>());
      c.epsilon = a.at("epsilon").get<double>();
      c.alpha = get_or(a, "alpha", c.alpha);
      c.iterations = get_or(a, "iterations", c.iterations);
      g.attacks.push_back(c);
    }
    for (const json& c : j.value("codecs", json::array())) g.codecs.push_back(parse_codec(c.get<std::string>()));
    g.targets = get_or(j, "targets", g.targets);
    g.include_max_compression = get_or(j, "include_max_compression", g.include_max_compression);
    g.include_uncompressed_baseline = get_or(j, "include_uncompressed_baseline", g.include_uncompressed_baseline);
    g.seeds = get_or(j, "seeds", g.seeds);
    g.output_dir = get_or<std::string>(j, "output_dir", "");
    const std::string ref = get_or<std::string>(j, "reference", "adversarial");
    if (ref == "adversarial")
      g.reference = ReferenceMode::adversarial;
    else if (ref == "clean")
      g.reference = ReferenceMode::clean;
    else
      throw ConfigError("grid: reference must be 'adversarial' or 'clean'");
    g.workers = get_or(j, "workers", g.workers);
    g.limit = get_or(j, "limit", g.limit);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  g.validate();
  return g;
}

std::string grid_to_json(const ExperimentGrid& g) {
  json j;
  j["dataset"] = g.dataset;
  j["model"] = g.model;
  j["train_dataset"] = g.train_dataset;
  j["train"] = {{"epochs", g.train.epochs},
                {"batch_size", g.train.batch_size},
                {"learning_rate", g.train.learning_rate},
                {"momentum", g.train.momentum},
                {"hidden", g.train.hidden}};
  j["attacks"] = json::array();
  for (const auto& a : g.attacks) {
    json aj{{"kind", std::string(attack_name(a.kind))}, {"epsilon", a.epsilon}};
    if (a.kind == AttackKind::bim) {
      aj["alpha"] = a.alpha;
      aj["iterations"] = a.resolved_iterations();
    }
    j["attacks"].push_back(aj);
  }
  j["codecs"] = json::array();
  for (Codec c : g.codecs) j["codecs"].push_back(std::string(codec_name(c)));
  j["targets"] = g.targets;
  j["include_max_compression"] = g.include_max_compression;
  j["include_uncompressed_baseline"] = g.include_uncompressed_baseline;
  j["seeds"] = g.seeds;
  j["output_dir"] = g.output_dir;
  j["reference"] = reference_name(g.reference);
  j["workers"] = g.workers;
  j["limit"] = g.limit;
  return j.dump(2) + "\n";
}

std::optional<double> AccuracyCell::accuracy() const {
  if (count == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(count);
}

std::optional<double> AccuracyCell::mean_psnr() const {
  if (psnr_count == 0) return std::nullopt;
  return psnr_sum / static_cast<double>(psnr_count);
}

std::optional<double> AccuracyCell::mean_bytes() const {
  if (codec == "uncompressed" || count == 0) return std::nullopt;
  return bytes_sum / static_cast<double>(count);
}

std::optional<double> AccuracyCell::exact_hit_rate() const {
  if (!target_db || count == 0) return std::nullopt;
  return static_cast<double>(exact_hits) / static_cast<double>(count);
}

std::string AccuracyCell::key() const {
  const std::string a = attack == "none" ? "clean" : attack + "_eps" + fmt_g(epsilon);
  return a + "/" + codec + "/" + setting;
}

const AccuracyCell* Report::find(std::uint64_t seed, const std::string& attack, double epsilon,
                                 const std::string& codec, const std::string& setting) const {
  for (const auto& c : cells)
    if (c.seed == seed && c.attack == attack && c.epsilon == epsilon && c.codec == codec && c.setting == setting)
      return &c;
  return nullptr;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string report_to_json(const Report& r) {
  json j;
  j["tool_version"] = r.tool_version;
  j["dataset_hash"] = r.dataset_hash;
  j["reference"] = r.reference;
  j["model_hashes"] = json::array();
  for (const auto& [seed, h] : r.model_hashes) j["model_hashes"].push_back({{"seed", seed}, {"hash", h}});
  j["cells"] = json::array();
  for (const auto& c : r.cells) {
    j["cells"].push_back({{"seed", c.seed},
                          {"attack", c.attack},
                          {"epsilon", c.epsilon},
                          {"codec", c.codec},
                          {"setting", c.setting},
                          {"target_db", opt_json(c.target_db)},
                          {"correct", c.correct},
                          {"count", c.count},
                          {"excluded", c.excluded},
                          {"psnr_sum", c.psnr_sum},
                          {"psnr_count", c.psnr_count},
                          {"bytes_sum", c.bytes_sum},
                          {"exact_hits", c.exact_hits},
                          {"accuracy", opt_json(c.accuracy())},
                          {"mean_psnr", opt_json(c.mean_psnr())},
                          {"mean_bytes", opt_json(c.mean_bytes())},
                          {"exact_hit_rate", opt_json(c.exact_hit_rate())}});
  }
  return j.dump(2) + "\n";
}

Report report_from_json(const std::string& text) {
  Report r;
  try {
    const json j = json::parse(text);
    r.tool_version = j.at("tool_version").get<std::string>();
    r.dataset_hash = j.at("dataset_hash").get<std::string>();
    r.reference = j.at("reference").get<std::string>();
    for (const json& m : j.at("model_hashes"))
      r.model_hashes.emplace_back(m.at("seed").get<std::uint64_t>(), m.at("hash").get<std::string>());
    for (const json& cj : j.at("cells")) {
      AccuracyCell c;
      c.seed = cj.at("seed").get<std::uint64_t>();
      c.attack = cj.at("attack").get<std::string>();
      c.epsilon = cj.at("epsilon").get<double>();
      c.codec = cj.at("codec").get<std::string>();
      c.setting = cj.at("setting").get<std::string>();
      if (!cj.at("target_db").is_null()) c.target_db = cj.at("target_db").get<double>();
      c.correct = cj.at("correct").get<std::size_t>();
      c.count = cj.at("count").get<std::size_t>();
      c.excluded = cj.at("excluded").get<std::size_t>();
      c.psnr_sum = cj.at("psnr_sum").get<double>();
      c.psnr_count = cj.at("psnr_count").get<std::size_t>();
      c.bytes_sum = cj.at("bytes_sum").get<double>();
      c.exact_hits = cj.at("exact_hits").get<std::size_t>();
      if (c.correct > c.count) throw FormatError("report: cell " + c.key() + " has correct > count");
      r.cells.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

double evaluate_accuracy(const Model& m, const std::vector<Image>& images, const std::vector<int>& labels) {
  if (images.empty()) throw ParameterError("evaluate_accuracy: empty set");
  if (images.size() != labels.size()) throw ParameterError("evaluate_accuracy: label count mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Image x = images[i];
    x.round_to_integers();
    correct += predict(m, x) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

double evaluate_accuracy(const Model& m, const Dataset& data) {
  std::vector<Image> images;
  std::vector<int> labels;
  for (const auto& s : data.samples) {
    images.push_back(s.image);
    labels.push_back(s.label);
  }
  return evaluate_accuracy(m, images, labels);
}

namespace {

struct CellSpec {
  int attack = -1;  // -1 = clean baseline
  int codec = -1;   // -1 = uncompressed
  int target = -1;  // index into targets; -1 with codec >= 0 means max compression
};

struct Outcome {
  bool correct = false;
  bool excluded = false;
  std::optional<double> psnr;  // finite achieved PSNR
  std::size_t bytes = 0;
  bool exact = false;
};

struct ImageResult {
  std::vector<Outcome> outcomes;  // per cell
  std::vector<CompressionRecord> records;
};

std::vector<CellSpec> make_cells(const ExperimentGrid& g) {
  std::vector<CellSpec> cells;
  if (g.include_uncompressed_baseline) cells.push_back({-1, -1, -1});
  for (int a = 0; a < static_cast<int>(g.attacks.size()); ++a) {
    if (g.include_uncompressed_baseline) cells.push_back({a, -1, -1});
    for (int c = 0; c < static_cast<int>(g.codecs.size()); ++c) {
      for (int t = 0; t < static_cast<int>(g.targets.size()); ++t) cells.push_back({a, c, t});
      if (g.include_max_compression) cells.push_back({a, c, -1});
    }
  }
  return cells;
}

AccuracyCell describe(const ExperimentGrid& g, const CellSpec& s, std::uint64_t seed) {
  AccuracyCell c;
  c.seed = seed;
  if (s.attack < 0) {
    c.attack = "none";
  } else {
    c.attack = std::string(attack_name(g.attacks[s.attack].kind));
    c.epsilon = g.attacks[s.attack].epsilon;
  }
  if (s.codec < 0) {
    c.codec = "uncompressed";
    c.setting = "none";
  } else {
    c.codec = std::string(codec_name(g.codecs[s.codec]));
    if (s.target >= 0) {
      c.target_db = g.targets[s.target];
      c.setting = fmt_g(g.targets[s.target]);
    } else {
      c.setting = "max";
    }
  }
  return c;
}

bool classify(const Model& m, const Image& img, int label) {
  Image x = img;
  x.round_to_integers();
  return predict(m, x) == label;
}

int classify_label(const Model& m, const Image& img) {
  Image x = img;
  x.round_to_integers();
  return predict(m, x);
}

// Compressed-cell results for one adversarial image, in cell order for the
// given attack. Shares one wavelet encode across targets.
struct CodecRun {
  CellSpec spec;
  std::optional<CompressionResult> result;
};

std::vector<CodecRun> compress_cells(const ExperimentGrid& g, const std::vector<CellSpec>& cells, int attack,
                                     const Image& adv, const Image& clean) {
  std::vector<CodecRun> runs;
  std::optional<Image> reference;
  if (g.reference == ReferenceMode::clean) reference = clean;
  for (int c = 0; c < static_cast<int>(g.codecs.size()); ++c) {
    const Codec codec = g.codecs[c];
    std::optional<EmbeddedStream> full;
    if (codec == Codec::wavelet) full = encode_embedded(adv);
    for (const auto& s : cells) {
      if (s.attack != attack || s.codec != c) continue;
      CodecRun run{s, std::nullopt};
      if (s.target >= 0) {
        RateTarget rt;
        rt.target_db = Decibels::finite(g.targets[s.target]);
        rt.reference = reference;
        try {
          if (codec == Codec::dct)
            run.result = compress_to_psnr_dct(adv, rt);
          else
            run.result = wavelet_select(*full, adv, rt);
        } catch (const InfeasibleTarget&) {
        }
      } else if (codec == Codec::dct) {
        run.result = compress_max(adv, Codec::dct, reference);
      } else {
        run.result = wavelet_result_at(*full, full->truncation.front().offset, reference ? *reference : adv);
        run.result->evaluations = 1;
      }
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

ImageResult run_image(const ExperimentGrid& g, const std::vector<CellSpec>& cells, const Model& m,
                      const Sample& s, std::uint64_t seed) {
  ImageResult out;
  out.outcomes.resize(cells.size());
  auto index_of = [&](const CellSpec& spec) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].attack == spec.attack && cells[i].codec == spec.codec && cells[i].target == spec.target) return i;
    throw std::logic_error("cell lookup failed");
  };
  if (g.include_uncompressed_baseline) out.outcomes[index_of({-1, -1, -1})].correct = classify(m, s.image, s.label);
  for (int a = 0; a < static_cast<int>(g.attacks.size()); ++a) {
    const Image adv = run_attack(m, s.image, s.label, g.attacks[a]);
    if (g.include_uncompressed_baseline) {
      Outcome& o = out.outcomes[index_of({a, -1, -1})];
      o.correct = classify(m, adv, s.label);
      if (g.reference == ReferenceMode::clean) {
        const Decibels d = psnr(s.image, adv);
        if (!d.is_lossless()) o.psnr = d.value();
      }
    }
    for (auto& run : compress_cells(g, cells, a, adv, s.image)) {
      const std::size_t ci = index_of(run.spec);
      Outcome& o = out.outcomes[ci];
      CompressionRecord rec;
      rec.seed = seed;
      rec.cell = describe(g, run.spec, seed).key();
      rec.image = s.name;
      if (!run.result) {
        o.excluded = true;
      } else {
        const CompressionResult& r = *run.result;
        rec.predicted = classify_label(m, r.decoded);
        o.correct = rec.predicted == s.label;
        if (!r.achieved_db.is_lossless()) o.psnr = r.achieved_db.value();
        o.bytes = r.byte_size;
        o.exact = r.exact_hit;
        rec.result = r;
        rec.result->stream.clear();
        rec.result->decoded = Image();
      }
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<ImageResult> run_parallel(const ExperimentGrid& g, const std::vector<CellSpec>& cells, const Model& m,
                                      const std::vector<Sample>& samples, std::uint64_t seed) {
  std::vector<ImageResult> results(samples.size());
  const unsigned workers = std::max(
      1u, std::min<unsigned>(g.workers == 0 ? std::thread::hardware_concurrency() : g.workers,
                             static_cast<unsigned>(samples.size())));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= samples.size()) return;
      try {
        results[i] = run_image(g, cells, m, samples[i], seed);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = samples.size();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

struct LoadedInputs {
  Dataset test;
  std::vector<std::pair<std::uint64_t, Model>> models;
};

LoadedInputs load_inputs(const ExperimentGrid& g) {
  g.validate();
  LoadedInputs in;
  in.test = load_dataset(g.dataset);
  if (in.test.empty()) throw IoError("dataset " + g.dataset + " has no images");
  if (g.limit > 0 && in.test.samples.size() > g.limit) in.test.samples.resize(g.limit);
  if (!g.model.empty()) {
    in.models.emplace_back(g.seeds.front(), read_model(g.model));
  } else {
    const Dataset train_data = load_dataset(g.train_dataset, in.test.num_classes);
    for (std::uint64_t seed : g.seeds) {
      TrainConfig cfg = g.train;
      cfg.seed = seed;
      in.models.emplace_back(seed, train(train_data, cfg));
    }
  }
  for (const auto& [seed, m] : in.models) {
    m.check_input(in.test.samples.front().image);
    if (in.test.num_classes > m.classes())
      throw ConfigError("dataset has more classes than the model (" + std::to_string(in.test.num_classes) + " > " +
                        std::to_string(m.classes()) + ")");
  }
  return in;
}

}  // namespace

Report run_experiment(const ExperimentGrid& g, const RecordSink& sink) {
  const LoadedInputs in = load_inputs(g);
  const auto cells = make_cells(g);
  Report rep;
  rep.dataset_hash = hex64(dataset_hash(in.test));
  rep.reference = reference_name(g.reference);
  for (const auto& [seed, m] : in.models) {
    rep.model_hashes.emplace_back(seed, hex64(model_hash(m)));
    std::vector<AccuracyCell> acc;
    for (const auto& c : cells) acc.push_back(describe(g, c, seed));
    const auto results = run_parallel(g, cells, m, in.test.samples, seed);
    for (const auto& r : results) {
      for (std::size_t k = 0; k < cells.size(); ++k) {
        const Outcome& o = r.outcomes[k];
        AccuracyCell& c = acc[k];
        if (o.excluded) {
          ++c.excluded;
          continue;
        }
        ++c.count;
        c.correct += o.correct;
        if (o.psnr) {
          c.psnr_sum += *o.psnr;
          ++c.psnr_count;
        }
        c.bytes_sum += static_cast<double>(o.bytes);
        c.exact_hits += o.exact;
      }
      if (sink)
        for (const auto& rec : r.records) sink(rec);
    }
    rep.cells.insert(rep.cells.end(), acc.begin(), acc.end());
  }
  return rep;
}

namespace {

std::string record_line(const CompressionRecord& rec) {
  json j{{"seed", rec.seed}, {"cell", rec.cell}, {"image", rec.image}};
  if (!rec.result) {
    j["infeasible"] = true;
  } else {
    const auto& r = *rec.result;
    j["infeasible"] = false;
    j["codec"] = std::string(codec_name(r.codec));
    j["achieved_db"] = r.achieved_db.is_lossless() ? json("inf") : json(r.achieved_db.value());
    j["bytes"] = r.byte_size;
    j["exact_hit"] = r.exact_hit;
    if (r.codec == Codec::dct)
      j["multiplier"] = r.multiplier;
    else
      j["offset"] = r.offset;
    j["predicted"] = rec.predicted;
  }
  return j.dump();
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string());
}

}  // namespace

Report run_experiment_to_disk(const ExperimentGrid& g) {
  if (g.output_dir.empty()) throw ConfigError("grid: output_dir is required");
  const std::filesystem::path dir(g.output_dir);
  ensure_dir(dir);
  std::ofstream records(dir / "records.jsonl", std::ios::binary | std::ios::trunc);
  if (!records) throw IoError("cannot write " + (dir / "records.jsonl").string());
  const Report rep = run_experiment(g, [&](const CompressionRecord& r) { records << record_line(r) << '\n'; });
  records.close();
  if (!records) throw IoError("failed writing " + (dir / "records.jsonl").string());
  const std::string text = report_to_json(rep);
  write_file(dir / "report.json", std::vector<std::uint8_t>(text.begin(), text.end()));
  return rep;
}

namespace {

struct Pooled {
  std::size_t correct = 0, count = 0;
  std::optional<double> accuracy() const {
    if (count == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(count);
  }
};

std::string attack_title(const std::string& attack, double eps) {
  std::string name = attack;
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
  return name + " (eps=" + fmt_g(eps) + ")";
}

std::string attack_column(const std::string& attack, double eps) { return attack + "_eps" + fmt_g(eps); }

}  // namespace

std::string emit_table(const Report& r, const TableOptions& opt) {
  // Column and row order follow first appearance in the report.
  std::vector<std::pair<std::string, double>> columns;
  std::vector<std::pair<std::string, std::string>> rows;  // (codec, setting)
  std::map<std::tuple<std::string, std::string, std::string, double>, Pooled> pooled;
  for (const auto& c : r.cells) {
    if (c.attack == "none") continue;
    const std::pair<std::string, double> col{c.attack, c.epsilon};
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    const bool wanted = c.codec == "uncompressed" || (opt.kind == TableKind::max) == (c.setting == "max");
    if (!wanted) continue;
    const std::pair<std::string, std::string> row{c.codec, c.setting};
    if (c.codec != "uncompressed" && std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
    Pooled& p = pooled[{c.codec, c.setting, c.attack, c.epsilon}];
    p.correct += c.correct;
    p.count += c.count;
  }
  bool has_uncompressed = false;
  for (const auto& [key, p] : pooled) has_uncompressed = has_uncompressed || std::get<0>(key) == "uncompressed";
  if (has_uncompressed) rows.emplace_back("uncompressed", "none");

  auto value = [&](const std::pair<std::string, std::string>& row, const std::pair<std::string, double>& col) {
    const auto it = pooled.find({row.first, row.second, col.first, col.second});
    return it == pooled.end() ? std::optional<double>{} : it->second.accuracy();
  };

  std::string out;
  const bool psnr_table = opt.kind == TableKind::psnr;
  if (opt.format == TableFormat::csv) {
    out += psnr_table ? "compression,psnr_db" : "compression";
    for (const auto& col : columns) out += "," + attack_column(col.first, col.second);
    out += "\n";
    for (const auto& row : rows) {
      out += row.first;
      if (psnr_table) out += "," + std::string(row.first == "uncompressed" ? "NA" : row.second);
      for (const auto& col : columns) {
        const auto v = value(row, col);
        out += "," + (v ? fmt_full(*v) : std::string("NA"));
      }
      out += "\n";
    }
    return out;
  }

  std::vector<std::optional<double>> best(columns.size());
  if (opt.bold_best)
    for (std::size_t k = 0; k < columns.size(); ++k)
      for (const auto& row : rows) {
        const auto v = value(row, columns[k]);
        if (v && (!best[k] || *v > *best[k])) best[k] = v;
      }

  out += psnr_table ? "| Compression | PSNR (dB) |" : "| Compression |";
  for (const auto& col : columns) out += " " + attack_title(col.first, col.second) + " |";
  out += psnr_table ? "\n|---|---|" : "\n|---|";
  for (std::size_t k = 0; k < columns.size(); ++k) out += "---|";
  out += "\n";
  std::string previous;
  for (const auto& row : rows) {
    const std::string name = row.first == "uncompressed" ? "Uncompressed" : row.first;
    out += "| " + (name == previous ? std::string() : name) + " |";
    previous = name;
    if (psnr_table) out += " " + std::string(row.first == "uncompressed" ? "NA" : row.second) + " |";
    for (std::size_t k = 0; k < columns.size(); ++k) {
      const auto v = value(row, columns[k]);
      char buf[32];
      std::string cell = "NA";
      if (v) {
        std::snprintf(buf, sizeof buf, "%.3f", *v);
        cell = buf;
        if (opt.bold_best && best[k] && *v == *best[k]) cell = "**" + cell + "**";
      }
      out += " " + cell + " |";
    }
    out += "\n";
  }
  return out;
}

void dump_samples(const ExperimentGrid& g, std::size_t n, const std::filesystem::path& out_dir) {
  if (n < 1) throw ConfigError("dump: n must be >= 1");
  ExperimentGrid sub = g;
  sub.seeds = {g.seeds.front()};
  if (sub.limit == 0 || sub.limit > n) sub.limit = n;
  const LoadedInputs in = load_inputs(sub);
  ensure_dir(out_dir);
  const Model& m = in.models.front().second;
  const std::uint64_t seed = in.models.front().first;
  const auto cells = make_cells(sub);

  std::ofstream manifest(out_dir / "manifest.jsonl", std::ios::binary | std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (out_dir / "manifest.jsonl").string());
  const std::string ext = in.test.samples.front().image.channels() == 3 ? ".ppm" : ".pgm";
  for (std::size_t i = 0; i < in.test.samples.size(); ++i) {
    const Sample& s = in.test.samples[i];
    for (int a = 0; a < static_cast<int>(sub.attacks.size()); ++a) {
      const Image adv = run_attack(m, s.image, s.label, sub.attacks[a]);
      for (auto& run : compress_cells(sub, cells, a, adv, s.image)) {
        if (!run.result) continue;
        Image decoded = run.result->decoded;
        decoded.round_to_integers();
        std::string stem = describe(sub, run.spec, seed).key();
        std::replace(stem.begin(), stem.end(), '/', '_');
        char idx[16];
        std::snprintf(idx, sizeof idx, "%04zu", i);
        stem += std::string("_") + idx;
        const std::string clean_file = stem + "_clean" + ext;
        const std::string adv_file = stem + "_adv" + ext;
        const std::string dec_file = stem + "_decoded" + ext;
        write_netpbm(out_dir / clean_file, s.image);
        write_netpbm(out_dir / adv_file, adv);
        write_netpbm(out_dir / dec_file, decoded);
        const Image& ref = sub.reference == ReferenceMode::clean ? s.image : adv;
        const Decibels d = psnr(ref, decoded);
        json j{{"cell", describe(sub, run.spec, seed).key()},
               {"source", s.name},
               {"label", s.label},
               {"clean", clean_file},
               {"adversarial", adv_file},
               {"decoded", dec_file},
               {"psnr_db", d.is_lossless() ? json("inf") : json(d.value())},
               {"bytes", run.result->byte_size},
               {"predicted_adversarial", classify_label(m, adv)},
               {"predicted_decoded", predict(m, decoded)}};
        manifest << j.dump() << '\n';
      }
    }
  }
  manifest.close();
  if (!manifest) throw IoError("failed writing " + (out_dir / "manifest.jsonl").string());
}

}  // namespace cdlab
