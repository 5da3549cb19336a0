// cdlab: command-line front end for the codecs, attacks and experiment grid.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 I/O or format
// error, 4 internal invariant violation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cdlab/attacks.hpp"
#include "cdlab/dataset.hpp"
#include "cdlab/dct_codec.hpp"
#include "cdlab/embedded.hpp"
#include "cdlab/harness.hpp"
#include "cdlab/model.hpp"
#include "cdlab/netpbm.hpp"
#include "cdlab/ratecontrol.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cdlab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitInternal = 4;

std::string read_text(const fs::path& p) {
  const auto b = read_file(p);
  return std::string(b.begin(), b.end());
}

void write_text(const fs::path& p, const std::string& s) {
  write_file(p, std::vector<std::uint8_t>(s.begin(), s.end()));
}

json decibels_json(Decibels d) { return d.is_lossless() ? json("inf") : json(d.value()); }

json result_json(const CompressionResult& r, std::optional<double> target) {
  json j{{"codec", std::string(codec_name(r.codec))},
         {"target_db", target ? json(*target) : json(nullptr)},
         {"achieved_db", decibels_json(r.achieved_db)},
         {"bytes", r.byte_size},
         {"exact_hit", r.exact_hit},
         {"evaluations", r.evaluations}};
  if (r.codec == Codec::dct)
    j["multiplier"] = r.multiplier;
  else
    j["offset"] = r.offset;
  return j;
}

// Resolves paths in a grid file relative to the file's directory.
ExperimentGrid load_grid(const fs::path& config) {
  ExperimentGrid g = parse_grid(read_text(config));
  const fs::path base = config.parent_path();
  auto fix = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  fix(g.dataset);
  fix(g.model);
  fix(g.train_dataset);
  fix(g.output_dir);
  return g;
}

std::vector<std::size_t> parse_hidden(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v <= 0) throw ParameterError("");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ParameterError("--hidden expects positive integers separated by commas, got '" + s + "'");
    }
  }
  return out;
}

// Image, DCX1/WVX1 stream, or dataset directory.
Image load_image_or_stream(const fs::path& p) {
  const auto bytes = read_file(p);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_netpbm(bytes);
  return decode_any(bytes);
}

int cmd_synth(const std::string& kind, std::size_t count, std::uint64_t seed, const std::string& split, int size,
              const fs::path& out) {
  Dataset d;
  if (kind == "desk") {
    d = synth::desk_dataset(count, seed, split);
  } else if (kind == "natural") {
    d.num_classes = 1;
    d.split = split;
    const auto images = synth::natural_corpus(count, size, seed);
    for (std::size_t i = 0; i < images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.pgm", i);
      d.samples.push_back({name, images[i], 0});
    }
  } else {
    throw ParameterError("synth kind must be desk or natural");
  }
  save_dataset(d, out);
  std::cout << json{{"images", d.size()}, {"dir", out.string()}, {"hash", dataset_hash(d)}}.dump() << "\n";
  return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& out, TrainConfig cfg, const std::string& hidden,
              const std::string& test_dir) {
  cfg.hidden = parse_hidden(hidden);
  const Dataset data = load_dataset(data_dir);
  std::optional<Dataset> test;
  if (!test_dir.empty()) test = load_dataset(test_dir, data.num_classes);
  TrainReport rep;
  const Model m = train(data, cfg, &rep);
  write_model(out, m);
  json j{{"model", out.string()},
         {"train_accuracy", rep.train_accuracy},
         {"final_loss", rep.final_loss},
         {"model_hash", model_hash(m)}};
  if (test) j["test_accuracy"] = evaluate_accuracy(m, *test);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_attack(const fs::path& model_path, const AttackConfig& cfg, const fs::path& data_dir, const fs::path& out) {
  cfg.validate();
  const Model m = read_model(model_path);
  const Dataset data = load_dataset(data_dir);
  Dataset adv;
  adv.num_classes = data.num_classes;
  adv.split = data.split;
  std::ostringstream manifest;
  for (const auto& s : data.samples) {
    Image a = run_attack(m, s.image, s.label, cfg);
    double linf = 0.0;
    for (std::size_t i = 0; i < a.samples().size(); ++i)
      linf = std::max(linf, std::abs(a.samples()[i] - s.image.samples()[i]));
    manifest << json{{"source", s.name},       {"label", s.label},
                     {"kind", std::string(attack_name(cfg.kind))}, {"epsilon", cfg.epsilon},
                     {"linf", linf}}
                    .dump()
             << "\n";
    adv.samples.push_back({s.name, std::move(a), s.label});
  }
  save_dataset(adv, out);
  write_text(out / "manifest.jsonl", manifest.str());
  std::cout << json{{"images", adv.size()},
                    {"accuracy", evaluate_accuracy(m, adv)},
                    {"clean_accuracy", evaluate_accuracy(m, data)}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_compress(const std::string& codec_str, std::optional<double> target, bool max_mode,
                 std::optional<double> multiplier, const std::string& reference, const fs::path& in,
                 const fs::path& out, const std::string& decoded_out, double tolerance) {
  const Codec codec = parse_codec(codec_str);
  const int modes = (target ? 1 : 0) + (max_mode ? 1 : 0) + (multiplier ? 1 : 0);
  if (modes != 1) throw ParameterError("choose exactly one of --psnr, --max, --multiplier");
  if (multiplier && codec != Codec::dct) throw ParameterError("--multiplier applies to the dct codec only");
  const Image img = read_netpbm(in);
  std::optional<Image> ref;
  if (!reference.empty()) ref = read_netpbm(reference);
  CompressionResult r;
  if (target) {
    RateTarget rt;
    rt.target_db = Decibels::finite(*target);
    rt.reference = ref;
    if (codec == Codec::dct) {
      if (tolerance > 0) rt.tolerance_db = tolerance;
      r = compress_to_psnr_dct(img, rt);
    } else {
      WaveletRateOptions o;
      if (tolerance > 0) o.tolerance_db = tolerance;
      rt.tolerance_db = o.tolerance_db;
      r = compress_to_psnr_wavelet(img, rt, o);
    }
  } else if (max_mode) {
    r = compress_max(img, codec, ref);
  } else {
    const DctStream s = encode_dct(img, *multiplier);
    r.codec = Codec::dct;
    r.stream = s.serialize();
    r.decoded = decode_dct(s);
    r.achieved_db = psnr(ref ? *ref : img, r.decoded);
    r.byte_size = r.stream.size();
    r.multiplier = *multiplier;
    r.evaluations = 1;
  }
  write_file(out, r.stream);
  if (!decoded_out.empty()) {
    Image d = r.decoded;
    d.round_to_integers();
    write_netpbm(decoded_out, d);
  }
  std::cout << result_json(r, target).dump() << "\n";
  return 0;
}

int cmd_decode(const fs::path& in, const fs::path& out) {
  Image d = decode_any(read_file(in));
  d.round_to_integers();
  write_netpbm(out, d);
  return 0;
}

int cmd_classify(const fs::path& model_path, const std::vector<std::string>& inputs) {
  const Model m = read_model(model_path);
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      const Dataset d = load_dataset(in, m.classes());
      std::cout << json{{"dataset", in}, {"images", d.size()}, {"accuracy", evaluate_accuracy(m, d)}}.dump() << "\n";
      continue;
    }
    Image x = load_image_or_stream(in);
    x.round_to_integers();
    const auto p = forward(m, x);
    std::cout << json{{"input", in}, {"predicted", predict(m, x)}, {"probabilities", p}}.dump() << "\n";
  }
  return 0;
}

int cmd_experiment(const fs::path& config, const std::string& output) {
  ExperimentGrid g = load_grid(config);
  if (!output.empty()) g.output_dir = output;
  const Report r = run_experiment_to_disk(g);
  std::cout << emit_table(r, {TableFormat::markdown, TableKind::psnr, true});
  if (g.include_max_compression) std::cout << "\n" << emit_table(r, {TableFormat::markdown, TableKind::max, true});
  return 0;
}

int cmd_table(const fs::path& report, const std::string& format, const std::string& kind, bool bold,
              const std::string& out) {
  TableOptions o;
  if (format == "csv")
    o.format = TableFormat::csv;
  else if (format != "markdown")
    throw ParameterError("--format must be csv or markdown");
  if (kind == "max")
    o.kind = TableKind::max;
  else if (kind != "psnr")
    throw ParameterError("--kind must be psnr or max");
  o.bold_best = bold;
  const std::string text = emit_table(report_from_json(read_text(report)), o);
  if (out.empty())
    std::cout << text;
  else
    write_text(out, text);
  return 0;
}

int cmd_dump(const fs::path& config, std::size_t n, const fs::path& out) {
  dump_samples(load_grid(config), n, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdlab: compression as a defense against adversarial examples"};
  app.require_subcommand(1);
  std::function<int()> action;

  // synth
  std::string synth_kind, synth_split = "test";
  std::size_t synth_count = 1000;
  std::uint64_t synth_seed = 1;
  int synth_size = 256;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (desk shapes or natural-like images)");
  synth->add_option("kind", synth_kind, "desk or natural")->required();
  synth->add_option("out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of images");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--split", synth_split, "Split tag");
  synth->add_option("--size", synth_size, "Side length for natural images");
  synth->callback([&] {
    action = [&] { return cmd_synth(synth_kind, synth_count, synth_seed, synth_split, synth_size, synth_out); };
  });

  // train
  std::string train_data, train_out, train_hidden = "128,64", train_test;
  TrainConfig tcfg;
  auto* trn = app.add_subcommand("train", "Train the classifier on a dataset directory");
  trn->add_option("dataset", train_data, "Dataset directory")->required();
  trn->add_option("-o,--output", train_out, "Model file to write")->required();
  trn->add_option("--epochs", tcfg.epochs);
  trn->add_option("--batch", tcfg.batch_size);
  trn->add_option("--lr", tcfg.learning_rate);
  trn->add_option("--momentum", tcfg.momentum);
  trn->add_option("--seed", tcfg.seed);
  trn->add_option("--hidden", train_hidden, "Hidden layer sizes, comma separated");
  trn->add_option("--test", train_test, "Test dataset to report accuracy on");
  trn->callback([&] { action = [&] { return cmd_train(train_data, train_out, tcfg, train_hidden, train_test); }; });

  // attack
  std::string atk_model, atk_kind = "fgsm", atk_data, atk_out;
  AttackConfig acfg;
  auto* atk = app.add_subcommand("attack", "Generate adversarial images for a dataset");
  atk->add_option("--model", atk_model)->required();
  atk->add_option("--kind", atk_kind, "fgsm or bim");
  atk->add_option("--eps", acfg.epsilon, "Epsilon on the 0..255 scale")->required();
  atk->add_option("--alpha", acfg.alpha, "BIM step size");
  atk->add_option("--iters", acfg.iterations, "BIM iterations (default min(eps+4, round(1.25 eps)))");
  atk->add_option("dataset", atk_data)->required();
  atk->add_option("out", atk_out)->required();
  atk->callback([&] {
    action = [&] {
      acfg.kind = parse_attack(atk_kind);
      return cmd_attack(atk_model, acfg, atk_data, atk_out);
    };
  });

  // compress
  std::string cmp_codec = "dct", cmp_ref, cmp_in, cmp_out, cmp_decoded;
  std::optional<double> cmp_psnr, cmp_mult;
  bool cmp_max = false;
  double cmp_tol = 0.0;
  auto* cmp = app.add_subcommand("compress", "Compress an image to a PSNR target, at maximum compression, or at a fixed multiplier");
  cmp->add_option("--codec", cmp_codec, "dct or wavelet");
  cmp->add_option("--psnr", cmp_psnr, "Target PSNR in dB");
  cmp->add_flag("--max", cmp_max, "Smallest stream the codec allows");
  cmp->add_option("--multiplier", cmp_mult, "Fixed quantization multiplier (dct)");
  cmp->add_option("--reference", cmp_ref, "Image PSNR is measured against (default: the input)");
  cmp->add_option("--tolerance", cmp_tol, "Hit tolerance in dB (default 0.01 dct, 0.25 wavelet)");
  cmp->add_option("--decoded", cmp_decoded, "Also write the decoded image");
  cmp->add_option("input", cmp_in)->required();
  cmp->add_option("output", cmp_out)->required();
  cmp->callback([&] {
    action = [&] {
      return cmd_compress(cmp_codec, cmp_psnr, cmp_max, cmp_mult, cmp_ref, cmp_in, cmp_out, cmp_decoded, cmp_tol);
    };
  });

  // decode
  std::string dec_in, dec_out;
  auto* dec = app.add_subcommand("decode", "Decode a DCX1 or WVX1 stream to PGM/PPM");
  dec->add_option("input", dec_in)->required();
  dec->add_option("output", dec_out)->required();
  dec->callback([&] { action = [&] { return cmd_decode(dec_in, dec_out); }; });

  // classify
  std::string cls_model;
  std::vector<std::string> cls_inputs;
  auto* cls = app.add_subcommand("classify", "Classify images, streams or dataset directories");
  cls->add_option("--model", cls_model)->required();
  cls->add_option("inputs", cls_inputs)->required();
  cls->callback([&] { action = [&] { return cmd_classify(cls_model, cls_inputs); }; });

  // experiment
  std::string exp_config, exp_out;
  auto* exp = app.add_subcommand("experiment", "Run the attack x compression grid from a JSON config");
  exp->add_option("config", exp_config)->required();
  exp->add_option("-o,--output", exp_out, "Override output_dir");
  exp->callback([&] { action = [&] { return cmd_experiment(exp_config, exp_out); }; });

  // table
  std::string tab_report, tab_format = "markdown", tab_kind = "psnr", tab_out;
  bool tab_bold = false;
  auto* tab = app.add_subcommand("table", "Render a report as CSV or markdown");
  tab->add_option("report", tab_report)->required();
  tab->add_option("--format", tab_format, "csv or markdown");
  tab->add_option("--kind", tab_kind, "psnr or max");
  tab->add_flag("--bold", tab_bold, "Bold the best cell per column");
  tab->add_option("-o,--output", tab_out);
  tab->callback([&] { action = [&] { return cmd_table(tab_report, tab_format, tab_kind, tab_bold, tab_out); }; });

  // dump
  std::string dump_config, dump_out;
  std::size_t dump_n = 1;
  auto* dmp = app.add_subcommand("dump", "Write clean/adversarial/decoded triplets per cell");
  dmp->add_option("config", dump_config)->required();
  dmp->add_option("out", dump_out)->required();
  dmp->add_option("-n", dump_n, "Images per cell");
  dmp->callback([&] { action = [&] { return cmd_dump(dump_config, dump_n, dump_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    return action ? action() : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleTarget& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {  // ParameterError, ShapeError
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DecodeError& e) {
    std::cerr << "decode error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
