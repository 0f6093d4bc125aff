// rfseg: synth | train | predict | eval | bench
#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rfseg/augment.hpp"
#include "rfseg/config.hpp"
#include "rfseg/dataset.hpp"
#include "rfseg/evaluate.hpp"
#include "rfseg/image_io.hpp"
#include "rfseg/parallel.hpp"
#include "rfseg/pipelines.hpp"
#include "rfseg/resource.hpp"
#include "rfseg/synth.hpp"

namespace fs = std::filesystem;
using namespace rfseg;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string config;
};

// Options shared by train and bench.
struct TrainOptions {
  fs::path dataset;
  double ratio = 0.8;
  int target = 512;
  std::uint32_t trees = 100;
  std::uint32_t max_depth = 40;
  std::uint32_t mtry = 0;
  bool no_bootstrap = false;
  std::uint32_t min_samples_leaf = 1;
  std::string sampling = "balanced";
  std::size_t samples = 4096;
  int augment_factor = 10;
  fs::path augment_config;
  std::vector<std::string> augment_overrides;
  int wi_size = 64;
  std::optional<std::size_t> max_images;
  bool augment_first = false;
  bool binarize = false;
};

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--dataset", o.dataset, "dataset root (images/, masks/)")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--ratio", o.ratio, "train fraction")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--target", o.target, "working resolution (square)")->check(CLI::PositiveNumber);
  cmd->add_option("--trees", o.trees, "number of trees")->check(CLI::PositiveNumber);
  cmd->add_option("--max-depth", o.max_depth, "maximum tree depth")->check(CLI::PositiveNumber);
  cmd->add_option("--mtry", o.mtry, "features per split (0 = floor(sqrt(D)))");
  cmd->add_flag("--no-bootstrap", o.no_bootstrap, "train every tree on the full set");
  cmd->add_option("--min-samples-leaf", o.min_samples_leaf, "minimum leaf weight")->check(CLI::PositiveNumber);
  cmd->add_option("--sampling", o.sampling, "pixel sampling for rf_fe")
      ->check(CLI::IsMember({"all", "per-image", "balanced"}));
  cmd->add_option("--samples", o.samples, "pixels per image for per-image/balanced")->check(CLI::PositiveNumber);
  cmd->add_option("--augment-factor", o.augment_factor, "pairs per training image after augmentation (1 = off)")
      ->check(CLI::Range(1, 1000));
  cmd->add_option("--augment-config", o.augment_config, "key=value augmentation parameters")
      ->check(CLI::ExistingFile);
  cmd->add_option("--augment", o.augment_overrides, "augmentation parameter KEY=VALUE (repeatable; wins over --augment-config)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  cmd->add_option("--wi-size", o.wi_size, "rf_wi input/output size (0 = working resolution)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--max-images", o.max_images, "rf_wi cap on training images (seeded draw)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--augment-first", o.augment_first, "augment before splitting (leaks; comparison only)");
  cmd->add_flag("--binarize-masks", o.binarize, "treat any non-zero mask value as class 1");
}

ForestParams forest_params(const TrainOptions& o, const Globals& g) {
  ForestParams p;
  p.n_trees = o.trees;
  p.max_depth = o.max_depth;
  p.mtry = o.mtry;
  p.bootstrap = !o.no_bootstrap;
  p.min_samples_leaf = o.min_samples_leaf;
  p.seed = g.seed;
  return p;
}

Sampling sampling_of(const TrainOptions& o) {
  if (o.sampling == "all") return Sampling::all();
  if (o.sampling == "per-image") return Sampling::per_image(o.samples);
  return Sampling::balanced(o.samples);
}

ProtocolOptions protocol_of(const TrainOptions& o, const Globals& g) {
  ProtocolOptions p;
  p.ratio = o.ratio;
  p.seed = g.seed;
  p.target_w = p.target_h = o.target;
  p.augment_before_split = o.augment_first;
  if (o.augment_factor > 1 || !o.augment_config.empty() || !o.augment_overrides.empty()) {
    AugmentConfig cfg;
    cfg.seed = g.seed;
    cfg.factor = o.augment_factor;
    std::map<std::string, std::string> kv;
    if (!o.augment_config.empty())
      for (auto& [k, v] : parse_config_file(o.augment_config)) kv[k] = v;
    for (const auto& item : o.augment_overrides) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw UsageError("--augment expects KEY=VALUE, got '" + item + "'");
      kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    if (!kv.empty()) cfg.apply_key_values(kv);
    cfg.validate();
    if (cfg.factor > 1) p.augment = cfg;
  }
  return p;
}

DatasetOptions dataset_options(const TrainOptions& o) {
  DatasetOptions d;
  if (o.binarize) d.mask_values = MaskValues::Binarize;
  return d;
}

void print_headline(const std::string& label, const Headline& h) {
  std::printf("%s: macro_accuracy=%s dice=%s iou=%s sensitivity=%s\n", label.c_str(),
              detail::fmt6(h.macro_accuracy).c_str(), detail::fmt6(h.dice).c_str(), detail::fmt6(h.iou).c_str(),
              detail::fmt6(h.sensitivity).c_str());
}

void ensure_parent(const fs::path& file) {
  const auto parent = file.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (!fs::is_directory(parent)) throw Error(ErrorCode::IoError, "cannot create directory " + parent.string());
}

fs::path sibling(const fs::path& model, const std::string& suffix) {
  return model.parent_path() / (model.filename().string() + suffix);
}

TrainedModel train_arch(Architecture arch, const PreparedData& data, const TrainOptions& o, const Globals& g) {
  const auto params = forest_params(o, g);
  if (arch == Architecture::RfFe) return train_rf_fe(data.train, params, sampling_of(o), data.settings());
  WholeImageOptions wi;
  wi.wi_w = wi.wi_h = o.wi_size;
  wi.max_images = o.max_images;
  return train_rf_wi(data.train, params, wi, data.settings());
}

void check_leaks(const PreparedData& data, bool augment_first) {
  const auto leaks = leak_audit(data.train, data.test);
  if (leaks.empty()) return;
  if (!augment_first) throw Error(ErrorCode::InvalidArgument, "train/test leak detected: " + leaks.front());
  std::cerr << "warning: augmenting before the split leaks " << leaks.size() << " training pairs derived from test images\n";
}

// --- synth -------------------------------------------------------------------

struct SynthOptions {
  std::string kind = "blobs";
  SynthSpec spec;
  fs::path out;
};

int cmd_synth(const SynthOptions& o, const Globals& g) {
  SynthSpec spec = o.spec;
  spec.kind = parse_synth_kind(o.kind);
  spec.seed = g.seed;
  const auto pairs = generate_synth(spec);
  save_dataset(pairs, o.out);
  std::printf("wrote %zu %s pairs to %s\n", pairs.size(), o.kind.c_str(), o.out.string().c_str());
  return 0;
}

// --- train -------------------------------------------------------------------

struct TrainCmd {
  TrainOptions train;
  std::string arch = "fe";
  fs::path model_out;
  fs::path manifest_out;
  fs::path resources_out;
};

int cmd_train(const TrainCmd& o, const Globals& g) {
  const auto arch = parse_architecture(o.arch);
  const auto manifest_path = o.manifest_out.empty() ? sibling(o.model_out, ".manifest.txt") : o.manifest_out;
  const auto resources_path = o.resources_out.empty() ? sibling(o.model_out, ".resources.csv") : o.resources_out;
  for (const auto& p : {o.model_out, manifest_path, resources_path}) ensure_parent(p);

  const auto pairs = load_dataset(o.train.dataset, dataset_options(o.train));
  const auto protocol = protocol_of(o.train, g);
  std::vector<PhaseRecord> records;
  const std::string label = to_string(arch);
  const auto data = measure_phase(records, label, "preprocess", [&] { return prepare_protocol(pairs, protocol); });
  check_leaks(data, o.train.augment_first);
  const auto model = measure_phase(records, label, "train", [&] { return train_arch(arch, data, o.train, g); });

  save_model(model, o.model_out);
  write_manifest(data.manifest, manifest_path);
  emit_resource_csv(records, resources_path);
  std::printf("trained %s on %llu images (%llu samples), %zu test images\n", label.c_str(),
              static_cast<unsigned long long>(model.meta.n_train_images),
              static_cast<unsigned long long>(model.meta.n_samples), data.test.size());
  std::printf("model: %s\nmanifest: %s\nresources: %s\n", o.model_out.string().c_str(),
              manifest_path.string().c_str(), resources_path.string().c_str());
  return 0;
}

// --- predict -----------------------------------------------------------------

struct PredictCmd {
  fs::path model;
  fs::path input;
  fs::path out;
  bool overlay = false;
  fs::path masks;  // optional ground truth for overlay contours
};

std::vector<fs::path> list_inputs(const fs::path& input) {
  if (!fs::is_directory(input)) return {input};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input))
    if (e.is_regular_file() && detail::is_image_file(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::FileNotFound, "no images in " + input.string());
  return files;
}

std::optional<fs::path> find_by_stem(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".png", ".pgm", ".ppm", ".pnm"})
    if (auto p = dir / (stem + ext); fs::exists(p)) return p;
  return std::nullopt;
}

int cmd_predict(const PredictCmd& o, const Globals&) {
  const auto model = load_model(o.model);
  const auto inputs = list_inputs(o.input);
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (!fs::is_directory(o.out)) throw Error(ErrorCode::IoError, "cannot create " + o.out.string());
  // Images are predicted one at a time; each prediction is parallel inside.
  for (const auto& path : inputs) {
    const GrayImage raw = load_gray(path);
    const LabelMask working = predict_mask(model, prepare_image(model, raw));
    const LabelMask mask = restore_mask(model, working, raw.width, raw.height);
    const auto stem = path.stem().string();
    save_mask(mask, o.out / (stem + ".png"));
    if (o.overlay) {
      std::optional<LabelMask> gt;
      if (!o.masks.empty())
        if (auto p = find_by_stem(o.masks, stem)) gt = load_mask(*p, static_cast<int>(model.forest.n_classes));
      save_image(overlay_prediction(raw, mask, gt ? &*gt : nullptr), o.out / (stem + "_overlay.png"));
    }
  }
  std::printf("wrote %zu masks to %s\n", inputs.size(), o.out.string().c_str());
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalCmd {
  fs::path model;
  fs::path pred_dir;
  fs::path dataset;
  fs::path manifest;
  fs::path report;
  fs::path boxplot;
  fs::path scatter;
  fs::path scatter_out;
  std::string label;
  int target = 512;
  bool pooled = false;
  bool binarize = false;
};

int cmd_eval(const EvalCmd& o, const Globals&) {
  DatasetOptions dopts;
  if (o.binarize) dopts.mask_values = MaskValues::Binarize;
  const auto all = load_dataset(o.dataset, dopts);
  std::optional<TrainedModel> model;
  if (!o.model.empty()) model = load_model(o.model);

  fs::path manifest_path = o.manifest;
  if (manifest_path.empty() && model) manifest_path = sibling(o.model, ".manifest.txt");
  std::vector<SamplePair> test;
  if (!manifest_path.empty()) {
    test = select_pairs(all, manifest_ids(read_manifest(manifest_path), "test"));
  } else {
    std::cerr << "note: no manifest given; evaluating every dataset image\n";
    test = all;
  }
  if (test.empty()) throw Error(ErrorCode::EmptyTestSet, "manifest has no test ids");

  const auto [pad_w, pad_h] = max_dimensions(all);
  const int n_classes = model ? static_cast<int>(model->forest.n_classes) : detail::dataset_classes(all);
  TrainedModel frame;  // working-frame description for external masks
  if (model) {
    frame = *model;
  } else {
    frame.preprocess.target_w = frame.preprocess.target_h = o.target;
    frame.preprocess.pad_w = pad_w;
    frame.preprocess.pad_h = pad_h;
  }

  std::vector<SamplePair> working;
  for (const auto& p : test)
    working.emplace_back(prepare_image(frame, p.image), prepare_mask(frame, p.mask), p.id);

  EvalReport report;
  const std::string label = !o.label.empty() ? o.label
                            : model         ? o.model.stem().string()
                                            : o.pred_dir.filename().string();
  if (model) {
    report = evaluate_model([&](const GrayImage& img) { return predict_mask(*model, img); }, working, n_classes, label);
  } else {
    std::vector<std::string> missing;
    std::vector<LabelMask> preds;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto path = find_by_stem(o.pred_dir, test[i].id);
      if (!path) {
        missing.push_back(test[i].id);
        continue;
      }
      LabelMask pred = load_mask(*path, n_classes);
      const auto& s = frame.preprocess;
      if (pred.width == test[i].mask.width && pred.height == test[i].mask.height)
        pred = prepare_mask(frame, pred);
      else if (pred.width != s.target_w || pred.height != s.target_h)
        throw Error(ErrorCode::DimensionMismatch, "prediction " + path->string() + " matches neither the raw nor the working size");
      preds.push_back(std::move(pred));
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      throw Error(ErrorCode::FileNotFound, "prediction directory is missing test ids: " + list);
    }
    report = evaluate_predictions(preds, working, n_classes, label);
  }

  print_headline(label, report.headline());
  if (o.pooled) print_headline(label + " (pooled)", report.pooled_headline());
  if (!o.report.empty()) {
    ensure_parent(o.report);
    emit_report_csv(report, o.report);
  }
  std::vector<EvalReport> box{report};
  if (!o.scatter.empty()) {
    EvalReport other = read_report_csv(o.scatter);
    const auto out = o.scatter_out.empty() ? fs::path("scatter.csv") : o.scatter_out;
    ensure_parent(out);
    emit_scatter_csv(report, other, out);
    box.push_back(std::move(other));
  }
  if (!o.boxplot.empty()) {
    ensure_parent(o.boxplot);
    emit_boxplot_csv(box, o.boxplot);
  }
  return 0;
}

// --- bench -------------------------------------------------------------------

struct BenchCmd {
  TrainOptions train;
  std::vector<std::string> archs{"fe", "wi"};
  fs::path out = "bench.csv";
};

int cmd_bench(const BenchCmd& o, const Globals& g) {
  std::vector<Architecture> archs;
  for (const auto& a : o.archs) archs.push_back(parse_architecture(a));
  ensure_parent(o.out);
  const auto pairs = load_dataset(o.train.dataset, dataset_options(o.train));
  const auto protocol = protocol_of(o.train, g);
  std::vector<PhaseRecord> records;
  for (const auto arch : archs) {
    const std::string label = to_string(arch);
    const auto data = measure_phase(records, label, "preprocess", [&] { return prepare_protocol(pairs, protocol); });
    check_leaks(data, o.train.augment_first);
    const auto model = measure_phase(records, label, "train", [&] { return train_arch(arch, data, o.train, g); });
    const auto report = measure_phase(records, label, "predict", [&] {
      return evaluate_model([&](const GrayImage& img) { return predict_mask(model, img); }, data.test,
                            static_cast<int>(model.forest.n_classes), label);
    });
    print_headline(label, report.headline());
  }
  emit_resource_csv(records, o.out);
  for (const auto& r : records)
    std::printf("%s %-10s %10.3f s %12llu bytes\n", r.model.c_str(), r.phase.c_str(), r.wall_seconds,
                static_cast<unsigned long long>(r.peak_resident_bytes));
  return 0;
}

// --- config injection ----------------------------------------------------------
//
// The config file is read before parsing and its entries become --key=value
// arguments placed ahead of the user's own, so with TakeLast the command line
// wins over the file and the file over the defaults.

std::string config_path(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config") {
      if (i + 1 >= argc) throw UsageError("--config needs a path");
      path = argv[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    }
  }
  return path;
}

std::vector<std::string> inject_config(const CLI::App& app, int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const auto path = config_path(argc, argv);
  if (path.empty()) return args;
  if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path);

  std::size_t sub_pos = args.size();
  const CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size() && !sub; ++i)
    for (const auto* s : app.get_subcommands([](const CLI::App*) { return true; }))
      if (args[i] == s->get_name()) {
        sub = s;
        sub_pos = i;
        break;
      }

  std::vector<std::string> global_args, sub_args;
  for (auto [key, value] : parse_config_file(path)) {
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string opt = "--" + key;
    if (key == "config") throw UsageError("config files cannot include other config files");
    if (app.get_option_no_throw(opt)) {
      global_args.push_back(opt + "=" + value);
    } else if (sub && sub->get_option_no_throw(opt)) {
      sub_args.push_back(opt + "=" + value);
    } else {
      throw UsageError(std::string(to_string(ErrorCode::UnknownConfigKey)) + ": '" + key + "' in " + path +
                       (sub ? " is not an option of '" + sub->get_name() + "'" : ""));
    }
  }
  if (sub) args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), sub_args.begin(), sub_args.end());
  args.insert(args.begin(), global_args.begin(), global_args.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-forest image segmentation toolkit"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_option("--config", g.config, "key=value defaults file (flags override it)");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  c_synth->add_option("--kind", synth.kind, "blobs | vessels")->check(CLI::IsMember({"blobs", "vessels"}));
  c_synth->add_option("--n-images", synth.spec.n_images, "number of pairs")->check(CLI::PositiveNumber);
  c_synth->add_option("--width", synth.spec.width, "image width")->check(CLI::Range(32, 65535));
  c_synth->add_option("--height", synth.spec.height, "image height")->check(CLI::Range(32, 65535));
  c_synth->add_option("--noise-sigma", synth.spec.noise_sigma, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  c_synth->add_option("--out", synth.out, "output dataset root")->required();

  TrainCmd train;
  auto* c_train = app.add_subcommand("train", "split, preprocess, train and save a model");
  add_train_options(c_train, train.train);
  c_train->add_option("--arch", train.arch, "fe | wi")->check(CLI::IsMember({"fe", "wi", "rf_fe", "rf_wi"}));
  c_train->add_option("--model-out", train.model_out, "model file")->required();
  c_train->add_option("--manifest-out", train.manifest_out, "split manifest (default <model>.manifest.txt)");
  c_train->add_option("--resources-out", train.resources_out, "resource CSV (default <model>.resources.csv)");

  PredictCmd predict;
  auto* c_predict = app.add_subcommand("predict", "predict masks for an image or a directory");
  c_predict->add_option("--model", predict.model, "model file")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--input", predict.input, "image file or directory")->required()->check(CLI::ExistingPath);
  c_predict->add_option("--out", predict.out, "output directory")->required();
  c_predict->add_flag("--overlay", predict.overlay, "also write <id>_overlay.png");
  c_predict->add_option("--masks", predict.masks, "ground-truth masks for overlay contours")
      ->check(CLI::ExistingDirectory);

  EvalCmd eval;
  auto* c_eval = app.add_subcommand("eval", "score a model or a directory of predicted masks");
  auto* o_model = c_eval->add_option("--model", eval.model, "model file")->check(CLI::ExistingFile);
  auto* o_pred = c_eval->add_option("--pred-dir", eval.pred_dir, "externally produced masks <id>.png")
                     ->check(CLI::ExistingDirectory);
  o_model->excludes(o_pred);
  c_eval->add_option("--dataset", eval.dataset, "dataset root")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--manifest", eval.manifest, "split manifest (default <model>.manifest.txt)")
      ->check(CLI::ExistingFile);
  c_eval->add_option("--report", eval.report, "per-image report CSV");
  c_eval->add_option("--boxplot", eval.boxplot, "long-format boxplot CSV");
  c_eval->add_option("--scatter", eval.scatter, "second report CSV to pair with")->check(CLI::ExistingFile);
  c_eval->add_option("--scatter-out", eval.scatter_out, "scatter CSV (default scatter.csv)");
  c_eval->add_option("--label", eval.label, "model label in CSVs");
  c_eval->add_option("--target", eval.target, "working resolution for --pred-dir")->check(CLI::PositiveNumber);
  c_eval->add_flag("--pooled", eval.pooled, "also print pixel-pooled headline");
  c_eval->add_flag("--binarize-masks", eval.binarize, "treat any non-zero mask value as class 1");

  BenchCmd bench;
  auto* c_bench = app.add_subcommand("bench", "train and predict under resource sampling");
  add_train_options(c_bench, bench.train);
  c_bench->add_option("--archs", bench.archs, "architectures (fe, wi)")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->check(CLI::IsMember({"fe", "wi", "rf_fe", "rf_wi"}));
  c_bench->add_option("--out", bench.out, "resource CSV");

  try {
    auto args = inject_config(app, argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    set_thread_count(g.threads);
    if (c_synth->parsed()) return cmd_synth(synth, g);
    if (c_train->parsed()) return cmd_train(train, g);
    if (c_predict->parsed()) return cmd_predict(predict, g);
    if (c_eval->parsed()) {
      if (eval.model.empty() && eval.pred_dir.empty()) {
        std::cerr << "error: eval needs --model or --pred-dir\n";
        return kExitUsage;
      }
      return cmd_eval(eval, g);
    }
    if (c_bench->parsed()) return cmd_bench(bench, g);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::UnknownConfigKey ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
