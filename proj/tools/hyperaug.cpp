#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hyperaug/augment.hpp"
#include "hyperaug/cnn.hpp"
#include "hyperaug/errors.hpp"
#include "hyperaug/eval.hpp"
#include "hyperaug/experiment.hpp"
#include "hyperaug/hsio.hpp"
#include "hyperaug/splits.hpp"
#include "hyperaug/tta.hpp"

namespace fs = std::filesystem;
using namespace hyperaug;

namespace {

constexpr int kExitError = 2;
constexpr int kExitRunFailed = 1;

std::size_t env_threads() {
  if (const char* v = std::getenv("HYPERAUG_THREADS")) {
    try {
      const auto n = std::stoul(v);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError("HYPERAUG_THREADS must be a positive integer");
  }
  return 0;
}

std::string percent(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << 100.0 * v;
  return out.str();
}

void print_summary(const HSICube& cube, const LabelMap& labels) {
  std::cout << "dims " << cube.height() << " x " << cube.width() << " x " << cube.bands() << "\n"
            << "classes " << labels.num_classes() << "\n";
  const auto hist = labels.histogram();
  std::cout << "unlabeled " << hist[0] << "\n";
  const auto ids = labels.original_ids();
  for (std::size_t c = 1; c < hist.size(); ++c)
    std::cout << "class " << c << " (original " << ids[c - 1] << ") " << hist[c] << "\n";
}

void print_scores(const Scores& s) {
  for (std::size_t c = 0; c < s.classes; ++c)
    std::cout << "class " << c + 1 << " " << (s.present[c] ? percent(s.per_class[c]) : "-") << "\n";
  std::cout << "OA " << percent(s.oa) << "\nAA " << percent(s.aa) << "\n";
}

struct DataArgs {
  std::string cube, labels, split;
  std::uint32_t fold = 0;
  std::uint64_t seed = 0;
};

void add_data_options(CLI::App* cmd, DataArgs& a, bool with_split = true) {
  cmd->add_option("--cube", a.cube, "HSR1 cube file")->required();
  cmd->add_option("--labels", a.labels, "HSL1 label file")->required();
  if (with_split) cmd->add_option("--split", a.split, "split CSV")->required();
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--fold", a.fold, "Monte-Carlo run index used for seed derivation");
}

struct LoadedData {
  HSICube cube;
  LabelMap labels;
  SplitSet split;
  std::vector<Spectrum> train, val, test;
};

LoadedData load_data(const DataArgs& a) {
  LoadedData d{load_cube(a.cube), load_labels(a.labels), load_split(a.split), {}, {}, {}};
  if (d.cube.height() != d.labels.height() || d.cube.width() != d.labels.width())
    throw DimError("cube and label map dimensions differ");
  d.train = gather_spectra(d.cube, d.split.train);
  d.val = gather_spectra(d.cube, d.split.val);
  d.test = gather_spectra(d.cube, d.split.test);
  return d;
}

struct AugmentArgs {
  std::string method = "pca";
  double alpha_min = 0.9, alpha_max = 1.1, noise_scale = 0.25;

  AugmentConfig config() const {
    AugmentConfig c;
    c.method = parse_augment_method(method);
    c.alpha_min = alpha_min;
    c.alpha_max = alpha_max;
    c.noise_scale = noise_scale;
    return c;
  }
};

void add_augment_options(CLI::App* cmd, AugmentArgs& a) {
  cmd->add_option("--method", a.method, "pca or noise")->capture_default_str();
  cmd->add_option("--alpha-min", a.alpha_min, "lower bound of the PC1 scale")->capture_default_str();
  cmd->add_option("--alpha-max", a.alpha_max, "upper bound of the PC1 scale")->capture_default_str();
  cmd->add_option("--noise-scale", a.noise_scale, "noise variance as a fraction of sigma^2")
      ->capture_default_str();
}

void add_cnn_options(CLI::App* cmd, CNNConfig& c) {
  cmd->add_option("--kernels", c.kernels, "convolution kernels")->capture_default_str();
  cmd->add_option("--dense1", c.dense1, "first dense width")->capture_default_str();
  cmd->add_option("--dense2", c.dense2, "second dense width")->capture_default_str();
  cmd->add_option("--learning-rate", c.learning_rate, "ADAM step size")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "mini-batch size")->capture_default_str();
  cmd->add_option("--patience", c.patience, "epochs without improvement before stopping")
      ->capture_default_str();
  cmd->add_option("--max-epochs", c.max_epochs, "epoch limit")->capture_default_str();
}

int cmd_ingest(const std::vector<std::string>& synthetic, std::uint64_t seed,
               const std::string& cube_path, const std::string& labels_path,
               const std::string& out, bool summary) {
  std::optional<HSICube> cube;
  std::optional<LabelMap> labels;
  if (!synthetic.empty()) {
    SyntheticParams p;
    p.seed = seed;
    for (const auto& kv : synthetic) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + kv + "'");
      const auto key = kv.substr(0, eq);
      const auto value = kv.substr(eq + 1);
      if (key == "classes") p.classes = std::stoul(value);
      else if (key == "bands") p.bands = std::stoul(value);
      else if (key == "per-class") p.per_class = std::stoul(value);
      else if (key == "spread") p.spread = std::stod(value);
      else if (key == "brightness") p.brightness = std::stod(value);
      else throw ConfigError("unknown synthetic parameter '" + key + "'");
    }
    auto scene = generate_synthetic(p);
    cube.emplace(std::move(scene.cube));
    labels.emplace(std::move(scene.labels));
  } else {
    if (cube_path.empty() || labels_path.empty())
      throw ConfigError("ingest needs --synthetic or both --cube and --labels");
    cube.emplace(load_cube(cube_path));
    labels.emplace(load_labels(labels_path));
    if (cube->height() != labels->height() || cube->width() != labels->width())
      throw DimError("cube and label map dimensions differ");
  }
  if (!out.empty()) {
    fs::create_directories(out);
    save_cube(fs::path(out) / "cube.hsr", *cube);
    save_labels(fs::path(out) / "labels.hsl", *labels);
    if (labels->remapped()) save_class_mapping(fs::path(out) / "class_map.csv", *labels);
  }
  if (summary || out.empty()) print_summary(*cube, *labels);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspectral classification with offline and test-time augmentation"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate, convert or generate a dataset");
  std::vector<std::string> synthetic;
  std::string ingest_cube, ingest_labels, ingest_out;
  std::uint64_t ingest_seed = 0;
  bool ingest_summary = false;
  ingest->add_option("--synthetic", synthetic,
                     "generate a scene: classes=N bands=N per-class=N [spread=X brightness=X]")
      ->expected(0, -1);
  ingest->add_option("--cube", ingest_cube, "HSR1 cube file");
  ingest->add_option("--labels", ingest_labels, "HSL1 label file");
  ingest->add_option("--seed", ingest_seed, "generator seed");
  ingest->add_option("--out", ingest_out, "output directory for cube.hsr and labels.hsl");
  ingest->add_flag("--summary", ingest_summary, "print dims and class histogram");

  // split
  auto* split_cmd = app.add_subcommand("split", "draw Monte-Carlo train/val/test splits");
  std::string split_labels, split_out, split_scenario = "B";
  ScenarioParams split_params;
  std::uint64_t split_seed_value = 0;
  std::size_t split_runs = 1;
  split_cmd->add_option("--labels", split_labels, "HSL1 label file")->required();
  split_cmd->add_option("--scenario", split_scenario, "B, IB or P")->capture_default_str();
  split_cmd->add_option("--train-total", split_params.train_total, "training pixels (B, IB)");
  split_cmd->add_option("--val-total", split_params.val_total, "validation pixels (B, IB)");
  split_cmd->add_option("--patch-rows", split_params.patch_rows, "tile rows (P)")->capture_default_str();
  split_cmd->add_option("--patch-cols", split_params.patch_cols, "tile columns (P)")->capture_default_str();
  split_cmd->add_option("--train-fraction", split_params.train_fraction, "training tiles (P)")
      ->capture_default_str();
  split_cmd->add_option("--val-fraction", split_params.val_fraction, "validation share (P)")
      ->capture_default_str();
  split_cmd->add_option("--runs", split_runs, "number of splits")->capture_default_str();
  split_cmd->add_option("--seed", split_seed_value, "master seed");
  split_cmd->add_option("--out", split_out, "output directory for split_<run>.csv")->required();

  // augment
  auto* augment_cmd = app.add_subcommand("augment", "enlarge a training set offline");
  DataArgs augment_data;
  AugmentArgs augment_args;
  std::string augment_out, augment_pca_out;
  add_data_options(augment_cmd, augment_data);
  add_augment_options(augment_cmd, augment_args);
  augment_cmd->add_option("--out", augment_out, "sample CSV of the enlarged training set")->required();
  augment_cmd->add_option("--pca-out", augment_pca_out, "also save the fitted PCA model");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the spectral CNN");
  DataArgs train_data;
  CNNConfig train_cnn;
  std::string train_samples, train_out, train_norm_out, train_history;
  add_data_options(train_cmd, train_data);
  add_cnn_options(train_cmd, train_cnn);
  train_cmd->add_option("--samples", train_samples, "enlarged training set from `augment`");
  train_cmd->add_option("--out", train_out, "checkpoint file")->required();
  train_cmd->add_option("--normalizer-out", train_norm_out, "normalizer file")->required();
  train_cmd->add_option("--history", train_history, "per-epoch loss and validation accuracy CSV");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "classify the test set, optionally with TTA");
  DataArgs infer_data;
  AugmentArgs infer_aug;
  std::string infer_model, infer_norm, infer_out;
  std::size_t infer_samples = 0;
  std::size_t infer_threads = 0;
  add_data_options(infer_cmd, infer_data);
  add_augment_options(infer_cmd, infer_aug);
  infer_cmd->add_option("--model", infer_model, "checkpoint file")->required();
  infer_cmd->add_option("--normalizer", infer_norm, "normalizer file")->required();
  infer_cmd->add_option("--tta-samples", infer_samples, "synthetic samples per test pixel (0 = plain)")
      ->capture_default_str();
  infer_cmd->add_option("--threads", infer_threads, "worker threads (default HYPERAUG_THREADS or 1)");
  infer_cmd->add_option("--out", infer_out, "prediction CSV")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions or compare two reports");
  std::string eval_predictions, eval_report;
  std::vector<std::string> eval_compare;
  std::size_t eval_classes = 0;
  eval_cmd->add_option("--predictions", eval_predictions, "prediction CSV from `infer`");
  eval_cmd->add_option("--classes", eval_classes, "class count (default: vote columns)");
  eval_cmd->add_option("--report", eval_report, "write a JSON report");
  eval_cmd->add_option("--compare", eval_compare, "two JSON reports: Wilcoxon over per-class accuracy")
      ->expected(2);

  // run
  auto* run_cmd = app.add_subcommand("run", "full Monte-Carlo experiment from a config file");
  std::string run_config, run_output;
  std::size_t run_threads = 0;
  run_cmd->add_option("config", run_config, "key = value experiment file")->required();
  run_cmd->add_option("--output", run_output, "override the output directory");
  run_cmd->add_option("--threads", run_threads, "worker threads (default HYPERAUG_THREADS or config)");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "timing table for the configured variants");
  std::string bench_config, bench_output;
  bench_cmd->add_option("config", bench_config, "key = value experiment file")->required();
  bench_cmd->add_option("--output", bench_output, "override the output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      return cmd_ingest(synthetic, ingest_seed, ingest_cube, ingest_labels, ingest_out,
                        ingest_summary);
    }

    if (*split_cmd) {
      split_params.scenario = parse_scenario(split_scenario);
      const auto labels = load_labels(split_labels);
      fs::create_directories(split_out);
      ExperimentConfig seeds;
      seeds.seed = split_seed_value;
      for (std::size_t run = 0; run < split_runs; ++run) {
        auto s = make_split(labels, split_params, split_seed(seeds, run));
        s.fold = static_cast<std::uint32_t>(run);
        for (const auto& w : s.warnings) std::cerr << "warning: run " << run << ": " << w << "\n";
        const auto path = fs::path(split_out) / ("split_" + std::to_string(run) + ".csv");
        save_split(path, s);
        std::cout << path.string() << ": train " << s.train.size() << ", val " << s.val.size()
                  << ", test " << s.test.size() << "\n";
      }
      return 0;
    }

    if (*augment_cmd) {
      const auto d = load_data(augment_data);
      const auto augmenter = make_augmenter(augment_args.config(), d.train);
      const auto enlarged = offline_enlarge(
          d.train, *augmenter, derive_seed(augment_data.seed, augment_data.fold, Stage::OfflineAugment));
      save_samples(augment_out, enlarged.samples, enlarged.original_count);
      if (!augment_pca_out.empty()) {
        const auto* pca = dynamic_cast<const PcaAugmenter*>(augmenter.get());
        if (pca == nullptr) throw ConfigError("--pca-out needs --method pca");
        save_pca(augment_pca_out, pca->model());
      }
      std::cout << "original " << enlarged.original_count << ", synthetic "
                << enlarged.synthetics().size() << "\n";
      return 0;
    }

    if (*train_cmd) {
      const auto d = load_data(train_data);
      std::vector<Spectrum> train_set = d.train;
      if (!train_samples.empty()) train_set = load_samples(train_samples).samples;
      const auto normalizer = MinMaxNormalizer::fit(d.train);
      train_cnn.bands = d.cube.bands();
      train_cnn.classes = d.labels.num_classes();
      train_cnn.seed = derive_seed(train_data.seed, train_data.fold, Stage::Init);
      const auto result =
          train(init_model(train_cnn), normalizer.apply(train_set), normalizer.apply(d.val));
      save_checkpoint(train_out, result.model);
      save_normalizer(train_norm_out, normalizer);
      if (!train_history.empty()) {
        std::ofstream h(train_history);
        h << "epoch,train_loss,val_accuracy\n" << std::setprecision(17);
        for (const auto& e : result.history)
          h << e.epoch << ',' << e.train_loss << ',' << e.val_accuracy << "\n";
      }
      std::cout << "epochs " << result.history.size() << ", best epoch " << result.best_epoch
                << ", val accuracy " << percent(result.best_val_accuracy) << "\n";
      return 0;
    }

    if (*infer_cmd) {
      const auto d = load_data(infer_data);
      const CnnClassifier classifier(load_checkpoint(infer_model), load_normalizer(infer_norm));
      std::unique_ptr<Augmenter> augmenter;
      if (infer_samples > 0) augmenter = make_augmenter(infer_aug.config(), d.train);
      TTAConfig tta;
      tta.samples = infer_samples;
      tta.seed = derive_seed(infer_data.seed, infer_data.fold, Stage::Online);
      const std::size_t env = env_threads();
      tta.threads = infer_threads ? infer_threads : env ? env : 1;
      const auto out = tta_classify_set(classifier, augmenter.get(), d.test, tta);
      save_tta_results(infer_out, d.test, out.results);
      std::cout << "classified " << out.results.size() << " samples, " << std::setprecision(4)
                << out.mean_ms << " ms per sample\n";
      return 0;
    }

    if (*eval_cmd) {
      if (!eval_compare.empty()) {
        const auto a = load_report_json(eval_compare[0]);
        const auto b = load_report_json(eval_compare[1]);
        if (a.scores.classes != b.scores.classes) throw DimError("reports differ in class count");
        std::vector<double> x, y;
        for (std::size_t c = 0; c < a.scores.classes; ++c)
          if (a.scores.present[c] && b.scores.present[c]) {
            x.push_back(a.scores.per_class[c]);
            y.push_back(b.scores.per_class[c]);
          }
        const auto w = wilcoxon_two_tailed(x, y);
        std::cout << "pairs " << x.size() << "\nw_plus " << w.w_plus << "\nw_minus " << w.w_minus
                  << "\np " << std::setprecision(17) << w.p << "\n"
                  << (w.exact ? "exact" : "normal approximation")
                  << (w.degenerate ? " (all differences zero)" : "") << "\n";
        return 0;
      }
      if (eval_predictions.empty()) throw ConfigError("evaluate needs --predictions or --compare");
      const auto p = load_tta_results(eval_predictions);
      const auto s = score(p.truth, p.predicted, eval_classes ? eval_classes : p.classes);
      print_scores(s);
      if (!eval_report.empty()) {
        EvaluationReport r;
        r.meta.dataset = fs::path(eval_predictions).stem().string();
        r.meta.test_size = p.truth.size();
        r.scores = s;
        save_report_json(eval_report, r);
      }
      return 0;
    }

    if (*run_cmd || *bench_cmd) {
      auto config = load_experiment_config(*run_cmd ? run_config : bench_config);
      const auto& output = *run_cmd ? run_output : bench_output;
      if (!output.empty()) config.output = output;
      const std::size_t env = env_threads();
      if (run_threads) config.threads = run_threads;
      else if (env) config.threads = env;
      const auto outcome =
          run_experiment(config, [](std::string_view msg) { std::cerr << msg << "\n"; });
      if (*bench_cmd) {
        std::cout << format_timing_table(outcome.aggregates);
      } else {
        for (const auto& a : outcome.aggregates)
          std::cout << a.variant << ": OA " << percent(a.oa.mean) << " AA " << percent(a.aa.mean)
                    << " over " << a.runs << " runs\n";
      }
      for (const auto& f : outcome.failures) std::cerr << "failed: " << f << "\n";
      return outcome.failures.empty() ? 0 : kExitRunFailed;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
