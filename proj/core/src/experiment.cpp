#include "hyperaug/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "binary_io.hpp"
#include "hyperaug/errors.hpp"

namespace hyperaug {

namespace {

constexpr std::pair<Variant, std::string_view> kVariantNames[] = {
    {Variant::Without, "without"}, {Variant::Noise, "noise"},     {Variant::Pca, "pca"},
    {Variant::NoiseOn, "noise-on"}, {Variant::PcaOn, "pca-on"}, {Variant::PcaPcaOn, "pca/pca-on"}};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

template <class T>
T number(std::string_view key, std::string_view value) {
  return detail::parse_number<T>(value, std::string(key));
}

std::vector<std::string_view> list(std::string_view value) {
  std::vector<std::string_view> out;
  for (auto item : detail::split_fields(value)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view value) {
  std::filesystem::path p{std::string(value)};
  return p.is_relative() && !base.empty() ? base / p : p;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + '\n';
  return out;
}

void note(const Logger& log, const std::string& text) {
  if (log) log(text);
}

/// Per-run state shared by the variants evaluated on one split.
class RunContext {
 public:
  RunContext(const Dataset& data, const SplitSet& split, const ExperimentConfig& config,
             std::size_t run, const Logger& log)
      : data_(data), config_(config), run_(run), log_(log) {
    train_ = gather_spectra(data.cube, split.train);
    val_ = gather_spectra(data.cube, split.val);
    test_ = gather_spectra(data.cube, split.test);
    if (train_.empty()) throw InsufficientDataError("split has an empty training set");
    if (val_.empty()) throw InsufficientDataError("split has an empty validation set");
    if (test_.empty()) throw InsufficientDataError("split has an empty test set");
  }

  const std::vector<Spectrum>& test() const { return test_; }
  std::size_t val_size() const { return val_.size(); }
  std::size_t train_size() const { return train_.size(); }

  struct Fitted {
    std::unique_ptr<Augmenter> augmenter;
    double fit_seconds = 0.0;
  };

  const Fitted& augmenter(AugmentMethod method) {
    auto it = augmenters_.find(method);
    if (it == augmenters_.end()) {
      Fitted f;
      f.fit_seconds = time_seconds(
          [&] { f.augmenter = make_augmenter(config_.augment_config(method), train_); });
      it = augmenters_.emplace(method, std::move(f)).first;
    }
    return it->second;
  }

  struct Trained {
    std::unique_ptr<CnnClassifier> classifier;
    TrainResult training;
    double offline_seconds = 0.0;
    double train_seconds = 0.0;
    std::size_t enlarged_size = 0;
  };

  const Trained& trained(std::optional<AugmentMethod> offline) {
    const int key = offline ? static_cast<int>(*offline) : -1;
    auto it = trained_.find(key);
    if (it != trained_.end()) return it->second;

    Trained t;
    std::vector<Spectrum> train_set = train_;
    if (offline) {
      const Fitted& fitted = augmenter(*offline);
      EnlargedSet enlarged;
      const double enlarge_seconds = time_seconds([&] {
        enlarged = offline_enlarge(train_, *fitted.augmenter,
                                   derive_seed(config_.seed, run_, Stage::OfflineAugment));
      });
      t.offline_seconds = fitted.fit_seconds + enlarge_seconds;
      train_set = std::move(enlarged.samples);
    }
    t.enlarged_size = train_set.size();

    const auto normalizer = MinMaxNormalizer::fit(train_);
    CNNConfig cnn = config_.cnn;
    cnn.bands = data_.cube.bands();
    cnn.classes = data_.labels.num_classes();
    cnn.seed = derive_seed(config_.seed, run_, Stage::Init);
    const auto x_train = normalizer.apply(train_set);
    const auto x_val = normalizer.apply(val_);
    t.train_seconds =
        time_seconds([&] { t.training = train(init_model(cnn), x_train, x_val); });
    note(log_, "run " + std::to_string(run_) + ": trained on " + std::to_string(train_set.size()) +
                   " samples" + (offline ? " (" + std::string(to_string(*offline)) + " enlarged)" : "") +
                   ", best epoch " + std::to_string(t.training.best_epoch) + ", val acc " +
                   detail::format_fixed(t.training.best_val_accuracy, 4));
    t.classifier = std::make_unique<CnnClassifier>(t.training.model, normalizer);
    return trained_.emplace(key, std::move(t)).first->second;
  }

 private:
  const Dataset& data_;
  const ExperimentConfig& config_;
  std::size_t run_;
  const Logger& log_;
  std::vector<Spectrum> train_, val_, test_;
  std::map<AugmentMethod, Fitted> augmenters_;
  std::map<int, Trained> trained_;
};

}  // namespace

std::string_view to_string(Variant v) {
  for (const auto& [variant, name] : kVariantNames)
    if (variant == v) return name;
  throw ConfigError("unknown variant");
}

Variant parse_variant(std::string_view text) {
  for (const auto& [variant, name] : kVariantNames)
    if (name == text) return variant;
  throw ConfigError("unknown augmentation variant '" + std::string(text) +
                    "' (expected without, noise, pca, noise-on, pca-on or pca/pca-on)");
}

std::string variant_slug(Variant v) {
  std::string s(to_string(v));
  std::replace(s.begin(), s.end(), '/', '+');
  return s;
}

std::optional<AugmentMethod> offline_method(Variant v) {
  switch (v) {
    case Variant::Noise: return AugmentMethod::Noise;
    case Variant::Pca:
    case Variant::PcaPcaOn: return AugmentMethod::Pca;
    default: return std::nullopt;
  }
}

std::optional<AugmentMethod> online_method(Variant v) {
  switch (v) {
    case Variant::NoiseOn: return AugmentMethod::Noise;
    case Variant::PcaOn:
    case Variant::PcaPcaOn: return AugmentMethod::Pca;
    default: return std::nullopt;
  }
}

AugmentConfig ExperimentConfig::augment_config(AugmentMethod method) const {
  AugmentConfig a;
  a.method = method;
  a.alpha_min = alpha_min;
  a.alpha_max = alpha_max;
  a.scaled_components = scaled_components;
  a.noise_scale = noise_scale;
  return a;
}

void ExperimentConfig::validate() const {
  if (cube.empty() != labels.empty())
    throw ConfigError("cube and labels must be given together");
  if (cube.empty() && !synthetic) throw ConfigError("no dataset: set cube/labels or synthetic.*");
  if (!cube.empty()) {
    for (const auto& p : {cube, labels})
      if (!std::filesystem::exists(p)) throw ConfigError("file not found: " + p.string());
  }
  if (runs == 0) throw ConfigError("runs must be >= 1");
  if (variants.empty()) throw ConfigError("at least one variant is required");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  augment_config(AugmentMethod::Pca).validate();
  CNNConfig probe = cnn;
  probe.bands = std::max<std::size_t>(probe.kernel_length + probe.pool, 1);
  probe.classes = 1;
  probe.validate();
}

ExperimentConfig parse_experiment_config(std::string_view text,
                                         const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  auto synthetic = [&]() -> SyntheticParams& {
    if (!c.synthetic) c.synthetic.emplace();
    return *c.synthetic;
  };
  using Setter = std::function<void(std::string_view, std::string_view)>;
  const std::map<std::string, Setter, std::less<>> setters = {
      {"dataset", [&](auto, auto v) { c.dataset = std::string(v); }},
      {"cube", [&](auto, auto v) { c.cube = resolve(base_dir, v); }},
      {"labels", [&](auto, auto v) { c.labels = resolve(base_dir, v); }},
      {"output", [&](auto, auto v) { c.output = resolve(base_dir, v); }},
      {"synthetic.classes", [&](auto k, auto v) { synthetic().classes = number<std::size_t>(k, v); }},
      {"synthetic.bands", [&](auto k, auto v) { synthetic().bands = number<std::size_t>(k, v); }},
      {"synthetic.per_class", [&](auto k, auto v) { synthetic().per_class = number<std::size_t>(k, v); }},
      {"synthetic.spread", [&](auto k, auto v) { synthetic().spread = number<double>(k, v); }},
      {"synthetic.brightness", [&](auto k, auto v) { synthetic().brightness = number<double>(k, v); }},
      {"synthetic.seed", [&](auto k, auto v) { synthetic().seed = number<std::uint64_t>(k, v); }},
      {"scenario", [&](auto, auto v) { c.split.scenario = parse_scenario(v); }},
      {"train_total", [&](auto k, auto v) { c.split.train_total = number<std::size_t>(k, v); }},
      {"val_total", [&](auto k, auto v) { c.split.val_total = number<std::size_t>(k, v); }},
      {"patch_rows", [&](auto k, auto v) { c.split.patch_rows = number<std::uint32_t>(k, v); }},
      {"patch_cols", [&](auto k, auto v) { c.split.patch_cols = number<std::uint32_t>(k, v); }},
      {"train_fraction", [&](auto k, auto v) { c.split.train_fraction = number<double>(k, v); }},
      {"val_fraction", [&](auto k, auto v) { c.split.val_fraction = number<double>(k, v); }},
      {"runs", [&](auto k, auto v) { c.runs = number<std::size_t>(k, v); }},
      {"variants",
       [&](auto, auto v) {
         c.variants.clear();
         for (auto item : list(v)) c.variants.push_back(parse_variant(item));
       }},
      {"alpha_min", [&](auto k, auto v) { c.alpha_min = number<double>(k, v); }},
      {"alpha_max", [&](auto k, auto v) { c.alpha_max = number<double>(k, v); }},
      {"pc_components",
       [&](auto k, auto v) {
         c.scaled_components.clear();
         for (auto item : list(v)) {
           const auto pc = number<std::size_t>(k, item);
           if (pc == 0) throw ConfigError("pc_components are numbered from 1");
           c.scaled_components.push_back(pc - 1);
         }
       }},
      {"noise_scale", [&](auto k, auto v) { c.noise_scale = number<double>(k, v); }},
      {"tta_samples", [&](auto k, auto v) { c.tta_samples = number<std::size_t>(k, v); }},
      {"cnn.kernels", [&](auto k, auto v) { c.cnn.kernels = number<std::size_t>(k, v); }},
      {"cnn.kernel_length", [&](auto k, auto v) { c.cnn.kernel_length = number<std::size_t>(k, v); }},
      {"cnn.pool", [&](auto k, auto v) { c.cnn.pool = number<std::size_t>(k, v); }},
      {"cnn.dense1", [&](auto k, auto v) { c.cnn.dense1 = number<std::size_t>(k, v); }},
      {"cnn.dense2", [&](auto k, auto v) { c.cnn.dense2 = number<std::size_t>(k, v); }},
      {"cnn.learning_rate", [&](auto k, auto v) { c.cnn.learning_rate = number<double>(k, v); }},
      {"cnn.batch_size", [&](auto k, auto v) { c.cnn.batch_size = number<std::size_t>(k, v); }},
      {"cnn.patience", [&](auto k, auto v) { c.cnn.patience = number<std::size_t>(k, v); }},
      {"cnn.max_epochs", [&](auto k, auto v) { c.cnn.max_epochs = number<std::size_t>(k, v); }},
      {"seed", [&](auto k, auto v) { c.seed = number<std::uint64_t>(k, v); }},
      {"threads", [&](auto k, auto v) { c.threads = number<std::size_t>(k, v); }},
  };

  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    try {
      it->second(key, value);
    } catch (const FormatError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_experiment_config(detail::read_text(path), path.parent_path());
}

Dataset load_dataset(const ExperimentConfig& config) {
  if (!config.cube.empty()) {
    Dataset d{config.dataset, load_cube(config.cube), load_labels(config.labels)};
    if (d.cube.height() != d.labels.height() || d.cube.width() != d.labels.width())
      throw DimError("cube and label map dimensions differ");
    return d;
  }
  if (!config.synthetic) throw ConfigError("no dataset configured");
  auto scene = generate_synthetic(*config.synthetic);
  return {config.dataset, std::move(scene.cube), std::move(scene.labels)};
}

std::uint64_t split_seed(const ExperimentConfig& config, std::size_t run) {
  return derive_seed(config.seed, run, Stage::Split);
}

std::vector<VariantRun> run_split(const Dataset& data, const SplitSet& split,
                                  const ExperimentConfig& config, std::size_t run,
                                  const Logger& log) {
  RunContext ctx(data, split, config, run, log);
  std::vector<VariantRun> out;
  for (Variant v : config.variants) {
    const auto& trained = ctx.trained(offline_method(v));
    const auto online = online_method(v);
    const Augmenter* augmenter = online ? ctx.augmenter(*online).augmenter.get() : nullptr;

    TTAConfig tta;
    tta.samples = online ? config.tta_samples : 0;
    tta.seed = derive_seed(config.seed, run, Stage::Online);
    tta.threads = config.threads;
    auto predictions = tta_classify_set(*trained.classifier, augmenter, ctx.test(), tta);

    std::vector<ClassId> truth, predicted;
    for (std::size_t i = 0; i < ctx.test().size(); ++i) {
      truth.push_back(*ctx.test()[i].label);
      predicted.push_back(predictions.results[i].label);
    }

    VariantRun r;
    r.report.meta.dataset = data.name;
    r.report.meta.variant = std::string(to_string(v));
    r.report.meta.scenario = split.scenario;
    r.report.meta.seed = split.seed;
    r.report.meta.fold = split.fold;
    r.report.meta.train_size = ctx.train_size();
    r.report.meta.val_size = ctx.val_size();
    r.report.meta.test_size = ctx.test().size();
    r.report.meta.best_epoch = trained.training.best_epoch;
    r.report.scores = score(truth, predicted, data.labels.num_classes());
    r.report.timings.offline_augment_s = trained.offline_seconds;
    r.report.timings.train_s = trained.train_seconds;
    r.report.timings.per_sample_infer_ms = predictions.mean_ms;
    r.test = ctx.test();
    r.predictions = std::move(predictions.results);
    r.training = trained.training;
    r.enlarged_train_size = trained.enlarged_size;
    note(log, "run " + std::to_string(run) + " " + r.report.meta.variant + ": OA " +
                  detail::format_fixed(100 * r.report.scores.oa, 2) + " AA " +
                  detail::format_fixed(100 * r.report.scores.aa, 2));
    out.push_back(std::move(r));
  }
  return out;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, const Logger& log) {
  config.validate();
  const Dataset data = load_dataset(config);
  const bool write = !config.output.empty();
  if (write) std::filesystem::create_directories(config.output);

  ExperimentOutcome outcome;
  std::map<Variant, std::vector<EvaluationReport>> by_variant;
  for (std::size_t run = 0; run < config.runs; ++run) {
    try {
      SplitSet split = make_split(data.labels, config.split, split_seed(config, run));
      split.fold = static_cast<std::uint32_t>(run);
      for (const auto& w : split.warnings) note(log, "run " + std::to_string(run) + ": " + w);
      const auto results = run_split(data, split, config, run, log);
      if (write) {
        const auto run_dir = config.output / ("run_" + std::to_string(run));
        std::filesystem::create_directories(run_dir);
        save_split(run_dir / "split.csv", split);
        for (std::size_t k = 0; k < results.size(); ++k) {
          const auto dir = run_dir / variant_slug(config.variants[k]);
          std::filesystem::create_directories(dir);
          save_report_json(dir / "report.json", results[k].report);
          save_tta_results(dir / "predictions.csv", results[k].test, results[k].predictions);
          std::string history = "epoch,train_loss,val_accuracy\n";
          for (const auto& e : results[k].training.history)
            history += std::to_string(e.epoch) + ',' + detail::format_double(e.train_loss) + ',' +
                       detail::format_double(e.val_accuracy) + '\n';
          detail::write_text(dir / "history.csv", history);
        }
      }
      for (std::size_t k = 0; k < results.size(); ++k) {
        outcome.reports.push_back(results[k].report);
        by_variant[config.variants[k]].push_back(results[k].report);
      }
    } catch (const Error& e) {
      outcome.failures.push_back("run " + std::to_string(run) + ": " + e.what());
      note(log, outcome.failures.back());
    }
  }

  for (Variant v : config.variants) {
    const auto it = by_variant.find(v);
    if (it == by_variant.end()) continue;
    outcome.aggregates.push_back(aggregate(it->second));
  }
  if (!write) return outcome;

  for (const auto& a : outcome.aggregates)
    save_aggregate_json(config.output / ("aggregate_" + variant_slug(parse_variant(a.variant)) + ".json"), a);
  save_accuracy_table(config.output / "accuracy_table.csv", outcome.aggregates);
  save_timings_csv(config.output / "timings.csv", outcome.reports);

  // Each variant against the first one, paired over per-class mean accuracy.
  std::vector<std::string> lines{"variant,baseline,pairs,w_plus,w_minus,p,exact,note"};
  for (std::size_t k = 1; k < outcome.aggregates.size(); ++k) {
    const auto& base = outcome.aggregates.front();
    const auto& other = outcome.aggregates[k];
    std::vector<double> x, y;
    for (std::size_t c = 0; c < base.classes; ++c)
      if (base.present[c] && other.present[c]) {
        x.push_back(other.per_class[c].mean);
        y.push_back(base.per_class[c].mean);
      }
    std::string line = other.variant + ',' + base.variant + ',' + std::to_string(x.size()) + ',';
    try {
      const auto w = wilcoxon_two_tailed(x, y);
      line += detail::format_double(w.w_plus) + ',' + detail::format_double(w.w_minus) + ',' +
              detail::format_double(w.p) + ',' + (w.exact ? "1" : "0") + ',' +
              (w.degenerate ? "all differences zero" : "");
    } catch (const DegenerateError&) {
      line += ",,,,too few nonzero differences";
    }
    lines.push_back(line);
  }
  detail::write_text(config.output / "wilcoxon.csv", join_lines(lines));
  return outcome;
}

std::string format_timing_table(std::span<const AggregateReport> aggregates) {
  std::string out = "variant,offline_augment_s,train_s,per_sample_infer_ms\n";
  for (const auto& a : aggregates)
    out += a.variant + ',' + detail::format_fixed(a.offline_augment_s.mean, 4) + ',' +
           detail::format_fixed(a.train_s.mean, 2) + ',' +
           detail::format_fixed(a.per_sample_infer_ms.mean, 4) + '\n';
  return out;
}

}  // namespace hyperaug
