#include "hyperaug/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "binary_io.hpp"
#include "hyperaug/errors.hpp"

namespace hyperaug {

namespace {

using nlohmann::json;

struct SignedRanks {
  std::vector<double> ranks;  // rank of |d_i|, average on ties
  std::vector<bool> positive;
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
};

SignedRanks rank_differences(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DimError("paired samples differ in length: " + std::to_string(x.size()) + " vs " +
                   std::to_string(y.size()));
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    if (!std::isfinite(diff)) throw NumericError("non-finite paired difference");
    if (diff != 0.0) d.push_back(diff);
  }
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

  SignedRanks out;
  out.ranks.assign(d.size(), 0.0);
  out.positive.assign(d.size(), false);
  for (std::size_t i = 0; i < d.size(); ++i) out.positive[i] = d[i] > 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && std::abs(d[order[end]]) == std::abs(d[order[start]])) ++end;
    const double avg = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) out.ranks[order[k]] = avg;
    const double t = static_cast<double>(end - start);
    out.tie_term += t * t * t - t;
    start = end;
  }
  return out;
}

WilcoxonResult base_result(const SignedRanks& r) {
  WilcoxonResult out;
  out.n = r.ranks.size();
  for (std::size_t i = 0; i < out.n; ++i) (r.positive[i] ? out.w_plus : out.w_minus) += r.ranks[i];
  out.degenerate = out.n == 0;
  return out;
}

double exact_p(const SignedRanks& r, double w_plus) {
  // Average ranks are multiples of 1/2, so doubled ranks are integers.
  std::vector<long> doubled;
  long total = 0;
  for (double rank : r.ranks) {
    doubled.push_back(std::lround(2.0 * rank));
    total += doubled.back();
  }
  std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
  ways[0] = 1.0;
  long reach = 0;
  for (long v : doubled) {
    for (long s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + v)] += ways[static_cast<std::size_t>(s)];
    reach += v;
  }
  const double patterns = std::ldexp(1.0, static_cast<int>(doubled.size()));
  const long t = std::lround(2.0 * w_plus);
  double lower = 0.0, upper = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (s <= t) lower += ways[static_cast<std::size_t>(s)];
    if (s >= t) upper += ways[static_cast<std::size_t>(s)];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / patterns);
}

double normal_p(const SignedRanks& r, double w_plus) {
  const double n = static_cast<double>(r.ranks.size());
  const double mean = n * (n + 1) / 4.0;
  const double var = n * (n + 1) * (2 * n + 1) / 24.0 - r.tie_term / 48.0;
  if (!(var > 0)) return 1.0;
  const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

std::string scenario_name(Scenario s) { return std::string(to_string(s)); }

json ms_json(const MeanStd& v) { return json{{"mean", v.mean}, {"std", v.std}}; }

}  // namespace

Scores score(std::span<const ClassId> truth, std::span<const ClassId> predicted,
             std::size_t classes) {
  if (truth.size() != predicted.size())
    throw DimError("truth and prediction lists differ in length: " +
                   std::to_string(truth.size()) + " vs " + std::to_string(predicted.size()));
  if (truth.empty()) throw DimError("cannot score an empty prediction list");
  if (classes == 0) throw DimError("class count must be positive");

  Scores s;
  s.classes = classes;
  s.confusion.assign(classes * classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 1 || truth[i] > classes || predicted[i] < 1 || predicted[i] > classes)
      throw ClassError("label outside 1.." + std::to_string(classes) + " at position " +
                       std::to_string(i));
    ++s.confusion[(truth[i] - 1) * classes + (predicted[i] - 1)];
  }
  std::size_t correct = 0, present = 0;
  double recall_sum = 0.0;
  s.per_class.assign(classes, 0.0);
  s.present.assign(classes, false);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t row = 0;
    for (std::size_t k = 0; k < classes; ++k) row += s.confusion[c * classes + k];
    correct += s.confusion[c * classes + c];
    if (row == 0) continue;
    s.present[c] = true;
    s.per_class[c] = static_cast<double>(s.confusion[c * classes + c]) / static_cast<double>(row);
    recall_sum += s.per_class[c];
    ++present;
  }
  s.oa = static_cast<double>(correct) / static_cast<double>(truth.size());
  s.aa = recall_sum / static_cast<double>(present);
  return s;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) {
    out.mean = out.std = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1));
  }
  return out;
}

AggregateReport aggregate(std::span<const EvaluationReport> reports) {
  if (reports.empty()) throw DegenerateError("nothing to aggregate");
  const auto& first = reports.front();
  AggregateReport out;
  out.dataset = first.meta.dataset;
  out.variant = first.meta.variant;
  out.scenario = first.meta.scenario;
  out.runs = reports.size();
  out.classes = first.scores.classes;

  std::vector<double> oa, aa, offline, train, infer;
  std::vector<std::vector<double>> per_class(out.classes);
  for (const auto& r : reports) {
    if (r.meta.scenario != out.scenario)
      throw ConfigError("cannot aggregate runs from different scenarios");
    if (r.scores.classes != out.classes)
      throw DimError("cannot aggregate runs with different class counts");
    oa.push_back(r.scores.oa);
    aa.push_back(r.scores.aa);
    offline.push_back(r.timings.offline_augment_s);
    train.push_back(r.timings.train_s);
    infer.push_back(r.timings.per_sample_infer_ms);
    for (std::size_t c = 0; c < out.classes; ++c)
      if (r.scores.present[c]) per_class[c].push_back(r.scores.per_class[c]);
  }
  for (std::size_t c = 0; c < out.classes; ++c) {
    out.per_class.push_back(mean_std(per_class[c]));
    out.present.push_back(!per_class[c].empty());
  }
  out.oa = mean_std(oa);
  out.aa = mean_std(aa);
  out.offline_augment_s = mean_std(offline);
  out.train_s = mean_std(train);
  out.per_sample_infer_ms = mean_std(infer);
  return out;
}

WilcoxonResult wilcoxon_exact(std::span<const double> x, std::span<const double> y) {
  const auto ranks = rank_differences(x, y);
  auto out = base_result(ranks);
  out.exact = true;
  if (!out.degenerate) out.p = exact_p(ranks, out.w_plus);
  return out;
}

WilcoxonResult wilcoxon_normal(std::span<const double> x, std::span<const double> y) {
  const auto ranks = rank_differences(x, y);
  auto out = base_result(ranks);
  if (!out.degenerate) out.p = normal_p(ranks, out.w_plus);
  return out;
}

WilcoxonResult wilcoxon_two_tailed(std::span<const double> x, std::span<const double> y) {
  const auto ranks = rank_differences(x, y);
  auto out = base_result(ranks);
  if (out.degenerate) return out;
  if (out.n < kWilcoxonMinPairs)
    throw DegenerateError("signed-rank test needs at least " + std::to_string(kWilcoxonMinPairs) +
                          " nonzero differences, got " + std::to_string(out.n));
  out.exact = out.n <= kWilcoxonExactLimit;
  out.p = out.exact ? exact_p(ranks, out.w_plus) : normal_p(ranks, out.w_plus);
  return out;
}

void save_report_json(const std::filesystem::path& path, const EvaluationReport& report) {
  const auto& m = report.meta;
  const auto& s = report.scores;
  json j;
  j["dataset"] = m.dataset;
  j["variant"] = m.variant;
  j["scenario"] = scenario_name(m.scenario);
  j["seed"] = m.seed;
  j["fold"] = m.fold;
  j["train_size"] = m.train_size;
  j["val_size"] = m.val_size;
  j["test_size"] = m.test_size;
  j["best_epoch"] = m.best_epoch;
  j["classes"] = s.classes;
  json confusion = json::array();
  for (std::size_t r = 0; r < s.classes; ++r)
    confusion.push_back(std::vector<std::size_t>(
        s.confusion.begin() + static_cast<std::ptrdiff_t>(r * s.classes),
        s.confusion.begin() + static_cast<std::ptrdiff_t>((r + 1) * s.classes)));
  j["confusion"] = confusion;
  j["per_class_accuracy"] = s.per_class;
  j["present"] = s.present;
  j["oa"] = s.oa;
  j["aa"] = s.aa;
  detail::write_text(path, j.dump(2) + "\n");
}

EvaluationReport load_report_json(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(detail::read_text(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  EvaluationReport r;
  try {
    r.meta.dataset = j.at("dataset").get<std::string>();
    r.meta.variant = j.at("variant").get<std::string>();
    r.meta.scenario = parse_scenario(j.at("scenario").get<std::string>());
    r.meta.seed = j.at("seed").get<std::uint64_t>();
    r.meta.fold = j.at("fold").get<std::size_t>();
    r.meta.train_size = j.at("train_size").get<std::size_t>();
    r.meta.val_size = j.at("val_size").get<std::size_t>();
    r.meta.test_size = j.at("test_size").get<std::size_t>();
    r.meta.best_epoch = j.at("best_epoch").get<std::size_t>();
    r.scores.classes = j.at("classes").get<std::size_t>();
    for (const auto& row : j.at("confusion"))
      for (const auto& v : row) r.scores.confusion.push_back(v.get<std::size_t>());
    r.scores.per_class = j.at("per_class_accuracy").get<std::vector<double>>();
    r.scores.present = j.at("present").get<std::vector<bool>>();
    r.scores.oa = j.at("oa").get<double>();
    r.scores.aa = j.at("aa").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const std::size_t c = r.scores.classes;
  if (r.scores.confusion.size() != c * c || r.scores.per_class.size() != c ||
      r.scores.present.size() != c)
    throw FormatError(path.string() + ": report arrays do not match the class count");
  return r;
}

void save_aggregate_json(const std::filesystem::path& path, const AggregateReport& report) {
  json j;
  j["dataset"] = report.dataset;
  j["variant"] = report.variant;
  j["scenario"] = scenario_name(report.scenario);
  j["runs"] = report.runs;
  j["classes"] = report.classes;
  json per_class = json::array();
  for (std::size_t c = 0; c < report.classes; ++c)
    per_class.push_back(report.present[c] ? ms_json(report.per_class[c]) : json(nullptr));
  j["per_class_accuracy"] = per_class;
  j["oa"] = ms_json(report.oa);
  j["aa"] = ms_json(report.aa);
  detail::write_text(path, j.dump(2) + "\n");
}

void save_accuracy_table(const std::filesystem::path& path,
                         std::span<const AggregateReport> rows) {
  std::size_t classes = 0;
  for (const auto& r : rows) classes = std::max(classes, r.classes);
  std::string text = "dataset,scenario,variant,runs";
  for (std::size_t c = 1; c <= classes; ++c) text += ",class_" + std::to_string(c);
  text += ",OA,AA\n";
  for (const auto& r : rows) {
    text += r.dataset + ',' + scenario_name(r.scenario) + ',' + r.variant + ',' +
            std::to_string(r.runs);
    for (std::size_t c = 0; c < classes; ++c) {
      text += ',';
      if (c < r.classes && r.present[c]) text += detail::format_fixed(100.0 * r.per_class[c].mean, 2);
    }
    text += ',' + detail::format_fixed(100.0 * r.oa.mean, 2) + ',' +
            detail::format_fixed(100.0 * r.aa.mean, 2) + '\n';
  }
  detail::write_text(path, text);
}

void save_timings_csv(const std::filesystem::path& path,
                      std::span<const EvaluationReport> reports) {
  std::string text = "dataset,scenario,variant,fold,offline_augment_s,train_s,per_sample_infer_ms\n";
  for (const auto& r : reports)
    text += r.meta.dataset + ',' + scenario_name(r.meta.scenario) + ',' + r.meta.variant + ',' +
            std::to_string(r.meta.fold) + ',' + detail::format_double(r.timings.offline_augment_s) +
            ',' + detail::format_double(r.timings.train_s) + ',' +
            detail::format_double(r.timings.per_sample_infer_ms) + '\n';
  detail::write_text(path, text);
}

}  // namespace hyperaug
