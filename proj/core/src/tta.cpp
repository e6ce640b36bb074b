#include "hyperaug/tta.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "binary_io.hpp"
#include "hyperaug/errors.hpp"

namespace hyperaug {

TTAResult vote(const Eigen::MatrixXd& member_proba) {
  if (member_proba.rows() == 0 || member_proba.cols() == 0)
    throw DimError("vote needs at least one member and one class");
  const auto classes = static_cast<std::size_t>(member_proba.cols());
  TTAResult out;
  out.votes.assign(classes, 0);
  out.mean_proba.assign(classes, 0.0);
  for (Eigen::Index r = 0; r < member_proba.rows(); ++r) {
    const Eigen::RowVectorXd row = member_proba.row(r);
    const ClassId label =
        argmax_class(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    out.member_labels.push_back(label);
    ++out.votes[label - 1];
    for (std::size_t c = 0; c < classes; ++c) out.mean_proba[c] += row(static_cast<Eigen::Index>(c));
  }
  for (double& p : out.mean_proba) p /= static_cast<double>(member_proba.rows());

  const std::size_t top = *std::max_element(out.votes.begin(), out.votes.end());
  std::vector<std::size_t> leaders;
  for (std::size_t c = 0; c < classes; ++c)
    if (out.votes[c] == top) leaders.push_back(c);
  std::size_t winner = leaders.front();
  if (leaders.size() > 1) {
    out.soft_vote_used = true;
    for (std::size_t c : leaders)
      if (out.mean_proba[c] > out.mean_proba[winner]) winner = c;
  }
  out.label = static_cast<ClassId>(winner + 1);
  return out;
}

CnnClassifier::CnnClassifier(CNNModel model, MinMaxNormalizer normalizer)
    : model_(std::move(model)), normalizer_(std::move(normalizer)) {
  if (normalizer_.bands() != model_.config.bands)
    throw DimError("normalizer and network disagree on the band count");
}

Eigen::MatrixXd CnnClassifier::predict_proba(std::span<const Spectrum> spectra) const {
  return forward(model_, to_batch(normalizer_.apply(spectra)), Mode::Inference);
}

TTAResult tta_classify(const ProbabilityModel& model, const Augmenter* augmenter,
                       const Spectrum& x, const TTAConfig& config, Rng& rng) {
  Spectrum source{x.bands, std::nullopt, x.coord};
  const Eigen::MatrixXd plain = model.predict_proba(std::span<const Spectrum>(&source, 1));
  if (config.samples == 0) return vote(plain);
  if (augmenter == nullptr) throw ConfigError("test-time augmentation needs an augmenter");

  if (augmenter->needs_label()) {
    const Eigen::RowVectorXd row = plain.row(0);
    source.label =
        argmax_class(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  std::vector<Spectrum> members;
  members.reserve(config.samples);
  for (std::size_t i = 0; i < config.samples; ++i)
    members.push_back(augmenter->synthesize(source, rng));
  const Eigen::MatrixXd synthetic = model.predict_proba(members);

  Eigen::MatrixXd all(plain.rows() + synthetic.rows(), plain.cols());
  all << plain, synthetic;
  return vote(all);
}

std::uint64_t sample_key(const Spectrum& x, std::size_t index) {
  if (x.coord) return (std::uint64_t{x.coord->row} << 32) | x.coord->col;
  return (std::uint64_t{1} << 63) | index;
}

TTASetResult tta_classify_set(const ProbabilityModel& model, const Augmenter* augmenter,
                              std::span<const Spectrum> test_set, const TTAConfig& config) {
  TTASetResult out;
  if (test_set.empty()) return out;
  out.results.resize(test_set.size());
  std::vector<double> seconds(test_set.size(), 0.0);

  auto classify = [&](std::size_t i) {
    Rng rng(derive_seed(config.seed, 0, Stage::Online, sample_key(test_set[i], i)));
    const auto started = std::chrono::steady_clock::now();
    out.results[i] = tta_classify(model, augmenter, test_set[i], config, rng);
    seconds[i] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  const std::size_t threads = std::clamp<std::size_t>(config.threads, 1, test_set.size());
  if (threads == 1) {
    for (std::size_t i = 0; i < test_set.size(); ++i) classify(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < test_set.size(); i = next++) {
          try {
            classify(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = test_set.size();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (double s : seconds) out.total_seconds += s;
  out.mean_ms = 1000.0 * out.total_seconds / static_cast<double>(test_set.size());
  return out;
}

void save_tta_results(const std::filesystem::path& path, std::span<const Spectrum> test_set,
                      std::span<const TTAResult> results) {
  if (test_set.size() != results.size())
    throw DimError("result count does not match the test set");
  const std::size_t classes = results.empty() ? 0 : results.front().votes.size();
  std::string text = "row,col,true_label,pred_label,soft_vote_used";
  for (std::size_t c = 1; c <= classes; ++c) text += ",vote_" + std::to_string(c);
  text += '\n';
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& x = test_set[i];
    const auto& r = results[i];
    text += x.coord ? std::to_string(x.coord->row) + ',' + std::to_string(x.coord->col) : ",";
    text += ',' + (x.label ? std::to_string(*x.label) : std::string()) + ',' +
            std::to_string(r.label) + ',' + (r.soft_vote_used ? "1" : "0");
    for (std::size_t v : r.votes) text += ',' + std::to_string(v);
    text += '\n';
  }
  detail::write_text(path, text);
}

PredictionFile load_tta_results(const std::filesystem::path& path) {
  const auto text = detail::read_text(path);
  const auto lines = detail::split_lines(text);
  const std::string where = path.string() + ": ";
  if (lines.empty()) throw FormatError(where + "empty prediction file");
  const auto header = detail::split_fields(lines.front());
  constexpr std::string_view kFixed[] = {"row", "col", "true_label", "pred_label", "soft_vote_used"};
  if (header.size() < std::size(kFixed) || !std::equal(std::begin(kFixed), std::end(kFixed), header.begin()))
    throw FormatError(where + "unexpected prediction header");
  PredictionFile out;
  out.classes = header.size() - std::size(kFixed);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = detail::split_fields(lines[i]);
    const std::string at = where + "line " + std::to_string(i + 1) + ": ";
    if (f.size() != header.size()) throw FormatError(at + "wrong field count");
    if (f[0].empty() != f[1].empty()) throw FormatError(at + "partial coordinate");
    if (f[0].empty())
      out.coords.emplace_back();
    else
      out.coords.push_back(Coord{detail::parse_number<std::uint32_t>(f[0], "row"),
                                 detail::parse_number<std::uint32_t>(f[1], "col")});
    if (f[2].empty()) throw FormatError(at + "missing true label");
    out.truth.push_back(detail::parse_number<ClassId>(f[2], "true_label"));
    out.predicted.push_back(detail::parse_number<ClassId>(f[3], "pred_label"));
    if (f[4] != "0" && f[4] != "1") throw FormatError(at + "soft_vote_used must be 0 or 1");
    out.soft_vote_used.push_back(f[4] == "1");
  }
  return out;
}

}  // namespace hyperaug
