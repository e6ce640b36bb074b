#include "hyperaug/hsio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "hyperaug/errors.hpp"
#include "hyperaug/rng.hpp"

namespace hyperaug {

namespace {

constexpr std::string_view kCubeMagic = "HSR1";
constexpr std::string_view kLabelMagic = "HSL1";
constexpr std::string_view kNormalizerMagic = "HNM1";
constexpr std::string_view kSplitHeader = "row,col,label,role";

void check_magic(detail::ByteReader& reader, std::string_view magic,
                 const std::filesystem::path& path) {
  if (reader.remaining() < magic.size() || reader.raw(magic.size()) != magic)
    throw FormatError(path.string() + ": bad magic, expected '" +
                      std::string(magic) + "'");
}

}  // namespace

HSICube::HSICube(std::uint32_t height, std::uint32_t width,
                 std::uint32_t bands, std::vector<float> values)
    : height_(height), width_(width), bands_(bands), values_(std::move(values)) {
  if (height_ == 0 || width_ == 0 || bands_ == 0)
    throw DimError("cube dimensions must be positive");
  const std::size_t expected = std::size_t{height_} * width_ * bands_;
  if (values_.size() != expected)
    throw DimError("cube payload has " + std::to_string(values_.size()) +
                   " values, expected " + std::to_string(expected));
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw DataError("non-finite cube value at index " + std::to_string(i));
  }
}

std::span<const float> HSICube::pixel(std::uint32_t row,
                                      std::uint32_t col) const {
  if (row >= height_ || col >= width_)
    throw DimError("pixel (" + std::to_string(row) + "," + std::to_string(col) +
                   ") outside cube");
  const std::size_t offset = (std::size_t{row} * width_ + col) * bands_;
  return std::span<const float>(values_).subspan(offset, bands_);
}

LabelMap::LabelMap(std::uint32_t height, std::uint32_t width,
                   std::vector<ClassId> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (height_ == 0 || width_ == 0)
    throw DimError("label map dimensions must be positive");
  if (labels_.size() != std::size_t{height_} * width_)
    throw DimError("label payload does not match dimensions");

  std::vector<ClassId> observed;
  for (ClassId l : labels_)
    if (l != 0) observed.push_back(l);
  std::sort(observed.begin(), observed.end());
  observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
  original_ids_ = std::move(observed);

  if (remapped()) {
    for (ClassId& l : labels_) {
      if (l == 0) continue;
      auto it = std::lower_bound(original_ids_.begin(), original_ids_.end(), l);
      l = static_cast<ClassId>(it - original_ids_.begin() + 1);
    }
  }
}

bool LabelMap::remapped() const noexcept {
  for (std::size_t i = 0; i < original_ids_.size(); ++i)
    if (original_ids_[i] != i + 1) return true;
  return false;
}

ClassId LabelMap::at(std::uint32_t row, std::uint32_t col) const {
  if (row >= height_ || col >= width_)
    throw DimError("label (" + std::to_string(row) + "," + std::to_string(col) +
                   ") outside map");
  return labels_[std::size_t{row} * width_ + col];
}

std::vector<std::size_t> LabelMap::histogram() const {
  std::vector<std::size_t> counts(num_classes() + 1, 0);
  for (ClassId l : labels_) ++counts[l];
  return counts;
}

std::vector<LabeledPixel> LabelMap::labeled_pixels() const {
  std::vector<LabeledPixel> out;
  for (std::uint32_t r = 0; r < height_; ++r)
    for (std::uint32_t c = 0; c < width_; ++c)
      if (ClassId l = labels_[std::size_t{r} * width_ + c]; l != 0)
        out.push_back({{r, c}, l});
  return out;
}

HSICube load_cube(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader reader(bytes);
  check_magic(reader, kCubeMagic, path);
  if (reader.remaining() < 12)
    throw TruncatedError(path.string() + ": header truncated");
  const std::uint32_t h = reader.u32();
  const std::uint32_t w = reader.u32();
  const std::uint32_t b = reader.u32();
  if (h == 0 || w == 0 || b == 0)
    throw FormatError(path.string() + ": zero dimension in header");
  const std::size_t count = std::size_t{h} * w * b;
  if (reader.remaining() != count * sizeof(float))
    throw TruncatedError(path.string() + ": payload has " +
                         std::to_string(reader.remaining()) + " bytes, header declares " +
                         std::to_string(count * sizeof(float)));
  std::vector<float> values(count);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(values.data(), bytes.data() + reader.position(), count * sizeof(float));
  } else {
    for (auto& v : values) v = reader.f32();
  }
  return HSICube(h, w, b, std::move(values));
}

void save_cube(const std::filesystem::path& path, const HSICube& cube) {
  detail::ByteWriter out;
  out.raw(kCubeMagic);
  out.u32(cube.height());
  out.u32(cube.width());
  out.u32(cube.bands());
  for (float v : cube.values()) out.f32(v);
  detail::write_file(path, out.bytes());
}

LabelMap load_labels(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader reader(bytes);
  check_magic(reader, kLabelMagic, path);
  if (reader.remaining() < 8)
    throw TruncatedError(path.string() + ": header truncated");
  const std::uint32_t h = reader.u32();
  const std::uint32_t w = reader.u32();
  if (h == 0 || w == 0)
    throw FormatError(path.string() + ": zero dimension in header");
  const std::size_t count = std::size_t{h} * w;
  if (reader.remaining() != count * sizeof(std::uint16_t))
    throw TruncatedError(path.string() + ": label payload size mismatch");
  std::vector<ClassId> labels(count);
  for (auto& l : labels) l = reader.u16();
  return LabelMap(h, w, std::move(labels));
}

void save_labels(const std::filesystem::path& path, const LabelMap& labels) {
  detail::ByteWriter out;
  out.raw(kLabelMagic);
  out.u32(labels.height());
  out.u32(labels.width());
  for (ClassId l : labels.labels()) out.u16(l);
  detail::write_file(path, out.bytes());
}

void save_class_mapping(const std::filesystem::path& path,
                        const LabelMap& labels) {
  std::string text = "compact,original\n";
  const auto ids = labels.original_ids();
  for (std::size_t i = 0; i < ids.size(); ++i)
    text += std::to_string(i + 1) + "," + std::to_string(ids[i]) + "\n";
  detail::write_text(path, text);
}

void save_split(const std::filesystem::path& path, const SplitSet& split) {
  std::string text(kSplitHeader);
  text += '\n';
  auto emit = [&](const std::vector<LabeledPixel>& pixels, Role role) {
    for (const auto& p : pixels) {
      text += std::to_string(p.coord.row) + ',' + std::to_string(p.coord.col) +
              ',' + std::to_string(p.label) + ',' + std::string(to_string(role)) + '\n';
    }
  };
  emit(split.train, Role::Train);
  emit(split.val, Role::Val);
  emit(split.test, Role::Test);
  detail::write_text(path, text);
}

SplitSet load_split(const std::filesystem::path& path) {
  const std::string text = detail::read_text(path);
  const auto lines = detail::split_lines(text);
  if (lines.empty() || lines.front() != kSplitHeader)
    throw FormatError(path.string() + ": missing split header '" +
                      std::string(kSplitHeader) + "'");
  SplitSet split;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = detail::split_fields(lines[i]);
    if (fields.size() != 4)
      throw FormatError(path.string() + ": line " + std::to_string(i + 1) +
                        " does not have 4 fields");
    LabeledPixel p;
    p.coord.row = detail::parse_number<std::uint32_t>(fields[0], "row");
    p.coord.col = detail::parse_number<std::uint32_t>(fields[1], "col");
    p.label = detail::parse_number<ClassId>(fields[2], "label");
    switch (parse_role(fields[3])) {
      case Role::Train: split.train.push_back(p); break;
      case Role::Val: split.val.push_back(p); break;
      case Role::Test: split.test.push_back(p); break;
    }
  }
  return split;
}

void save_samples(const std::filesystem::path& path,
                  std::span<const Spectrum> samples,
                  std::size_t original_count) {
  const std::size_t bands = samples.empty() ? 0 : samples.front().size();
  std::string text = "row,col,label,role,synthetic";
  for (std::size_t j = 0; j < bands; ++j) text += ",b" + std::to_string(j + 1);
  text += '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.size() != bands) throw DimError("sample band counts differ");
    if (s.coord)
      text += std::to_string(s.coord->row) + ',' + std::to_string(s.coord->col);
    else
      text += ',';
    text += ',' + std::to_string(s.label.value_or(0)) + ",train," +
            (i >= original_count ? "1" : "0");
    for (double v : s.bands) text += ',' + detail::format_double(v);
    text += '\n';
  }
  detail::write_text(path, text);
}

SampleFile load_samples(const std::filesystem::path& path) {
  const std::string text = detail::read_text(path);
  const auto lines = detail::split_lines(text);
  if (lines.empty() || !lines.front().starts_with("row,col,label,role,synthetic"))
    throw FormatError(path.string() + ": missing sample header");
  const std::size_t bands = detail::split_fields(lines.front()).size() - 5;
  SampleFile file;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = detail::split_fields(lines[i]);
    if (f.size() != bands + 5)
      throw FormatError(path.string() + ": line " + std::to_string(i + 1) +
                        " has wrong field count");
    Spectrum s;
    if (!f[0].empty())
      s.coord = Coord{detail::parse_number<std::uint32_t>(f[0], "row"),
                      detail::parse_number<std::uint32_t>(f[1], "col")};
    if (auto l = detail::parse_number<ClassId>(f[2], "label"); l != 0) s.label = l;
    parse_role(f[3]);
    file.synthetic.push_back(detail::parse_number<int>(f[4], "synthetic") != 0);
    s.bands.reserve(bands);
    for (std::size_t j = 0; j < bands; ++j)
      s.bands.push_back(detail::parse_number<double>(f[5 + j], "value"));
    file.samples.push_back(std::move(s));
  }
  return file;
}

SyntheticScene generate_synthetic(const SyntheticParams& params) {
  if (params.classes == 0 || params.bands == 0 || params.per_class == 0)
    throw ConfigError("synthetic classes, bands and per_class must be >= 1");
  if (params.classes > 0xFFFF) throw ConfigError("too many synthetic classes");
  if (!(params.spread >= 0) || !(params.brightness >= 0))
    throw ConfigError("synthetic spread and brightness must be >= 0");

  Rng rng(params.seed);
  std::uniform_real_distribution<double> level(0.3, 0.7);
  std::uniform_real_distribution<double> wiggle(-0.2, 0.2);
  std::vector<std::vector<double>> means(params.classes,
                                         std::vector<double>(params.bands));
  for (auto& mean : means) {
    const double base = level(rng);
    for (double& m : mean) m = base + wiggle(rng);
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  const auto height = static_cast<std::uint32_t>(params.classes);
  const auto width = static_cast<std::uint32_t>(params.per_class);
  std::vector<float> values;
  values.reserve(std::size_t{height} * width * params.bands);
  std::vector<ClassId> labels;
  labels.reserve(std::size_t{height} * width);
  for (std::uint32_t c = 0; c < height; ++c) {
    for (std::uint32_t i = 0; i < width; ++i) {
      const double scale = 1.0 + params.brightness * noise(rng);
      for (std::size_t j = 0; j < params.bands; ++j)
        values.push_back(static_cast<float>(means[c][j] * scale +
                                            params.spread * noise(rng)));
      labels.push_back(static_cast<ClassId>(c + 1));
    }
  }
  return {HSICube(height, width, static_cast<std::uint32_t>(params.bands), std::move(values)),
          LabelMap(height, width, std::move(labels))};
}

std::vector<Spectrum> gather_spectra(const HSICube& cube,
                                     std::span<const LabeledPixel> pixels) {
  std::vector<Spectrum> out;
  out.reserve(pixels.size());
  for (const auto& p : pixels) {
    const auto px = cube.pixel(p.coord.row, p.coord.col);
    Spectrum s;
    s.bands.assign(px.begin(), px.end());
    if (p.label != 0) s.label = p.label;
    s.coord = p.coord;
    out.push_back(std::move(s));
  }
  return out;
}

MinMaxNormalizer::MinMaxNormalizer(std::vector<double> lo, std::vector<double> hi)
    : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) throw DimError("normalizer bounds differ in length");
}

MinMaxNormalizer MinMaxNormalizer::fit(std::span<const Spectrum> train) {
  if (train.empty()) throw DegenerateError("cannot fit normalizer on empty set");
  const std::size_t b = train.front().size();
  std::vector<double> lo(train.front().bands), hi(train.front().bands);
  for (const auto& s : train) {
    if (s.size() != b) throw DimError("spectra differ in band count");
    for (std::size_t j = 0; j < b; ++j) {
      lo[j] = std::min(lo[j], s.bands[j]);
      hi[j] = std::max(hi[j], s.bands[j]);
    }
  }
  return MinMaxNormalizer(std::move(lo), std::move(hi));
}

void MinMaxNormalizer::apply(std::span<double> values) const {
  if (values.size() != lo_.size()) throw DimError("normalizer band count mismatch");
  for (std::size_t j = 0; j < values.size(); ++j) {
    const double range = hi_[j] - lo_[j];
    values[j] = range > 0 ? (values[j] - lo_[j]) / range : 0.0;
  }
}

Spectrum MinMaxNormalizer::apply(const Spectrum& x) const {
  Spectrum out = x;
  apply(std::span<double>(out.bands));
  return out;
}

std::vector<Spectrum> MinMaxNormalizer::apply(std::span<const Spectrum> xs) const {
  std::vector<Spectrum> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(apply(x));
  return out;
}

void save_normalizer(const std::filesystem::path& path,
                     const MinMaxNormalizer& normalizer) {
  detail::ByteWriter out;
  out.raw(kNormalizerMagic);
  out.u32(static_cast<std::uint32_t>(normalizer.bands()));
  for (double v : normalizer.lo()) out.f64(v);
  for (double v : normalizer.hi()) out.f64(v);
  detail::write_file(path, out.bytes());
}

MinMaxNormalizer load_normalizer(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader reader(bytes);
  check_magic(reader, kNormalizerMagic, path);
  const std::uint32_t b = reader.u32();
  if (reader.remaining() != std::size_t{b} * 16)
    throw TruncatedError(path.string() + ": normalizer payload size mismatch");
  std::vector<double> lo(b), hi(b);
  for (auto& v : lo) v = reader.f64();
  for (auto& v : hi) v = reader.f64();
  return MinMaxNormalizer(std::move(lo), std::move(hi));
}

}  // namespace hyperaug
