#include "mdn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mdn/binary_io.hpp"
#include "mdn/rng.hpp"

namespace mdn {

namespace {

constexpr std::string_view kMagic = "MDNS";
constexpr std::uint32_t kVersion = 1;

void check_range(const Range& r, const char* name) {
  if (!(r.low < r.high)) {
    throw SynthError(std::string("SynthConfig: ") + name + " needs low < high");
  }
}

// Length of the closed intersection of two ranges (0 if disjoint).
double intersection_length(const Range& a, const Range& b) {
  return std::max(0.0, std::min(a.high, b.high) - std::max(a.low, b.low));
}

}  // namespace

void SynthConfig::validate() const {
  check_range(sigma_a_g1, "sigma_a_g1");
  check_range(sigma_a_g2, "sigma_a_g2");
  check_range(sigma_b_g1, "sigma_b_g1");
  check_range(sigma_b_g2, "sigma_b_g2");
  if (image_size == 0 || image_size % 2 != 0) {
    throw SynthError("SynthConfig: image_size must be positive and even");
  }
  if (n_per_group == 0) throw SynthError("SynthConfig: n_per_group must be positive");
  if (!(blob_spatial_std > 0.0)) throw SynthError("SynthConfig: blob_spatial_std must be positive");
  if (pixel_noise_std < 0.0) throw SynthError("SynthConfig: pixel_noise_std must be >= 0");
}

double blob_value(double row, double col, double center_row, double center_col, double std) {
  const double dr = row - center_row;
  const double dc = col - center_col;
  return std::exp(-(dr * dr + dc * dc) / (2.0 * std * std));
}

std::array<std::pair<double, double>, 4> quadrant_centers(std::uint32_t image_size) {
  const double half = static_cast<double>(image_size) / 2.0;
  const double near = (half - 1.0) / 2.0;
  const double far = half + near;
  return {{{near, far}, {near, near}, {far, near}, {far, far}}};
}

SyntheticDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t side = cfg.image_size;
  const std::size_t pixels = side * side;
  const std::size_t n = 2 * static_cast<std::size_t>(cfg.n_per_group);

  // Unit-peak templates, quadrants I..IV.
  const auto centers = quadrant_centers(cfg.image_size);
  std::array<std::vector<double>, 4> blobs;
  for (std::size_t q = 0; q < 4; ++q) {
    blobs[q].resize(pixels);
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t c = 0; c < side; ++c)
        blobs[q][r * side + c] = blob_value(static_cast<double>(r), static_cast<double>(c),
                                            centers[q].first, centers[q].second,
                                            cfg.blob_spatial_std);
  }

  SyntheticDataset ds;
  ds.config = cfg;
  ds.images = Matrix(n, pixels);
  ds.sigma_a = Matrix(n, 1);
  ds.sigma_b = Matrix(n, 1);
  ds.labels.resize(n);

  Rng rng(cfg.seed);
  for (std::size_t i = 0; i < n; ++i) {
    const bool second = i >= cfg.n_per_group;
    const Range& ra = second ? cfg.sigma_a_g2 : cfg.sigma_a_g1;
    const Range& rb = second ? cfg.sigma_b_g2 : cfg.sigma_b_g1;
    const double a = rng.uniform(ra.low, ra.high);
    const double b = rng.uniform(rb.low, rb.high);
    ds.sigma_a(i, 0) = a;
    ds.sigma_b(i, 0) = b;
    ds.labels[i] = second ? 1 : 0;
    auto img = ds.images.row(i);
    for (std::size_t p = 0; p < pixels; ++p) {
      img[p] = cfg.quadrant1_magnitude * blobs[0][p] + a * blobs[1][p] + b * blobs[2][p] +
               a * blobs[3][p];
    }
    if (cfg.pixel_noise_std > 0.0) {
      for (std::size_t p = 0; p < pixels; ++p) img[p] += cfg.pixel_noise_std * rng.normal();
    }
  }
  return ds;
}

double theoretical_max_accuracy(const SynthConfig& cfg) {
  check_range(cfg.sigma_a_g1, "sigma_a_g1");
  check_range(cfg.sigma_a_g2, "sigma_a_g2");
  const double w1 = cfg.sigma_a_g1.high - cfg.sigma_a_g1.low;
  const double w2 = cfg.sigma_a_g2.high - cfg.sigma_a_g2.low;
  const double shared = intersection_length(cfg.sigma_a_g1, cfg.sigma_a_g2) * std::min(1.0 / w1, 1.0 / w2);
  return 1.0 - 0.5 * shared;
}

const char* to_string(OverlapTag tag) {
  switch (tag) {
    case OverlapTag::Overlap: return "overlap";
    case OverlapTag::PureGroup1: return "group1";
    case OverlapTag::PureGroup2: return "group2";
  }
  return "unknown";
}

std::vector<OverlapTag> overlap_partition(const SyntheticDataset& ds) {
  const Range& g1 = ds.config.sigma_a_g1;
  const Range& g2 = ds.config.sigma_a_g2;
  const double low = std::max(g1.low, g2.low);
  const double high = std::min(g1.high, g2.high);
  std::vector<OverlapTag> tags(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double a = ds.sigma_a(i, 0);
    if (low <= high && a >= low && a <= high) {
      tags[i] = OverlapTag::Overlap;
    } else {
      tags[i] = ds.labels[i] == 0 ? OverlapTag::PureGroup1 : OverlapTag::PureGroup2;
    }
  }
  return tags;
}

std::vector<std::uint8_t> serialize(const SyntheticDataset& ds) {
  const std::size_t n = ds.size();
  const std::size_t side = ds.config.image_size;
  if (ds.images.rows() != n || ds.images.cols() != side * side || ds.sigma_b.rows() != n ||
      ds.sigma_a.rows() != n) {
    throw SynthError("save: dataset arrays are inconsistent with its label count");
  }
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(side));
  w.u32(static_cast<std::uint32_t>(side));
  w.u32(1);
  w.u64(ds.config.seed);
  for (double v : ds.images.values()) w.f32(static_cast<float>(v));
  for (double v : ds.sigma_b.values()) w.f32(static_cast<float>(v));
  for (double v : ds.sigma_a.values()) w.f32(static_cast<float>(v));
  for (std::uint8_t l : ds.labels) w.u8(l);
  return w.release();
}

SyntheticDataset deserialize(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  try {
    if (r.bytes(kMagic.size()) != kMagic) throw SynthError("bad magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
      throw SynthError("version mismatch: file has " + std::to_string(version) + ", expected " +
                       std::to_string(kVersion));
    }
    const std::uint32_t n = r.u32();
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    const std::uint32_t k_meta = r.u32();
    const std::uint64_t seed = r.u64();
    if (h != w) throw SynthError("non-square images are not supported");
    if (k_meta != 1) throw SynthError("expected exactly one metadata column");

    const std::size_t pixels = static_cast<std::size_t>(h) * w;
    const std::size_t expected = static_cast<std::size_t>(n) * (pixels * 4 + 4 + 4 + 1);
    if (r.remaining() != expected) throw SynthError("truncated payload");

    SyntheticDataset ds;
    ds.config.seed = seed;
    ds.config.image_size = h;
    ds.config.n_per_group = n / 2;
    ds.images = Matrix(n, pixels);
    ds.sigma_b = Matrix(n, 1);
    ds.sigma_a = Matrix(n, 1);
    ds.labels.resize(n);
    for (double& v : ds.images.values()) v = r.f32();
    for (double& v : ds.sigma_b.values()) v = r.f32();
    for (double& v : ds.sigma_a.values()) v = r.f32();
    for (auto& l : ds.labels) l = r.u8();
    return ds;
  } catch (const TruncatedInput&) {
    throw SynthError("truncated payload");
  }
}

void save(const SyntheticDataset& ds, const std::filesystem::path& path) {
  write_file(path, serialize(ds));
}

SyntheticDataset load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace mdn
