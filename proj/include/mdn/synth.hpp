#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "mdn/linalg.hpp"

namespace mdn {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Range {
  double low = 0.0;
  double high = 0.0;
};

/// Two-group Gaussian-blob image generator.
///
/// Each image is the sum of four isotropic Gaussian blobs at the quadrant
/// centers. Quadrants II (top-left) and IV (bottom-right) peak at the sample's
/// sigma_a, quadrant III (bottom-left) at its sigma_b, and quadrant I
/// (top-right) at a fixed magnitude shared by both groups. Group 1 is label 0.
struct SynthConfig {
  std::uint32_t n_per_group = 1000;
  std::uint32_t image_size = 32;
  Range sigma_a_g1{1.0, 4.0};
  Range sigma_a_g2{3.0, 6.0};
  Range sigma_b_g1{1.0, 4.0};
  Range sigma_b_g2{3.0, 6.0};
  double blob_spatial_std = 4.0;
  double quadrant1_magnitude = 1.0;
  double pixel_noise_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  SynthConfig config;  ///< after load(), fields absent from the file keep their defaults
  Matrix images;       ///< N × (H·W), row-major pixels
  Matrix sigma_b;      ///< N × 1, the metadata
  Matrix sigma_a;      ///< N × 1, kept for analysis only
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::vector<int> groups() const { return {labels.begin(), labels.end()}; }

  friend bool operator==(const SyntheticDataset& a, const SyntheticDataset& b) {
    return a.images == b.images && a.sigma_b == b.sigma_b && a.sigma_a == b.sigma_a &&
           a.labels == b.labels && a.config.seed == b.config.seed;
  }
};

/// Peak-normalized blob value at pixel (row, col) for a blob centered at
/// (center_row, center_col).
double blob_value(double row, double col, double center_row, double center_col, double std);

/// Quadrant centers in (row, col) pixel coordinates, ordered I, II, III, IV.
std::array<std::pair<double, double>, 4> quadrant_centers(std::uint32_t image_size);

SyntheticDataset generate(const SynthConfig& cfg);

/// Bayes accuracy of a classifier that only sees sigma_a, equal priors:
/// 1 − ½∫min(p₁, p₂).
double theoretical_max_accuracy(const SynthConfig& cfg);

enum class OverlapTag : std::uint8_t { Overlap = 0, PureGroup1 = 1, PureGroup2 = 2 };

const char* to_string(OverlapTag tag);

/// Tags each sample whose sigma_a lies in the closed intersection of the two
/// groups' sigma_a ranges as Overlap; the rest by their group.
std::vector<OverlapTag> overlap_partition(const SyntheticDataset& ds);

/// Little-endian binary format:
///   "MDNS" u32 version=1, u32 N, u32 H, u32 W, u32 K_meta=1, u64 seed,
///   f32 images[N·H·W], f32 sigma_b[N], f32 sigma_a[N], u8 labels[N].
void save(const SyntheticDataset& ds, const std::filesystem::path& path);
SyntheticDataset load(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize(const SyntheticDataset& ds);
SyntheticDataset deserialize(const std::vector<std::uint8_t>& bytes);

}  // namespace mdn
