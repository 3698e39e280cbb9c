#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "mdn/metadata_norm.hpp"
#include "mdn/nn.hpp"

namespace mdn {

enum class Variant : std::uint32_t { Baseline = 0, Bn = 1, Gn = 2, MdnFc = 3, MdnConv = 4 };

const char* to_string(Variant v);
Variant parse_variant(std::string_view name);
bool uses_mdn(Variant v);

/// Shape parameters of the two-conv, two-dense network. The defaults give a
/// 24·24·32 = 18432-wide flatten in front of the first dense layer.
struct ArchConfig {
  std::uint32_t image_size = 32;
  std::uint32_t conv1_channels = 16;
  std::uint32_t conv2_channels = 32;
  std::uint32_t kernel = 5;
  std::uint32_t fc1_units = 84;
  std::uint32_t gn_groups = 4;
  /// Training-time only; checkpoints always reload with F64.
  nn::GemmPrecision gemm_precision = nn::GemmPrecision::F64;

  std::size_t flatten_width() const;
};

struct Model {
  Variant variant = Variant::Baseline;
  ArchConfig arch;
  MdnConfig mdn;  ///< meaningful for MDN variants only
  nn::LayerStack stack;

  /// Output of the first dense block (after its ReLU and, if attached, MDN).
  const Matrix& fc1_features() const { return stack.tapped(); }
};

/// conv → [norm] → ReLU → [MDN] twice, then dense(fc1) → ReLU → [MDN] →
/// dense(1) → sigmoid. BN/GN sit between each conv and its ReLU; MDN-FC adds
/// one MDN after the first dense block and MDN-Conv adds one after each conv
/// block as well. `mdn_template` supplies the precomputed Σ⁻¹ for every MDN
/// layer and is required for MDN variants.
Model build_model(Variant variant, const ArchConfig& arch, const MdnConfig& mdn_cfg,
                  const MdnState* mdn_template, Rng& rng);

/// Little-endian checkpoint:
///   "MDNC" u32 version, u32 variant, u32 arch[6], u8 intercept, u8 control_labels,
///   u32 k_meta, u32 label_width, u64 n_total, f64 eta, u32 layer_count, then per
///   layer: u32 kind, u8 mdn_trained, u32 blob_count, blobs of (u32 rows, u32 cols,
///   f32 data[rows·cols]). Blobs are the trainable parameters followed by the
///   layer's buffers (BN running stats, MDN Σ⁻¹ and β).
void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace mdn
