#include <string>

#include "mdn/binary_io.hpp"
#include "mdn/model.hpp"

namespace mdn {

namespace {

constexpr std::string_view kMagic = "MDNC";
constexpr std::uint32_t kVersion = 1;

std::vector<Matrix*> blobs_of(nn::Layer& layer) {
  std::vector<Matrix*> blobs;
  for (auto& p : layer.params()) blobs.push_back(p.value);
  for (Matrix* b : layer.buffers()) blobs.push_back(b);
  return blobs;
}

}  // namespace

void save_checkpoint(Model& model, const std::filesystem::path& path) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(model.variant));
  const auto& a = model.arch;
  for (std::uint32_t v : {a.image_size, a.conv1_channels, a.conv2_channels, a.kernel, a.fc1_units,
                          a.gn_groups}) {
    w.u32(v);
  }
  std::uint32_t k_meta = 0;
  std::uint32_t label_width = 0;
  for (std::size_t i = 0; i < model.stack.size(); ++i) {
    if (auto* m = dynamic_cast<nn::MdnLayer*>(&model.stack.at(i))) {
      k_meta = static_cast<std::uint32_t>(m->state().k_meta);
      label_width = static_cast<std::uint32_t>(m->state().label_width);
    }
  }
  w.u8(model.mdn.include_intercept ? 1 : 0);
  w.u8(model.mdn.control_labels ? 1 : 0);
  w.u32(k_meta);
  w.u32(label_width);
  w.u64(model.mdn.n_total);
  w.f64(model.mdn.momentum_eta);

  w.u32(static_cast<std::uint32_t>(model.stack.size()));
  for (std::size_t i = 0; i < model.stack.size(); ++i) {
    auto& layer = model.stack.at(i);
    w.u32(static_cast<std::uint32_t>(layer.kind()));
    const auto* mdn_layer = dynamic_cast<const nn::MdnLayer*>(&layer);
    w.u8(mdn_layer && mdn_layer->state().trained ? 1 : 0);
    const auto blobs = blobs_of(layer);
    w.u32(static_cast<std::uint32_t>(blobs.size()));
    for (const Matrix* b : blobs) {
      w.u32(static_cast<std::uint32_t>(b->rows()));
      w.u32(static_cast<std::uint32_t>(b->cols()));
      for (double v : b->values()) w.f32(static_cast<float>(v));
    }
  }
  write_file(path, w.release());
}

Model load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes);
  try {
    if (r.bytes(kMagic.size()) != kMagic) throw std::runtime_error("checkpoint: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
      throw std::runtime_error("checkpoint: version mismatch (file " + std::to_string(version) +
                               ", expected " + std::to_string(kVersion) + ")");
    }
    const auto variant = static_cast<Variant>(r.u32());
    ArchConfig arch;
    arch.image_size = r.u32();
    arch.conv1_channels = r.u32();
    arch.conv2_channels = r.u32();
    arch.kernel = r.u32();
    arch.fc1_units = r.u32();
    arch.gn_groups = r.u32();
    MdnConfig cfg;
    cfg.include_intercept = r.u8() != 0;
    cfg.control_labels = r.u8() != 0;
    const std::uint32_t k_meta = r.u32();
    const std::uint32_t label_width = r.u32();
    cfg.n_total = r.u64();
    cfg.momentum_eta = r.f64();

    // Rebuild the layer stack, then overwrite every blob from the file.
    MdnState tmpl;
    tmpl.intercept = cfg.include_intercept;
    tmpl.k_meta = k_meta;
    tmpl.label_width = label_width;
    tmpl.sigma_inv = Matrix(tmpl.design_width(), tmpl.design_width());
    Rng rng(0);
    Model model = build_model(variant, arch, cfg, uses_mdn(variant) ? &tmpl : nullptr, rng);

    const std::uint32_t layer_count = r.u32();
    if (layer_count != model.stack.size()) {
      throw std::runtime_error("checkpoint: layer count does not match the variant");
    }
    for (std::size_t i = 0; i < layer_count; ++i) {
      auto& layer = model.stack.at(i);
      if (r.u32() != static_cast<std::uint32_t>(layer.kind())) {
        throw std::runtime_error("checkpoint: layer " + std::to_string(i) + " kind mismatch");
      }
      const bool trained = r.u8() != 0;
      if (auto* m = dynamic_cast<nn::MdnLayer*>(&layer)) m->state().trained = trained;
      auto blobs = blobs_of(layer);
      if (r.u32() != blobs.size()) {
        throw std::runtime_error("checkpoint: layer " + std::to_string(i) + " blob count mismatch");
      }
      for (Matrix* b : blobs) {
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        if (rows != b->rows() || cols != b->cols()) {
          throw std::runtime_error("checkpoint: blob shape mismatch in layer " + std::to_string(i));
        }
        for (double& v : b->values()) v = r.f32();
      }
    }
    if (r.remaining() != 0) throw std::runtime_error("checkpoint: trailing bytes");
    return model;
  } catch (const TruncatedInput&) {
    throw std::runtime_error("checkpoint: truncated payload");
  }
}

}  // namespace mdn
