#include "mdn/model.hpp"

#include <array>

namespace mdn {

namespace {

constexpr std::array<std::string_view, 5> kVariantNames = {"baseline", "bn", "gn", "mdn_fc",
                                                           "mdn_conv"};

void add_mdn(nn::LayerStack& stack, nn::Shape shape, const MdnConfig& cfg,
             const MdnState& tmpl) {
  MdnState state = tmpl;
  state.beta = Matrix();
  state.batch_index = 0;
  state.trained = false;
  stack.add(std::make_unique<nn::MdnLayer>(shape, cfg, std::move(state)));
}

}  // namespace

const char* to_string(Variant v) {
  const auto i = static_cast<std::size_t>(v);
  return i < kVariantNames.size() ? kVariantNames[i].data() : "unknown";
}

Variant parse_variant(std::string_view name) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i) {
    if (kVariantNames[i] == name) return static_cast<Variant>(i);
  }
  throw std::invalid_argument("unknown variant '" + std::string(name) +
                              "' (expected baseline, bn, gn, mdn_fc or mdn_conv)");
}

bool uses_mdn(Variant v) { return v == Variant::MdnFc || v == Variant::MdnConv; }

std::size_t ArchConfig::flatten_width() const {
  const std::size_t side = image_size - 2 * (kernel - 1);
  return static_cast<std::size_t>(conv2_channels) * side * side;
}

Model build_model(Variant variant, const ArchConfig& arch, const MdnConfig& mdn_cfg,
                  const MdnState* mdn_template, Rng& rng) {
  if (static_cast<std::size_t>(variant) >= kVariantNames.size()) {
    throw std::invalid_argument("build_model: unknown variant tag");
  }
  if (uses_mdn(variant) && mdn_template == nullptr) {
    throw std::invalid_argument(std::string("build_model: variant ") + to_string(variant) +
                                " needs a precomputed MDN state");
  }
  Model model;
  model.variant = variant;
  model.arch = arch;
  model.mdn = mdn_cfg;
  auto& stack = model.stack;

  nn::Shape shape{1, arch.image_size, arch.image_size};
  const std::array<std::uint32_t, 2> channels = {arch.conv1_channels, arch.conv2_channels};
  for (std::size_t block = 0; block < 2; ++block) {
    auto conv = std::make_unique<nn::Conv2d>(shape, channels[block], arch.kernel, rng);
    if (block == 0) conv->set_skip_input_grad(true);
    conv->set_precision(arch.gemm_precision);
    shape = conv->output_shape();
    stack.add(std::move(conv));
    if (variant == Variant::Bn) stack.add(std::make_unique<nn::BatchNorm>(shape));
    if (variant == Variant::Gn) stack.add(std::make_unique<nn::GroupNorm>(shape, arch.gn_groups));
    stack.add(std::make_unique<nn::Relu>(shape));
    if (variant == Variant::MdnConv) add_mdn(stack, shape, mdn_cfg, *mdn_template);
  }

  const std::size_t flat = shape.size();
  auto fc1 = std::make_unique<nn::Dense>(flat, arch.fc1_units, rng);
  fc1->set_precision(arch.gemm_precision);
  stack.add(std::move(fc1));
  const nn::Shape fc_shape{arch.fc1_units, 1, 1};
  stack.add(std::make_unique<nn::Relu>(fc_shape));
  if (uses_mdn(variant)) add_mdn(stack, fc_shape, mdn_cfg, *mdn_template);
  stack.set_tap(stack.size() - 1);

  stack.add(std::make_unique<nn::Dense>(arch.fc1_units, 1, rng));
  stack.add(std::make_unique<nn::Sigmoid>(nn::Shape{1, 1, 1}));
  return model;
}

}  // namespace mdn
