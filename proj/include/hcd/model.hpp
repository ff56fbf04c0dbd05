#pragma once

#include <string>
#include <vector>

#include "hcd/gater.hpp"
#include "hcd/rng.hpp"
#include "hcd/tensor.hpp"
#include "hcd/vicreg.hpp"

namespace hcd {

struct ModelConfig {
  std::size_t in_channels = 3;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t kernel_size = 5;  // odd; stride-2 convs with same-ish padding
  std::size_t image_hw = 16;
  std::size_t classes = 2;
  bool use_gate = true;  // false for the plain (erm) classifier
  std::size_t gate_reduction = 16;
  double dropout_p = 0.2;
  std::size_t projector_width = 256;

  void validate() const;
};

// Two stride-2 conv blocks, global pooling, linear head; the gater and the
// projector ride along when the method needs them.
struct HcdModel {
  ModelConfig cfg;
  Tensor conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;
  Tensor head_w, head_b;
  GateParams gate;            // valid only when cfg.use_gate
  ProjectorParams projector;  // valid only when cfg.use_gate

  static HcdModel init(const ModelConfig& cfg, Rng& rng);

  // conv1 -> relu (the style-mixing point)
  Tensor stage1(const Tensor& x) const;
  // conv2 -> relu
  Tensor stage2(const Tensor& f1) const;
  // stage2(stage1(x))
  Tensor features(const Tensor& x) const;
  Tensor head(const Tensor& z_hat) const;

  // canonical parameter order; matches parameter_names()
  std::vector<Tensor*> parameters();
  std::vector<std::string> parameter_names() const;
};

}  // namespace hcd
