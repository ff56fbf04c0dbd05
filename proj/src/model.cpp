#include "hcd/model.hpp"

#include <cmath>

#include "hcd/ops.hpp"

namespace hcd {

void ModelConfig::validate() const {
  if (in_channels == 0 || conv1_channels == 0 || conv2_channels == 0) {
    throw ValueError("model: channel counts must be positive");
  }
  if (classes < 2) throw ValueError("model: need at least two classes");
  if (kernel_size < 3 || kernel_size % 2 == 0) {
    throw ValueError("model: kernel size must be odd and >= 3");
  }
  if (image_hw % 4 != 0 || image_hw < 8) {
    throw ValueError("model: image size must be a multiple of 4 and >= 8, got " +
                     std::to_string(image_hw));
  }
  if (use_gate) {
    if (gate_reduction == 0 || conv2_channels % gate_reduction != 0) {
      throw ValueError("model: gate reduction " + std::to_string(gate_reduction) +
                       " must divide conv2 channels " + std::to_string(conv2_channels));
    }
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
      throw ValueError("model: dropout probability must lie in [0,1)");
    }
    if (projector_width == 0) throw ValueError("model: projector width must be positive");
  }
}

namespace {

Tensor conv_init(Shape shape, Rng& rng) {
  // kaiming-uniform keeps relu activation variance near unity through depth
  std::size_t fan_in = shape[1] * shape[2] * shape[3];
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> vals(shape_numel(shape));
  for (auto& v : vals) v = rng.uniform(-bound, bound);
  Tensor t(std::move(shape), std::move(vals));
  t.requires_grad_(true);
  return t;
}

Tensor linear_init(Shape shape, Rng& rng) {
  std::size_t fan_in = shape[1];
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> vals(shape_numel(shape));
  for (auto& v : vals) v = rng.uniform(-bound, bound);
  Tensor t(std::move(shape), std::move(vals));
  t.requires_grad_(true);
  return t;
}

}  // namespace

HcdModel HcdModel::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  HcdModel m;
  m.cfg = cfg;
  // draw order: conv1, conv2, head, then gate and projector
  m.conv1_w = conv_init({cfg.conv1_channels, cfg.in_channels, cfg.kernel_size, cfg.kernel_size}, rng);
  m.conv1_b = Tensor::zeros({cfg.conv1_channels}).requires_grad_(true);
  m.conv2_w = conv_init({cfg.conv2_channels, cfg.conv1_channels, cfg.kernel_size, cfg.kernel_size}, rng);
  m.conv2_b = Tensor::zeros({cfg.conv2_channels}).requires_grad_(true);
  m.head_w = linear_init({cfg.classes, cfg.conv2_channels}, rng);
  m.head_b = Tensor::zeros({cfg.classes}).requires_grad_(true);
  if (cfg.use_gate) {
    m.gate = GateParams::init(cfg.conv2_channels, cfg.gate_reduction, cfg.dropout_p, rng);
    m.projector = ProjectorParams::init(cfg.conv2_channels, cfg.projector_width, rng);
  }
  return m;
}

Tensor HcdModel::stage1(const Tensor& x) const {
  return ops::relu(ops::conv2d(x, conv1_w, conv1_b, 2, cfg.kernel_size / 2));
}

Tensor HcdModel::stage2(const Tensor& f1) const {
  return ops::relu(ops::conv2d(f1, conv2_w, conv2_b, 2, cfg.kernel_size / 2));
}

Tensor HcdModel::features(const Tensor& x) const { return stage2(stage1(x)); }

Tensor HcdModel::head(const Tensor& z_hat) const {
  return ops::add(ops::matmul(z_hat, ops::transpose(head_w)), head_b);
}

std::vector<Tensor*> HcdModel::parameters() {
  std::vector<Tensor*> out{&conv1_w, &conv1_b, &conv2_w, &conv2_b, &head_w, &head_b};
  if (cfg.use_gate) {
    for (Tensor* t : gate.parameters()) out.push_back(t);
    for (Tensor* t : projector.parameters()) out.push_back(t);
  }
  return out;
}

std::vector<std::string> HcdModel::parameter_names() const {
  std::vector<std::string> out{"conv1.w", "conv1.b", "conv2.w", "conv2.b", "head.w", "head.b"};
  if (cfg.use_gate) {
    out.insert(out.end(), {"gate.w1", "gate.w2", "gate.bn.gamma", "gate.bn.beta", "proj.w1",
                           "proj.bn.gamma", "proj.bn.beta", "proj.w2", "proj.b2"});
  }
  return out;
}

}  // namespace hcd
