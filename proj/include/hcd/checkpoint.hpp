#pragma once

#include <cstdint>
#include <string>

#include "hcd/model.hpp"
#include "hcd/optim.hpp"

namespace hcd {

// Versioned binary blob of all parameters, optimizer buffers, batch-norm
// running statistics, the training RNG state and the epoch counter. The
// model/optimizer passed to load must already match the checkpoint's shapes
// (they come from the experiment config).
struct CheckpointMeta {
  std::uint64_t epoch = 0;
  std::uint64_t rng_state = 0;
  std::uint64_t global_step = 0;
};

void save_checkpoint(const std::string& path, HcdModel& model, const AdamState& opt,
                     const CheckpointMeta& meta);

CheckpointMeta load_checkpoint(const std::string& path, HcdModel& model, AdamState& opt);

}  // namespace hcd
