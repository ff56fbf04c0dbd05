#pragma once

#include <string>
#include <vector>

#include "hcd/model.hpp"
#include "hcd/synthbench.hpp"

namespace hcd {

// Per-channel gate statistics plus an input-ablation sensitivity ranking:
// for each pooled feature channel, how strongly it responds to removing the
// spurious cue versus removing the causal pattern (counterfactual renders
// share every random draw with the full render). Channels are grouped by
// which sensitivity dominates; the numeric stand-in for saliency evidence.
struct ChannelReport {
  std::vector<double> mask_mean;          // eval-mode mask activation per channel
  std::vector<double> cue_sensitivity;    // mean |pooled delta| vs no-cue render
  std::vector<double> causal_sensitivity; // mean |pooled delta| vs no-causal render
  std::vector<int> group;                 // 1 = cue-dominant, 0 = causal-dominant
  double cue_group_mask_mean = 1.0;
  double causal_group_mask_mean = 1.0;
  std::size_t cue_channels = 0;
  std::size_t causal_channels = 0;

  std::string to_csv() const;
};

ChannelReport inspect_mask(HcdModel& model, const SynthSpec& spec, std::size_t n_probe,
                           std::size_t batch_size);

}  // namespace hcd
