#pragma once

#include <iosfwd>
#include <string>

#include "hcd/config.hpp"

namespace hcd {

// seed-keyed sub-streams of a run seed
std::uint64_t data_seed(std::uint64_t run_seed);
std::uint64_t init_seed(std::uint64_t run_seed);
std::uint64_t train_seed(std::uint64_t run_seed);

struct SeedResult {
  std::uint64_t seed = 0;
  double id_accuracy = 0.0;
  double ood_accuracy = 0.0;
  double gap = 0.0;
  double final_mask_mean = 1.0;
  double first_epoch_mask_mean = 1.0;
  double mi_domain_ood = 0.0;
  bool resumed = false;
};

// Trains one seed end to end (resuming from seed_dir/checkpoint_last.bin when
// present and unfinished), writing steps.jsonl, schedule.csv, summary.txt and
// checkpoints under <output>/seed_<k>/.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out_root,
                    std::ostream* log);

// Full experiment: validate, resolve the output root, run every seed, write
// the aggregate summary. Returns a process exit code.
int run_experiment(const ExperimentConfig& cfg, std::ostream* log);

// output root resolution: HCD_OUTPUT_ROOT env prefixes relative output dirs
std::string resolve_output_root(const std::string& output_dir);

}  // namespace hcd
