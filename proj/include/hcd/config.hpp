#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcd/model.hpp"
#include "hcd/objective.hpp"
#include "hcd/optim.hpp"
#include "hcd/synthbench.hpp"
#include "hcd/trainloop.hpp"
#include "hcd/vicreg.hpp"

namespace hcd {

// Flat key-value experiment configuration with sections. Unknown keys are
// rejected at parse time; value validation names the offending field.
struct ExperimentConfig {
  std::string method = "hcd";  // hcd | erm
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::size_t epochs = 20;
  std::string output_dir = "runs/experiment";
  bool paper_faithful = false;

  SynthSpec data;  // data.seed is derived per run seed, not configured
  ModelConfig model;
  VicregWeights vicreg;
  CurriculumSchedule schedule;
  AdamConfig adam;
  std::size_t batch_size = 32;
  double grad_clip = 5.0;  // 0 disables
  bool stylemix = true;
  double stylemix_epsilon = 1e-6;

  static ExperimentConfig parse_string(const std::string& text);
  static ExperimentConfig parse_file(const std::string& path);

  // canonical form; parse(serialize(x)) == x and serialize is stable
  std::string serialize() const;

  void validate() const;
  TrainFlags train_flags() const;

  // effective model config for the chosen method
  ModelConfig model_config() const;
};

}  // namespace hcd
