#pragma once

#include <map>
#include <string>
#include <vector>

#include "hcd/model.hpp"
#include "hcd/objective.hpp"
#include "hcd/optim.hpp"
#include "hcd/rng.hpp"
#include "hcd/synthbench.hpp"
#include "hcd/vicreg.hpp"

namespace hcd {

struct TrainFlags {
  bool grad_clip_enabled = true;
  double clip_norm = 5.0;
  bool inverted_dropout_scaling = true;
  bool stylemix_enabled = true;
  double stylemix_epsilon = 1e-6;

  // literal published configuration: no dropout rescaling, no clipping
  static TrainFlags paper_faithful() {
    TrainFlags f;
    f.grad_clip_enabled = false;
    f.inverted_dropout_scaling = false;
    return f;
  }
};

struct Batch {
  Tensor x;            // [n,C,H,W]
  std::vector<int> y;
  std::vector<int> d;
  std::size_t size() const { return y.size(); }
};

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global optimizer step index
  double cls = 0, vic = 0, gram = 0, mi_c = 0, mi_d = 0, sparse = 0, total = 0;
  CurriculumSchedule::Weights weights;
  double mask_mean = 1.0, mask_std = 0.0;
  double mi_domain_estimate = 0.0;  // I(z_hat; d) of this batch
  double mi_class_estimate = 0.0;   // I(z_hat; y)
  double grad_norm = 0.0;           // pre-clip global norm
  double wall_ms = 0.0;             // only nondeterministic field
  bool aborted = false;
  std::string abort_reason;
};

// One optimizer step per Algorithm-1: backbone forward, gate, style branch
// re-encoded from the mixing point, six losses, weighted total, Adam update.
// A non-finite loss or gradient aborts the step with parameters, optimizer
// and batch-norm state untouched.
StepRecord train_step(HcdModel& model, AdamState& opt, const Batch& batch,
                      const CurriculumSchedule& schedule, const VicregWeights& vw,
                      std::size_t epoch, std::size_t step, Rng& rng, const TrainFlags& flags);

// Shuffles indices (one Fisher-Yates pass on `rng`), then steps over
// consecutive batches; trailing batches smaller than 2 are skipped.
std::vector<StepRecord> train_epoch(HcdModel& model, AdamState& opt, const Dataset& data,
                                    std::size_t batch_size, const CurriculumSchedule& schedule,
                                    const VicregWeights& vw, std::size_t epoch,
                                    std::size_t& global_step, Rng& rng, const TrainFlags& flags);

struct EvalMetrics {
  double accuracy = 0.0;
  std::map<int, double> per_domain_accuracy;  // empty slices omitted
  std::map<int, double> per_class_accuracy;
  double mean_mask_activation = 1.0;
  double mi_domain = 0.0;  // batch-averaged I(z_hat; d) estimate
  std::size_t count = 0;
};

EvalMetrics evaluate(HcdModel& model, const Dataset& data, std::size_t batch_size);

// per-channel mean mask activation over the dataset (eval mode)
std::vector<double> channel_mask_means(HcdModel& model, const Dataset& data,
                                       std::size_t batch_size);

}  // namespace hcd
