#include "hcd/trainloop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hcd/kernelinfo.hpp"
#include "hcd/ops.hpp"
#include "hcd/styleaug.hpp"

namespace hcd {

namespace {

void mask_stats(const Tensor& mask, double& mean, double& stddev) {
  double acc = 0.0;
  for (std::size_t i = 0; i < mask.numel(); ++i) acc += mask.at(i);
  mean = acc / static_cast<double>(mask.numel());
  double var = 0.0;
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    double c = mask.at(i) - mean;
    var += c * c;
  }
  stddev = std::sqrt(var / static_cast<double>(mask.numel()));
}

}  // namespace

StepRecord train_step(HcdModel& model, AdamState& opt, const Batch& batch,
                      const CurriculumSchedule& schedule, const VicregWeights& vw,
                      std::size_t epoch, std::size_t step, Rng& rng, const TrainFlags& flags) {
  auto t0 = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.epoch = epoch;
  rec.step = step;
  rec.weights = schedule.at(epoch);

  if (batch.size() < 2) {
    throw ValueError("train_step: batch size " + std::to_string(batch.size()) +
                     " too small, kernel losses need >= 2");
  }

  auto params = model.parameters();
  GateFlags gate_flags;
  gate_flags.inverted_dropout_scaling = flags.inverted_dropout_scaling;

  Tape tape;
  GateOutput gate_out;
  try {
    TapeScope scope(tape);
    LossBundle bundle;
    if (model.cfg.use_gate) {
      // stylemix perturbs the first-stage map; the second stage re-encodes
      // the mixed map so content features can stay style-stable while
      // channel-statistic (style) features get scrambled
      Tensor f1 = model.stage1(batch.x);
      Tensor f = model.stage2(f1);
      Tensor z = pool(f);
      gate_out = gate_forward(z, model.gate, GateMode::train, rng, gate_flags);

      Tensor z_hat_style;
      Tensor f1_style;
      if (flags.stylemix_enabled) {
        Permutation perm = Permutation::sample(batch.size(), rng);
        f1_style = stylemix(f1, perm, flags.stylemix_epsilon);
        Tensor z_style = pool(model.stage2(f1_style));
        // the style branch reuses the clean branch's dropout realization so
        // the invariance loss compares like for like
        GateOutput gate_style = gate_forward_with_dropout(
            z_style, model.gate, GateMode::train, gate_out.dropout_realization, gate_flags);
        z_hat_style = gate_style.z_hat;
      }

      Tensor cls = ops::softmax_cross_entropy(model.head(gate_out.z_hat), batch.y);
      Tensor vic = Tensor::scalar(0.0);
      Tensor gram = Tensor::scalar(0.0);
      if (flags.stylemix_enabled) {
        Tensor p_clean = project(model.projector, gate_out.z_hat);
        Tensor p_style = project(model.projector, z_hat_style);
        vic = vicreg_loss(p_clean, p_style, vw).total;
        gram = gram_loss(f1, f1_style);
      }
      LabelVector dlab(batch.d, static_cast<int>(*std::max_element(batch.d.begin(),
                                                                   batch.d.end()) + 1));
      LabelVector ylab(batch.y, static_cast<int>(model.cfg.classes));
      Tensor mi_d = mi_domain_loss(gate_out.z_hat, dlab);
      Tensor mi_c = mi_class_loss(gate_out.z_hat, ylab);
      Tensor sparse = sparse_loss(gate_out.mask);

      bundle = total_loss(cls, vic, gram, mi_c, mi_d, sparse, rec.weights);
      mask_stats(gate_out.mask, rec.mask_mean, rec.mask_std);
      rec.mi_domain_estimate = mi_d.value();
      rec.mi_class_estimate = -mi_c.value();
    } else {
      // plain classifier: conv stack, pooling, head, cross-entropy
      Tensor f = model.features(batch.x);
      Tensor z = pool(f);
      Tensor cls = ops::softmax_cross_entropy(model.head(z), batch.y);
      bundle.cls = cls;
      bundle.vic = Tensor::scalar(0.0);
      bundle.gram = Tensor::scalar(0.0);
      bundle.mi_c = Tensor::scalar(0.0);
      bundle.mi_d = Tensor::scalar(0.0);
      bundle.sparse = Tensor::scalar(0.0);
      bundle.weights = CurriculumSchedule::Weights{};
      bundle.total = cls;
      bundle.validate();
      rec.weights = bundle.weights;
    }

    rec.cls = bundle.cls.value();
    rec.vic = bundle.vic.value();
    rec.gram = bundle.gram.value();
    rec.mi_c = bundle.mi_c.value();
    rec.mi_d = bundle.mi_d.value();
    rec.sparse = bundle.sparse.value();
    rec.total = bundle.total.value();

    tape.backward(bundle.total);
    if (!gradients_finite(params)) {
      throw NumericError("non-finite gradient");
    }
  } catch (const NumericError& e) {
    zero_gradients(params);
    rec.aborted = true;
    rec.abort_reason = e.what();
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
  }

  rec.grad_norm = grad_global_norm(params);
  if (flags.grad_clip_enabled) clip_gradients(params, flags.clip_norm);
  adam_update(params, opt);
  if (model.cfg.use_gate) commit_bn_update(model.gate, gate_out);
  zero_gradients(params);

  rec.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

std::vector<StepRecord> train_epoch(HcdModel& model, AdamState& opt, const Dataset& data,
                                    std::size_t batch_size, const CurriculumSchedule& schedule,
                                    const VicregWeights& vw, std::size_t epoch,
                                    std::size_t& global_step, Rng& rng, const TrainFlags& flags) {
  if (batch_size < 2) throw ValueError("train_epoch: batch size must be >= 2");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<StepRecord> records;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t end = std::min(start + batch_size, order.size());
    if (end - start < 2) break;  // kernel losses need at least two samples
    std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
    Batch batch{data.batch_images(idx), data.batch_labels(idx), data.batch_domains(idx)};
    records.push_back(
        train_step(model, opt, batch, schedule, vw, epoch, global_step, rng, flags));
    ++global_step;
  }
  return records;
}

EvalMetrics evaluate(HcdModel& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw ValueError("evaluate: dataset is empty");
  EvalMetrics m;
  m.count = data.size();

  std::map<int, std::size_t> domain_hits, domain_total, class_hits, class_total;
  double mask_acc = 0.0;
  std::size_t mask_n = 0;
  double mi_acc = 0.0;
  std::size_t mi_batches = 0;
  std::size_t hits = 0;
  Rng unused(0);

  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::size_t end = std::min(start + batch_size, data.size());
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    Batch batch{data.batch_images(idx), data.batch_labels(idx), data.batch_domains(idx)};

    Tensor z = pool(model.features(batch.x));
    Tensor z_hat = z;
    if (model.cfg.use_gate) {
      GateOutput out = gate_forward(z, model.gate, GateMode::eval, unused);
      z_hat = out.z_hat;
      for (std::size_t i = 0; i < out.mask.numel(); ++i) mask_acc += out.mask.at(i);
      mask_n += out.mask.numel();
    }
    std::vector<int> pred = ops::argmax_rows(model.head(z_hat));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      bool hit = pred[i] == batch.y[i];
      hits += hit;
      domain_total[batch.d[i]] += 1;
      domain_hits[batch.d[i]] += hit;
      class_total[batch.y[i]] += 1;
      class_hits[batch.y[i]] += hit;
    }
    if (batch.size() >= 2) {
      int card = *std::max_element(batch.d.begin(), batch.d.end()) + 1;
      mi_acc += mi_domain_loss(z_hat.detach(), LabelVector(batch.d, card)).value();
      ++mi_batches;
    }
  }

  m.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  for (auto& [dom, total] : domain_total) {
    m.per_domain_accuracy[dom] = static_cast<double>(domain_hits[dom]) / total;
  }
  for (auto& [cls, total] : class_total) {
    m.per_class_accuracy[cls] = static_cast<double>(class_hits[cls]) / total;
  }
  if (mask_n > 0) m.mean_mask_activation = mask_acc / static_cast<double>(mask_n);
  if (mi_batches > 0) m.mi_domain = mi_acc / static_cast<double>(mi_batches);
  return m;
}

std::vector<double> channel_mask_means(HcdModel& model, const Dataset& data,
                                       std::size_t batch_size) {
  if (!model.cfg.use_gate) {
    return std::vector<double>(model.cfg.conv2_channels, 1.0);
  }
  std::vector<double> acc(model.cfg.conv2_channels, 0.0);
  std::size_t rows = 0;
  Rng unused(0);
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::size_t end = std::min(start + batch_size, data.size());
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    Tensor z = pool(model.features(data.batch_images(idx)));
    GateOutput out = gate_forward(z, model.gate, GateMode::eval, unused);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += out.mask(i, c);
    rows += idx.size();
  }
  for (double& v : acc) v /= static_cast<double>(rows);
  return acc;
}

}  // namespace hcd
