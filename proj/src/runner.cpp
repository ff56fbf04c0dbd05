#include "hcd/runner.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "hcd/checkpoint.hpp"
#include "hcd/metrics.hpp"
#include "hcd/rng.hpp"

namespace hcd {

namespace fs = std::filesystem;

std::uint64_t data_seed(std::uint64_t run_seed) { return mix_seed(run_seed, 0xDA7A); }
std::uint64_t init_seed(std::uint64_t run_seed) { return mix_seed(run_seed, 0x1217); }
std::uint64_t train_seed(std::uint64_t run_seed) { return mix_seed(run_seed, 0x7124); }

std::string resolve_output_root(const std::string& output_dir) {
  fs::path p(output_dir);
  if (p.is_absolute()) return p.string();
  const char* root = std::getenv("HCD_OUTPUT_ROOT");
  if (root && *root) return (fs::path(root) / p).string();
  return p.string();
}

namespace {

double json_field(const std::string& line, const std::string& key) {
  std::string needle = "\"" + key + "\":";
  auto pos = line.find(needle);
  if (pos == std::string::npos) throw ValueError("missing field " + key + " in record");
  return std::strtod(line.c_str() + pos + needle.size(), nullptr);
}

// mean of a numeric field over the records of one epoch
double epoch_field_mean(const fs::path& jsonl, std::size_t epoch, const std::string& key) {
  std::ifstream is(jsonl);
  std::string line;
  double acc = 0.0;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (static_cast<std::size_t>(json_field(line, "epoch")) != epoch) continue;
    acc += json_field(line, key);
    ++n;
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

std::map<std::string, std::string> parse_kv_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValueError("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

void truncate_jsonl(const fs::path& jsonl, std::size_t epoch_start) {
  if (!fs::exists(jsonl)) return;
  std::vector<std::string> keep;
  {
    std::ifstream is(jsonl);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (static_cast<std::size_t>(json_field(line, "epoch")) < epoch_start) {
        keep.push_back(line);
      }
    }
  }
  std::ofstream os(jsonl, std::ios::trunc);
  for (const auto& l : keep) os << l << "\n";
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out_root,
                    std::ostream* log) {
  fs::path seed_dir = fs::path(out_root) / ("seed_" + std::to_string(seed));
  fs::create_directories(seed_dir);
  fs::path jsonl_path = seed_dir / "steps.jsonl";
  fs::path ckpt_last = seed_dir / "checkpoint_last.bin";
  fs::path ckpt_final = seed_dir / "checkpoint_final.bin";
  fs::path summary_path = seed_dir / "summary.txt";

  SynthSpec spec = cfg.data;
  spec.seed = data_seed(seed);
  SynthData data = generate(spec);

  Rng model_rng(init_seed(seed));
  HcdModel model = HcdModel::init(cfg.model_config(), model_rng);
  AdamState opt = AdamState::init(model.parameters(), cfg.adam);
  Rng rng(train_seed(seed));

  CurriculumSchedule schedule = cfg.schedule;
  schedule.epochs_total = cfg.epochs;
  TrainFlags flags = cfg.train_flags();
  VicregWeights vw = cfg.vicreg;

  std::size_t epoch_start = 0;
  std::size_t global_step = 0;
  SeedResult result;
  result.seed = seed;

  if (fs::exists(ckpt_last) && !fs::exists(summary_path)) {
    CheckpointMeta meta = load_checkpoint(ckpt_last.string(), model, opt);
    epoch_start = meta.epoch;
    global_step = meta.global_step;
    rng.set_state(meta.rng_state);
    truncate_jsonl(jsonl_path, epoch_start);
    result.resumed = true;
    if (log) *log << "seed " << seed << ": resuming from epoch " << epoch_start << "\n";
  } else {
    std::ofstream clear(jsonl_path, std::ios::trunc);
  }

  std::size_t aborted = 0;
  for (std::size_t epoch = epoch_start; epoch < cfg.epochs; ++epoch) {
    auto records = train_epoch(model, opt, data.train, cfg.batch_size, schedule, vw, epoch,
                               global_step, rng, flags);
    {
      std::ofstream os(jsonl_path, std::ios::app);
      for (const auto& r : records) {
        os << record_to_json(r) << "\n";
        aborted += r.aborted;
      }
    }
    save_checkpoint(ckpt_last.string(), model, opt,
                    CheckpointMeta{epoch + 1, rng.state(), global_step});
    if (log) {
      double cls = records.empty() ? 0.0 : records.back().cls;
      *log << "seed " << seed << " epoch " << epoch << " steps " << records.size()
           << " cls " << cls << "\n";
    }
  }

  write_text_file((seed_dir / "schedule.csv").string(), render_schedule_log(schedule));

  EvalMetrics id_m = evaluate(model, data.id_test, cfg.batch_size);
  EvalMetrics ood_m = evaluate(model, data.ood_test, cfg.batch_size);

  result.id_accuracy = id_m.accuracy;
  result.ood_accuracy = ood_m.accuracy;
  result.gap = shortcut_gap(id_m.accuracy, ood_m.accuracy);
  result.final_mask_mean = epoch_field_mean(jsonl_path, cfg.epochs - 1, "mask_mean");
  result.first_epoch_mask_mean = epoch_field_mean(jsonl_path, 0, "mask_mean");
  result.mi_domain_ood = ood_m.mi_domain;

  SummaryKv kv;
  kv.emplace_back("seed", std::to_string(seed));
  kv.emplace_back("method", cfg.method);
  kv.emplace_back("epochs", std::to_string(cfg.epochs));
  kv.emplace_back("id_accuracy", format_double(id_m.accuracy));
  kv.emplace_back("ood_accuracy", format_double(ood_m.accuracy));
  kv.emplace_back("shortcut_gap", format_double(result.gap));
  kv.emplace_back("eval_mask_mean", format_double(id_m.mean_mask_activation));
  kv.emplace_back("train_mask_mean_first_epoch", format_double(result.first_epoch_mask_mean));
  kv.emplace_back("train_mask_mean_final_epoch", format_double(result.final_mask_mean));
  kv.emplace_back("mi_domain_id", format_double(id_m.mi_domain));
  kv.emplace_back("mi_domain_ood", format_double(ood_m.mi_domain));
  kv.emplace_back("aborted_steps", std::to_string(aborted));
  for (const auto& [dom, acc] : id_m.per_domain_accuracy) {
    kv.emplace_back("id_accuracy_domain_" + std::to_string(dom), format_double(acc));
  }
  for (const auto& [dom, acc] : ood_m.per_domain_accuracy) {
    kv.emplace_back("ood_accuracy_domain_" + std::to_string(dom), format_double(acc));
  }
  for (const auto& [cls, acc] : id_m.per_class_accuracy) {
    kv.emplace_back("id_accuracy_class_" + std::to_string(cls), format_double(acc));
  }
  write_text_file(summary_path.string(), render_summary(kv));

  save_checkpoint(ckpt_final.string(), model, opt,
                  CheckpointMeta{cfg.epochs, rng.state(), global_step});
  return result;
}

int run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();  // throws before any output exists
  std::string root = resolve_output_root(cfg.output_dir);
  fs::create_directories(root);
  write_text_file((fs::path(root) / "config.resolved.ini").string(), cfg.serialize());

  std::vector<SeedResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    fs::path summary = fs::path(root) / ("seed_" + std::to_string(seed)) / "summary.txt";
    fs::path ckpt = fs::path(root) / ("seed_" + std::to_string(seed)) / "checkpoint_last.bin";
    if (fs::exists(summary) && fs::exists(ckpt)) {
      auto kv = parse_kv_file(summary);
      SeedResult r;
      r.seed = seed;
      r.id_accuracy = std::strtod(kv.at("id_accuracy").c_str(), nullptr);
      r.ood_accuracy = std::strtod(kv.at("ood_accuracy").c_str(), nullptr);
      r.gap = std::strtod(kv.at("shortcut_gap").c_str(), nullptr);
      r.final_mask_mean = std::strtod(kv.at("train_mask_mean_final_epoch").c_str(), nullptr);
      r.first_epoch_mask_mean =
          std::strtod(kv.at("train_mask_mean_first_epoch").c_str(), nullptr);
      results.push_back(r);
      if (log) *log << "seed " << seed << ": already complete, reusing summary\n";
      continue;
    }
    results.push_back(run_seed(cfg, seed, root, log));
  }

  std::vector<double> id_acc, ood_acc, gaps;
  for (const auto& r : results) {
    id_acc.push_back(r.id_accuracy);
    ood_acc.push_back(r.ood_accuracy);
    gaps.push_back(r.gap);
  }
  double id_mean, id_std, ood_mean, ood_std, gap_mean, gap_std;
  mean_and_std(id_acc, id_mean, id_std);
  mean_and_std(ood_acc, ood_mean, ood_std);
  mean_and_std(gaps, gap_mean, gap_std);

  SummaryKv kv;
  kv.emplace_back("method", cfg.method);
  kv.emplace_back("seed_count", std::to_string(results.size()));
  kv.emplace_back("epochs", std::to_string(cfg.epochs));
  kv.emplace_back("id_accuracy_mean", format_double(id_mean));
  kv.emplace_back("id_accuracy_std", format_double(id_std));
  kv.emplace_back("ood_accuracy_mean", format_double(ood_mean));
  kv.emplace_back("ood_accuracy_std", format_double(ood_std));
  kv.emplace_back("shortcut_gap_mean", format_double(gap_mean));
  kv.emplace_back("shortcut_gap_std", format_double(gap_std));
  for (const auto& r : results) {
    std::string p = "seed_" + std::to_string(r.seed) + "_";
    kv.emplace_back(p + "id_accuracy", format_double(r.id_accuracy));
    kv.emplace_back(p + "ood_accuracy", format_double(r.ood_accuracy));
    kv.emplace_back(p + "shortcut_gap", format_double(r.gap));
  }
  write_text_file((fs::path(root) / "summary.txt").string(), render_summary(kv));
  if (log) {
    *log << "wrote " << (fs::path(root) / "summary.txt").string() << "\n"
         << "ood accuracy " << ood_mean << " +- " << ood_std << "\n";
  }
  return 0;
}

}  // namespace hcd
