#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "hcd/checkpoint.hpp"
#include "hcd/config.hpp"
#include "hcd/inspect.hpp"
#include "hcd/metrics.hpp"
#include "hcd/runner.hpp"
#include "hcd/selftest.hpp"

namespace fs = std::filesystem;
using namespace hcd;

namespace {

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return ExperimentConfig{};
  return ExperimentConfig::parse_file(path);
}

// rebuild the trained model of one seed from its config and checkpoint
HcdModel model_from_checkpoint(const ExperimentConfig& cfg, std::uint64_t seed,
                               const std::string& ckpt_path) {
  Rng rng(init_seed(seed));
  HcdModel model = HcdModel::init(cfg.model_config(), rng);
  AdamState opt = AdamState::init(model.parameters(), cfg.adam);
  load_checkpoint(ckpt_path, model, opt);
  return model;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical causal dropout experiment runner"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "train and evaluate over the configured seeds");
  std::string run_config, run_method, run_seeds, run_output;
  std::size_t run_epochs = 0;
  bool run_paper_faithful = false;
  run->add_option("--config", run_config, "experiment config file");
  run->add_option("--method", run_method, "hcd or erm");
  run->add_option("--seeds", run_seeds, "seed list, e.g. 0..4 or 0,2,5");
  run->add_option("--epochs", run_epochs, "training epochs");
  run->add_option("--output", run_output, "output directory");
  run->add_flag("--paper-faithful", run_paper_faithful,
                "disable the documented deviations (dropout rescaling, gradient clipping)");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "run the in-process verification suites");
  std::string mutate;
  selftest->add_option("--mutate", mutate,
                       "inject a known fault (mi_domain_grad_sign_flip) to prove detection");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate and serialize the synthetic benchmark");
  std::string gen_config, gen_out;
  bool gen_csv = false;
  std::uint64_t gen_seed = 0;
  gen->add_option("--config", gen_config, "experiment config file");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "run seed the dataset is derived from");
  gen->add_flag("--csv", gen_csv, "also export directory-of-csv for inspection");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a benchmark split");
  std::string ev_config, ev_ckpt, ev_split = "ood";
  std::uint64_t ev_seed = 0;
  ev->add_option("--config", ev_config, "experiment config file");
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--seed", ev_seed, "run seed the dataset is derived from");
  ev->add_option("--split", ev_split, "train | id | ood");

  // inspect-mask
  auto* im = app.add_subcommand("inspect-mask",
                                "per-channel mask statistics and cue/causal sensitivity");
  std::string im_config, im_ckpt, im_out;
  std::uint64_t im_seed = 0;
  std::size_t im_probe = 512;
  im->add_option("--config", im_config, "experiment config file");
  im->add_option("--checkpoint", im_ckpt, "checkpoint file")->required();
  im->add_option("--seed", im_seed, "run seed the probe data is derived from");
  im->add_option("--probe", im_probe, "probe sample count");
  im->add_option("--out", im_out, "write the csv report here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg = load_config(run_config);
      if (!run_method.empty()) cfg.method = run_method;
      if (!run_seeds.empty()) {
        std::string text = "[experiment]\nseeds = " + run_seeds + "\n";
        cfg.seeds = ExperimentConfig::parse_string(text).seeds;
      }
      if (run_epochs > 0) {
        cfg.epochs = run_epochs;
        cfg.schedule.epochs_total = run_epochs;
      }
      if (!run_output.empty()) cfg.output_dir = run_output;
      if (run_paper_faithful) cfg.paper_faithful = true;
      cfg.model.use_gate = (cfg.method == "hcd");
      return run_experiment(cfg, &std::cout);
    }

    if (*selftest) {
      Mutation m = Mutation::none;
      if (!mutate.empty()) {
        if (mutate == "mi_domain_grad_sign_flip") {
          m = Mutation::mi_domain_grad_sign_flip;
        } else {
          std::cerr << "unknown mutation '" << mutate << "'\n";
          return 2;
        }
      }
      SelftestReport report = run_selftest(m);
      std::cout << report.render();
      return report.ok() ? 0 : 1;
    }

    if (*gen) {
      ExperimentConfig cfg = load_config(gen_config);
      SynthSpec spec = cfg.data;
      spec.seed = data_seed(gen_seed);
      SynthData data = generate(spec);
      fs::create_directories(gen_out);
      save_dataset((fs::path(gen_out) / "train.bin").string(), spec, Split::train, data.train);
      save_dataset((fs::path(gen_out) / "id_test.bin").string(), spec, Split::id_test,
                   data.id_test);
      save_dataset((fs::path(gen_out) / "ood_test.bin").string(), spec, Split::ood_test,
                   data.ood_test);
      if (gen_csv) {
        export_csv((fs::path(gen_out) / "csv_train").string(), data.train);
        export_csv((fs::path(gen_out) / "csv_id_test").string(), data.id_test);
        export_csv((fs::path(gen_out) / "csv_ood_test").string(), data.ood_test);
      }
      std::cout << "wrote train/id_test/ood_test datasets under " << gen_out << "\n";
      return 0;
    }

    if (*ev) {
      ExperimentConfig cfg = load_config(ev_config);
      HcdModel model = model_from_checkpoint(cfg, ev_seed, ev_ckpt);
      SynthSpec spec = cfg.data;
      spec.seed = data_seed(ev_seed);
      Split split = ev_split == "train" ? Split::train
                    : ev_split == "id" ? Split::id_test
                    : ev_split == "ood" ? Split::ood_test
                                        : throw ValueError("unknown split '" + ev_split + "'");
      Dataset ds = generate_split(spec, split);
      EvalMetrics m = evaluate(model, ds, cfg.batch_size);
      SummaryKv kv;
      kv.emplace_back("split", ev_split);
      kv.emplace_back("count", std::to_string(m.count));
      kv.emplace_back("accuracy", format_double(m.accuracy));
      kv.emplace_back("mean_mask_activation", format_double(m.mean_mask_activation));
      kv.emplace_back("mi_domain", format_double(m.mi_domain));
      for (const auto& [dom, acc] : m.per_domain_accuracy) {
        kv.emplace_back("accuracy_domain_" + std::to_string(dom), format_double(acc));
      }
      for (const auto& [cls, acc] : m.per_class_accuracy) {
        kv.emplace_back("accuracy_class_" + std::to_string(cls), format_double(acc));
      }
      std::cout << render_summary(kv);
      return 0;
    }

    if (*im) {
      ExperimentConfig cfg = load_config(im_config);
      HcdModel model = model_from_checkpoint(cfg, im_seed, im_ckpt);
      SynthSpec spec = cfg.data;
      spec.seed = data_seed(im_seed);
      ChannelReport rep = inspect_mask(model, spec, im_probe, cfg.batch_size);
      std::string csv = rep.to_csv();
      SummaryKv kv;
      kv.emplace_back("cue_channels", std::to_string(rep.cue_channels));
      kv.emplace_back("causal_channels", std::to_string(rep.causal_channels));
      kv.emplace_back("cue_group_mask_mean", format_double(rep.cue_group_mask_mean));
      kv.emplace_back("causal_group_mask_mean", format_double(rep.causal_group_mask_mean));
      if (im_out.empty()) {
        std::cout << csv << render_summary(kv);
      } else {
        write_text_file(im_out, csv);
        std::cout << render_summary(kv);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
