#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>

#include "hcd/inspect.hpp"
#include "hcd/metrics.hpp"
#include "hcd/runner.hpp"

using namespace hcd;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_run_config(const std::string& method, std::size_t epochs) {
  ExperimentConfig cfg;
  cfg.method = method;
  cfg.seeds = {0};
  cfg.epochs = epochs;
  cfg.schedule.epochs_total = epochs;
  cfg.data.n_train = 96;
  cfg.data.n_test = 64;
  cfg.model.conv1_channels = 8;
  cfg.model.conv2_channels = 16;
  cfg.model.gate_reduction = 8;
  cfg.model.projector_width = 32;
  cfg.model.use_gate = method == "hcd";
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

std::string strip_wall(const std::string& jsonl) {
  return std::regex_replace(jsonl, std::regex("\"wall_ms\":[^,]*,"), "");
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("run_experiment writes the full artifact set") {
  TempDir dir("hcd_runner_artifacts");
  ExperimentConfig cfg = tiny_run_config("hcd", 3);
  cfg.output_dir = dir.path.string();
  CHECK(run_experiment(cfg, nullptr) == 0);

  CHECK(fs::exists(dir.path / "config.resolved.ini"));
  CHECK(fs::exists(dir.path / "summary.txt"));
  CHECK(fs::exists(dir.path / "seed_0" / "steps.jsonl"));
  CHECK(fs::exists(dir.path / "seed_0" / "schedule.csv"));
  CHECK(fs::exists(dir.path / "seed_0" / "summary.txt"));
  CHECK(fs::exists(dir.path / "seed_0" / "checkpoint_last.bin"));
  CHECK(fs::exists(dir.path / "seed_0" / "checkpoint_final.bin"));

  // resolved config re-parses to the same run
  ExperimentConfig echo = ExperimentConfig::parse_file((dir.path / "config.resolved.ini").string());
  CHECK(echo.method == "hcd");
  CHECK(echo.epochs == 3);

  // schedule log covers every epoch
  std::string sched = slurp(dir.path / "seed_0" / "schedule.csv");
  CHECK(sched.find("epoch,vic,gram,class_mi,domain_mi,sparsity") == 0);
  CHECK(std::count(sched.begin(), sched.end(), '\n') == 4);  // header + 3 epochs
}

TEST_CASE("identical configs reproduce byte-identical summaries") {
  TempDir a("hcd_runner_det_a"), b("hcd_runner_det_b");
  ExperimentConfig cfg = tiny_run_config("hcd", 2);
  cfg.output_dir = a.path.string();
  run_experiment(cfg, nullptr);
  cfg.output_dir = b.path.string();
  run_experiment(cfg, nullptr);

  CHECK(slurp(a.path / "summary.txt") == slurp(b.path / "summary.txt"));
  CHECK(slurp(a.path / "seed_0" / "summary.txt") == slurp(b.path / "seed_0" / "summary.txt"));
  CHECK(slurp(a.path / "seed_0" / "checkpoint_final.bin") ==
        slurp(b.path / "seed_0" / "checkpoint_final.bin"));
  // step records identical up to wall-clock timing
  CHECK(strip_wall(slurp(a.path / "seed_0" / "steps.jsonl")) ==
        strip_wall(slurp(b.path / "seed_0" / "steps.jsonl")));
}

TEST_CASE("interrupted runs resume to the uninterrupted result") {
  TempDir full("hcd_runner_full"), resumed("hcd_runner_resumed");

  ExperimentConfig cfg4 = tiny_run_config("hcd", 4);
  cfg4.output_dir = full.path.string();
  run_experiment(cfg4, nullptr);

  // simulate an interruption after epoch 2: run to epoch 2, drop the summary
  ExperimentConfig cfg2 = tiny_run_config("hcd", 2);
  cfg2.output_dir = resumed.path.string();
  run_experiment(cfg2, nullptr);
  fs::remove(resumed.path / "seed_0" / "summary.txt");
  fs::remove(resumed.path / "summary.txt");

  ExperimentConfig cfg4b = tiny_run_config("hcd", 4);
  cfg4b.output_dir = resumed.path.string();
  run_experiment(cfg4b, nullptr);

  CHECK(slurp(full.path / "seed_0" / "summary.txt") ==
        slurp(resumed.path / "seed_0" / "summary.txt"));
  CHECK(slurp(full.path / "seed_0" / "checkpoint_final.bin") ==
        slurp(resumed.path / "seed_0" / "checkpoint_final.bin"));
  CHECK(strip_wall(slurp(full.path / "seed_0" / "steps.jsonl")) ==
        strip_wall(slurp(resumed.path / "seed_0" / "steps.jsonl")));
}

TEST_CASE("completed seeds are reused, not retrained") {
  TempDir dir("hcd_runner_reuse");
  ExperimentConfig cfg = tiny_run_config("erm", 2);
  cfg.output_dir = dir.path.string();
  run_experiment(cfg, nullptr);
  std::string first = slurp(dir.path / "summary.txt");
  auto t0 = fs::last_write_time(dir.path / "seed_0" / "checkpoint_final.bin");

  run_experiment(cfg, nullptr);
  CHECK(slurp(dir.path / "summary.txt") == first);
  CHECK(fs::last_write_time(dir.path / "seed_0" / "checkpoint_final.bin") == t0);
}

TEST_CASE("invalid configs fail before producing output") {
  TempDir dir("hcd_runner_invalid");
  ExperimentConfig cfg = tiny_run_config("hcd", 2);
  cfg.output_dir = dir.path.string();
  cfg.adam.lr = -1.0;
  CHECK_THROWS_WITH_AS(run_experiment(cfg, nullptr), doctest::Contains("optim.lr"), ValueError);
  CHECK_FALSE(fs::exists(dir.path));
}

TEST_CASE("output root env var prefixes relative dirs") {
  CHECK(resolve_output_root("/abs/path") == "/abs/path");
  setenv("HCD_OUTPUT_ROOT", "/tmp/hcd_root_test", 1);
  CHECK(resolve_output_root("rel") == "/tmp/hcd_root_test/rel");
  unsetenv("HCD_OUTPUT_ROOT");
  CHECK(resolve_output_root("rel") == "rel");
}

TEST_CASE("inspect_mask groups channels and renders csv") {
  ExperimentConfig cfg = tiny_run_config("hcd", 2);
  Rng rng(init_seed(3));
  HcdModel model = HcdModel::init(cfg.model_config(), rng);
  SynthSpec spec = cfg.data;
  spec.seed = data_seed(3);

  ChannelReport rep = inspect_mask(model, spec, 64, 32);
  CHECK(rep.mask_mean.size() == cfg.model.conv2_channels);
  CHECK(rep.cue_channels + rep.causal_channels == cfg.model.conv2_channels);
  // untrained random conv: some channels respond to the border cue
  CHECK(rep.cue_channels > 0);
  for (double m : rep.mask_mean) {
    CHECK(m > 0.0);
    CHECK(m < 1.0);
  }
  std::string csv = rep.to_csv();
  CHECK(csv.find("channel,mask_mean,cue_sensitivity,causal_sensitivity,group") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') ==
        static_cast<long>(cfg.model.conv2_channels) + 1);
}

TEST_CASE("step records serialize with fixed keys and parse back") {
  StepRecord r;
  r.epoch = 3;
  r.step = 17;
  r.cls = 0.25;
  r.total = 1.5;
  r.mask_mean = 0.5;
  std::string json = record_to_json(r);
  CHECK(json.find("\"epoch\":3") != std::string::npos);
  CHECK(json.find("\"step\":17") != std::string::npos);
  CHECK(json.find("\"cls\":0.25") != std::string::npos);
  CHECK(json.find("\"aborted\":false") != std::string::npos);
  CHECK(json.front() == '{');
  CHECK(json.back() == '}');

  r.aborted = true;
  r.abort_reason = "loss term 'cls' is non-finite";
  std::string aborted = record_to_json(r);
  CHECK(aborted.find("\"aborted\":true") != std::string::npos);
  CHECK(aborted.find("abort_reason") != std::string::npos);
}

TEST_CASE("mean and sample std") {
  double mean, sd;
  mean_and_std({2.0, 4.0, 6.0}, mean, sd);
  CHECK(mean == 4.0);
  CHECK(sd == doctest::Approx(2.0).epsilon(1e-12));
  mean_and_std({5.0}, mean, sd);
  CHECK(mean == 5.0);
  CHECK(sd == 0.0);
}

TEST_CASE("every summary metric is documented in the output schema") {
  TempDir dir("hcd_runner_schema");
  ExperimentConfig cfg = tiny_run_config("hcd", 2);
  cfg.output_dir = dir.path.string();
  run_experiment(cfg, nullptr);

  std::string schema = slurp(fs::path(HCD_SOURCE_DIR) / "docs" / "output_schema.md");
  auto documented = [&](std::string key) {
    // per-domain / per-class / per-seed keys are documented as patterns
    key = std::regex_replace(key, std::regex("_domain_[0-9]+"), "_domain_<d>");
    key = std::regex_replace(key, std::regex("_class_[0-9]+"), "_class_<c>");
    key = std::regex_replace(key, std::regex("^seed_[0-9]+_"), "seed_<k>_");
    return schema.find("`" + key + "`") != std::string::npos;
  };
  for (const fs::path p : {dir.path / "summary.txt", dir.path / "seed_0" / "summary.txt"}) {
    std::ifstream is(p);
    std::string line;
    while (std::getline(is, line)) {
      auto eq = line.find(" = ");
      REQUIRE(eq != std::string::npos);
      std::string key = line.substr(0, eq);
      CAPTURE(key);
      CHECK(documented(key));
    }
  }

  // jsonl field names too
  std::ifstream js(dir.path / "seed_0" / "steps.jsonl");
  std::string first;
  std::getline(js, first);
  std::regex field("\"([a-z_]+)\":");
  for (auto it = std::sregex_iterator(first.begin(), first.end(), field);
       it != std::sregex_iterator(); ++it) {
    std::string key = (*it)[1];
    CAPTURE(key);
    CHECK(schema.find("`" + key + "`") != std::string::npos);
  }
}
