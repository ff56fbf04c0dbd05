#include <doctest.h>

#include "hcd/config.hpp"
#include "hcd/metrics.hpp"

using namespace hcd;

TEST_CASE("defaults mirror the published training setup") {
  ExperimentConfig cfg;
  CHECK(cfg.adam.lr == 2e-4);
  CHECK(cfg.batch_size == 32);
  CHECK(cfg.model.dropout_p == 0.2);
  CHECK(cfg.model.gate_reduction == 16);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  CHECK(cfg.epochs == 20);
  CHECK(cfg.vicreg.lambda_sim == 5.0);
  CHECK(cfg.vicreg.lambda_std == 5.0);
  CHECK(cfg.vicreg.lambda_cov == 1.0);
  CHECK(cfg.vicreg.gamma == 0.25);
  CHECK(cfg.data.rho_train == 0.95);
  CHECK(cfg.data.rho_test == 0.05);
  CHECK(cfg.schedule.domain_mi.initial == 0.5);
  CHECK(cfg.schedule.domain_mi.target == 5.0);
  CHECK(cfg.schedule.domain_mi.activation_epoch == 1);
  CHECK(cfg.schedule.sparsity.initial == 0.005);
  CHECK(cfg.schedule.sparsity.target == 0.1);
  CHECK(cfg.schedule.sparsity.activation_epoch == 2);
  CHECK(cfg.stylemix_epsilon == 1e-6);
}

TEST_CASE("config round-trips exactly") {
  ExperimentConfig cfg;
  cfg.method = "erm";
  cfg.seeds = {3, 7, 9};
  cfg.epochs = 12;
  cfg.adam.lr = 3.25e-4;
  cfg.data.rho_train = 0.875;
  cfg.schedule.sparsity = TermSchedule{0.01, 0.25, 3, RampShape::linear};

  std::string text = cfg.serialize();
  ExperimentConfig back = ExperimentConfig::parse_string(text);
  CHECK(back.serialize() == text);
  CHECK(back.method == "erm");
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.adam.lr == cfg.adam.lr);
  CHECK(back.data.rho_train == cfg.data.rho_train);
  CHECK(back.schedule.sparsity.target == 0.25);
  CHECK(back.schedule.sparsity.shape == RampShape::linear);
}

TEST_CASE("seed syntax accepts ranges and lists") {
  auto ranged = ExperimentConfig::parse_string("[experiment]\nseeds = 2..5\n");
  CHECK(ranged.seeds == std::vector<std::uint64_t>{2, 3, 4, 5});
  auto listed = ExperimentConfig::parse_string("[experiment]\nseeds = 1, 4, 9\n");
  CHECK(listed.seeds == std::vector<std::uint64_t>{1, 4, 9});
}

TEST_CASE("unknown keys are rejected with their full name") {
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[optim]\nlrr = 0.1\n"),
                       doctest::Contains("optim.lrr"), ValueError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[nowhere]\nx = 1\n"),
                       doctest::Contains("nowhere.x"), ValueError);
}

TEST_CASE("invalid values name the offending field") {
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[optim]\nlr = -0.5\n"),
                       doctest::Contains("optim.lr"), ValueError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[experiment]\nmethod = sgd\n"),
                       doctest::Contains("method"), ValueError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[optim]\nbatch_size = 1\n"),
                       doctest::Contains("batch_size"), ValueError);
}

TEST_CASE("paper-faithful mode switches the documented deviations off") {
  ExperimentConfig cfg;
  TrainFlags normal = cfg.train_flags();
  CHECK(normal.grad_clip_enabled);
  CHECK(normal.inverted_dropout_scaling);

  cfg.paper_faithful = true;
  TrainFlags faithful = cfg.train_flags();
  CHECK_FALSE(faithful.grad_clip_enabled);
  CHECK_FALSE(faithful.inverted_dropout_scaling);

  cfg.paper_faithful = false;
  cfg.grad_clip = 0.0;  // explicit disable
  CHECK_FALSE(cfg.train_flags().grad_clip_enabled);
}

TEST_CASE("method selects the gate") {
  ExperimentConfig cfg;
  cfg.method = "hcd";
  CHECK(cfg.model_config().use_gate);
  cfg.method = "erm";
  CHECK_FALSE(cfg.model_config().use_gate);
  CHECK(cfg.model_config().classes == cfg.data.classes);
}

TEST_CASE("comments and blank lines are tolerated") {
  auto cfg = ExperimentConfig::parse_string(
      "# leading comment\n\n[optim]\nlr = 1e-3  # inline\n; semicolon comment\n");
  CHECK(cfg.adam.lr == 1e-3);
}

TEST_CASE("format_double survives a round trip") {
  for (double v : {0.1, 2e-4, 1.0 / 3.0, 123456.789, 1e-300}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}
