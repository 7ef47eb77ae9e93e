#include <doctest.h>

#include <nlohmann/json.hpp>

#include <fstream>

#include "helpers.hpp"
#include "vreid/config.hpp"

using namespace vreid;
using nlohmann::json;

TEST_CASE("default config round-trips through json") {
  json j = default_config_json();
  RunConfig cfg = config_from_json(j);
  cfg.validate();
  CHECK(config_to_json(cfg) == j);
  CHECK(cfg.clip_len == 4);
  CHECK(cfg.batch.num_ids == 8);
  CHECK(cfg.batch.clips_per_id == 4);
  CHECK(cfg.transform.height == 244);
  CHECK(cfg.transform.width == 112);
  CHECK(cfg.loss_weights.beta == doctest::Approx(0.00005));
  CHECK(cfg.loss_weights.epsilon == doctest::Approx(0.1));
  CHECK(cfg.rll.alpha == doctest::Approx(2.0));
  CHECK(cfg.rll.margin == doctest::Approx(1.3));
  CHECK(cfg.schedule.base_lr == doctest::Approx(0.00035));
  CHECK(cfg.schedule.total_epochs == 120);
  CHECK(cfg.train.val_cadence == 10);
}

TEST_CASE("overrides hit nested keys and reject unknown ones") {
  json j = default_config_json();
  apply_override(j, "schedule.base_lr=0.0007");
  apply_override(j, "batch.num_ids=6");
  apply_override(j, "dataset.layout=mars");
  apply_override(j, "head.bnneck_before_dml=false");
  apply_override(j, "schedule.decay_epochs=[30,60]");
  RunConfig cfg = config_from_json(j);
  CHECK(cfg.schedule.base_lr == doctest::Approx(0.0007));
  CHECK(cfg.batch.num_ids == 6);
  CHECK(cfg.dataset.layout == "mars");
  CHECK_FALSE(cfg.head.bnneck_before_dml);
  CHECK(cfg.schedule.decay_epochs == std::vector<int>{30, 60});

  CHECK_THROWS_AS(apply_override(j, "schedule.bogus=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "nope.base_lr=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "missing the equals sign"), ConfigError);
}

TEST_CASE("config files merge over defaults and unknown keys fail") {
  testutil::TempDir dir("cfg");
  const auto path = dir.path() / "run.json";
  {
    std::ofstream out(path);
    out << R"({"clip_len": 8, "loss": {"rll": {"margin": 0.04}}})";
  }
  RunConfig cfg = load_config(path);
  CHECK(cfg.clip_len == 8);
  CHECK(cfg.rll.margin == doctest::Approx(0.04));
  CHECK(cfg.rll.alpha == doctest::Approx(2.0));  // default retained

  const auto bad = dir.path() / "bad.json";
  {
    std::ofstream out(bad);
    out << R"({"clip_length": 8})";
  }
  CHECK_THROWS_AS(load_config(bad), ConfigError);

  CHECK_THROWS_AS(load_config(dir.path() / "missing.json"), IoError);
}

TEST_CASE("validation catches inconsistent settings") {
  RunConfig cfg = config_from_json(default_config_json());
  cfg.clip_len = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = config_from_json(default_config_json());
  cfg.rll.margin = 5.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  cfg = config_from_json(default_config_json());
  cfg.transform.flip_prob = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
