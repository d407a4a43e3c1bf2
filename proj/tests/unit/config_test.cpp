#include <doctest.h>

#include "helpers.hpp"
#include "picknet/error.hpp"
#include "picknet/train/config_file.hpp"
#include "picknet/train/trainer.hpp"

using namespace picknet::train;

TEST_CASE("config file subset") {
  const auto t = parse_config(R"(# top comment
name = "run one"   # trailing comment
seed = 42

[train]
learning_rate = 5e-4
epochs = 3
optimizer = 'sgd'
shuffle = true
snr = [10, 20.5]

[simulate.extra]
n = -7
)");
  CHECK(t.at("name").as_string("name") == "run one");
  CHECK(t.at("seed").as_uint("seed") == 42);
  CHECK(t.at("train.learning_rate").as_double("lr") == 5e-4);
  CHECK(t.at("train.epochs").as_int("epochs") == 3);
  CHECK(t.at("train.epochs").as_double("epochs") == 3.0);
  CHECK(t.at("train.optimizer").as_string("o") == "sgd");
  CHECK(t.at("train.shuffle").as_bool("s"));
  CHECK(t.at("train.snr").as_double_list("snr") == std::vector<double>{10.0, 20.5});
  CHECK(t.at("simulate.extra.n").as_int("n") == -7);
  CHECK(t.at("train.epochs").line == 7);
}

TEST_CASE("malformed config files are rejected with the line number") {
  for (const char* text : {"x = ", "[train\nx = 1", "x = 1\nx = 2", "bad key = 1", "x = \"open", "x = [1, 2",
                           "x = 1 2", "= 3", "x = tru"}) {
    try {
      parse_config(text);
      FAIL("accepted: " << text);
    } catch (const picknet::Error& e) {
      CHECK(e.code() == picknet::ErrorCode::kInvalidConfig);
      CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
  }
}

TEST_CASE("typed access checks the value kind") {
  const auto t = parse_config("a = \"text\"\nb = -1\nc = 1.5");
  CHECK_THROWS_AS(t.at("a").as_double("a"), picknet::Error);
  CHECK_THROWS_AS(t.at("b").as_uint("b"), picknet::Error);
  CHECK_THROWS_AS(t.at("c").as_int("c"), picknet::Error);
  CHECK_THROWS_AS(t.at("c").as_bool("c"), picknet::Error);
}

TEST_CASE("overrides and merging") {
  auto base = parse_config("epochs = 1\noptimizer = \"adam\"");
  const auto over = parse_overrides({"epochs=4", "optimizer=sgd", "train.seed = 9"});
  CHECK(over.at("optimizer").as_string("o") == "sgd");
  merge_config(base, over);
  CHECK(base.at("epochs").as_int("e") == 4);
  CHECK(base.at("optimizer").as_string("o") == "sgd");
  CHECK(base.at("train.seed").as_uint("s") == 9);
  CHECK_THROWS_AS(parse_overrides({"novalue"}), picknet::Error);
  CHECK_THROWS_AS(parse_overrides({"bad key=1"}), picknet::Error);
}

TEST_CASE("loading from disk") {
  testing::TempDir dir("cfg");
  CHECK_THROWS_AS(load_config(dir / "missing.toml"), picknet::Error);
  {
    std::FILE* f = std::fopen((dir / "a.toml").c_str(), "w");
    std::fputs("[eval]\nsubsample_n = 1\n", f);
    std::fclose(f);
  }
  CHECK(load_config(dir / "a.toml").at("eval.subsample_n").as_uint("n") == 1);
}

TEST_CASE("training config serialisation") {
  TrainConfig c;
  c.epochs = 3;
  c.optimizer = OptimizerKind::kSgd;
  c.data_manifest = "x/manifest.jsonl";
  const auto j = to_json(c);
  CHECK(j.find("\"optimizer\":\"sgd\"") != std::string::npos);
  CHECK(j.find("\"epochs\":3") != std::string::npos);
  CHECK(j.find("\"data_manifest\":\"x/manifest.jsonl\"") != std::string::npos);
}
