#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "paste/checkpoint.hpp"
#include "paste/run_config.hpp"
#include "support.hpp"

using namespace paste;
namespace fs = std::filesystem;

TEST_CASE("checkpoint round trip") {
  auto cfg = paste::testing::tiny_config(Direction::OpinionFirst);
  const auto vocab = Vocabulary::from_keys({"<unk>", "<pad>", "food", "good", "."}, {"<unk>", "NN", "JJ"}, {"<unk>", "ROOT", "amod"});
  PasteModel<float> model(cfg, vocab.words.size(), vocab.pos.size(), vocab.dep.size());
  model.init_random(4);
  const auto path = fs::temp_directory_path() / "paste_roundtrip.ckpt";
  save_checkpoint(path, model, vocab, {{"epoch", 7}});
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.config == cfg);
  CHECK(ck.vocab == vocab);
  CHECK(ck.meta["epoch"] == 7);
  REQUIRE(ck.params.names() == model.params().names());
  for (const auto& name : model.params().names()) CHECK(ck.params.at(name).value == model.params().at(name).value);

  auto restored = ck.model();
  EncodedSentence s{{2, 3, 4}, {1, 2, 1}, {1, 2, 2}};
  CHECK(restored.run(s, 2)[1].sentiment == model.run(s, 2)[1].sentiment);
}

TEST_CASE("checkpoint corruption is detected") {
  const auto path = fs::temp_directory_path() / "paste_corrupt.ckpt";
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTACHECKPOINT";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  CHECK_THROWS_AS(load_checkpoint(fs::temp_directory_path() / "paste_missing.ckpt"), Error);

  auto cfg = paste::testing::tiny_config();
  const auto vocab = Vocabulary::from_keys({"<unk>", "<pad>", "a", "b"}, {"<unk>", "NN"}, {"<unk>", "ROOT"});
  PasteModel<float> model(cfg, vocab.words.size(), vocab.pos.size(), vocab.dep.size());
  save_checkpoint(path, model, vocab);
  fs::resize_file(path, fs::file_size(path) - 8);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
}

TEST_CASE("config mismatch lists every disagreeing field") {
  const auto cfg = paste::testing::tiny_config();
  CHECK_NOTHROW(check_config_matches(cfg, {{"d_h", 8}, {"direction", "af"}}));
  try {
    check_config_matches(cfg, {{"d_h", 16}, {"d_p", 4}});
    FAIL("expected mismatch");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("d_h") != std::string::npos);
    CHECK(msg.find("d_p") != std::string::npos);
  }
}

TEST_CASE("key = value parsing") {
  std::istringstream in("# comment\nlr = 0.01\n batch-size=4  # trailing\n\ndirection = of\n");
  const auto kv = parse_key_values(in);
  CHECK(kv.at("lr") == "0.01");
  CHECK(kv.at("batch_size") == "4");
  CHECK(kv.at("direction") == "of");
  std::istringstream bad("lr 0.01\n");
  CHECK_THROWS_WITH_AS(parse_key_values(bad), doctest::Contains("line 1"), Error);
}

TEST_CASE("settings resolution") {
  SUBCASE("defaults") {
    const auto s = resolve_settings({});
    CHECK(s.seeds == default_seeds());
    CHECK(s.train.runs == 5);
    CHECK(s.model == ModelConfig{});
    CHECK(s.train.learning_rate == 1e-3);
    CHECK(s.train.weight_decay == 1e-5);
    CHECK(s.train.epochs == 100);
    CHECK(s.train.batch_size == 10);
  }
  SUBCASE("later layers win") {
    const auto s = resolve_settings({{{"lr", "0.5"}, {"epochs", "3"}}, {{"lr", "0.25"}}});
    CHECK(s.train.learning_rate == 0.25);
    CHECK(s.train.epochs == 3);
  }
  SUBCASE("explicit seed") {
    const auto s = resolve_settings({{{"seed", "100"}, {"runs", "3"}}});
    CHECK(s.seeds == std::vector<std::uint64_t>{100, 101, 102});
  }
  SUBCASE("seed list sets runs") {
    const auto s = resolve_settings({{{"seeds", "4, 5"}}});
    CHECK(s.train.runs == 2);
    CHECK_THROWS_AS(resolve_settings({{{"seeds", "4,5"}, {"runs", "3"}}}), Error);
  }
  SUBCASE("more runs than default seeds") {
    const auto s = resolve_settings({{{"runs", "7"}}});
    CHECK(s.seeds.size() == 7);
    CHECK(s.seeds[5] == 1005);
  }
  SUBCASE("invalid values") {
    CHECK_THROWS_AS(resolve_settings({{{"lr", "-1"}}}), Error);
    CHECK_THROWS_AS(resolve_settings({{{"lr", "fast"}}}), Error);
    CHECK_THROWS_AS(resolve_settings({{{"d_h", "7"}}}), Error);
    CHECK_THROWS_AS(resolve_settings({{{"bogus", "1"}}}), Error);
    CHECK_THROWS_AS(resolve_settings({{{"direction", "sideways"}}}), Error);
  }
  SUBCASE("snapshot reproduces the settings") {
    const auto s = resolve_settings({{{"d_h", "64"}, {"dropout", "0.2"}, {"max_steps", "4"}, {"seed", "9"}}});
    std::istringstream in(s.to_key_values());
    const auto again = resolve_settings({parse_key_values(in)});
    CHECK(again.model == s.model);
    CHECK(again.seeds == s.seeds);
    CHECK(again.train.to_json() == s.train.to_json());
    CHECK(again.to_json() == s.to_json());
  }
}

TEST_CASE("median") {
  CHECK(median({0.3, 0.1, 0.2}) == 0.2);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK(median({0.51, 0.49, 0.5, 0.52, 0.48}) == 0.5);
  CHECK_THROWS_AS(median({}), Error);
}
