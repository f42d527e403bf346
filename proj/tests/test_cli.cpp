#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "paste/commands.hpp"
#include "support.hpp"

using namespace paste;
using paste::testing::fixture;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "paste");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("paste_cli_" + name);
  fs::remove_all(p);
  return p;
}

const std::vector<std::string> kTiny{"--d-w", "8", "--d-pos", "4", "--d-dep", "4", "--d-h", "8", "--d-p", "8"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

}  // namespace

TEST_CASE("stats command") {
  const auto out = scratch("stats");
  const auto r = cli({"stats", "--data-dir", fixture("toy_published").string(), "--out-dir", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("14lap") != std::string::npos);
  CHECK(r.out.find("20.00%") != std::string::npos);
  std::ifstream j(out / "stats.json");
  const auto stats = nlohmann::json::parse(j);
  CHECK(stats["datasets"]["14lap"]["train"]["POS"] == 19);
  CHECK(stats["overlap_fraction"] == doctest::Approx(0.2));

  const auto empty = scratch("empty_data");
  fs::create_directories(empty);
  CHECK(cli({"stats", "--data-dir", empty.string(), "--out-dir", out.string()}).code != 0);
  CHECK(cli({"stats", "--data-dir", (empty / "missing").string()}).code != 0);
}

TEST_CASE("data directory falls back to the environment") {
  const auto out = scratch("env");
  ::setenv("PASTE_DATA_DIR", fixture("toy_published").string().c_str(), 1);
  const auto r = cli({"stats", "--out-dir", out.string()});
  ::unsetenv("PASTE_DATA_DIR");
  CHECK(r.code == 0);
}

TEST_CASE("configuration errors exit before training") {
  const auto r = cli({"train", "--lr", "-1", "--data-dir", fixture("toy_annotated").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("learning rate") != std::string::npos);
  CHECK(cli({"train", "--direction", "up"}).code == 2);
  CHECK(cli({"bogus"}).code != 0);
}

TEST_CASE("train, eval and predict smoke run") {
  const auto out = scratch("train");
  const auto cfg = out / "run.cfg";
  fs::create_directories(out);
  {
    std::ofstream f(cfg);
    f << "data_dir = " << fixture("toy_annotated").string() << "\nepochs = 2\nbatch_size = 5\n";
  }
  const auto r = cli(with_tiny({"train", "--config", cfg.string(), "--runs", "1", "--direction", "af", "--out-dir",
                                out.string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "config.resolved"));
  std::ifstream mf(out / "manifest.json");
  const auto manifest = nlohmann::json::parse(mf);
  CHECK(manifest["runs"].size() == 1);
  CHECK(manifest["seeds"] == std::vector<int>{13});
  CHECK(manifest["config"]["train"]["epochs"] == 2);
  const std::string ckpt = manifest["runs"][0]["checkpoint"];
  REQUIRE(fs::exists(ckpt));

  const auto e = cli({"eval", "--data-dir", fixture("toy_annotated").string(), "--checkpoint", ckpt, "--split", "dev",
                      "--out-dir", out.string()});
  CHECK(e.code == 0);
  CHECK(e.out.find("Triplet") != std::string::npos);
  std::ifstream ej(out / "eval_14lap_dev.json");
  CHECK(validate_report_json(nlohmann::json::parse(ej)).empty());

  const auto mismatch = cli({"eval", "--data-dir", fixture("toy_annotated").string(), "--checkpoint", ckpt,
                             "--d-h", "16", "--out-dir", out.string()});
  CHECK(mismatch.code == 1);
  CHECK(mismatch.err.find("d_h") != std::string::npos);

  const auto p = cli({"predict", "--checkpoint", ckpt, "--input", fixture("toy_annotated/14lap/dev.jsonl").string()});
  REQUIRE(p.code == 0);
  std::istringstream lines(p.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("predicted"));
    CHECK(j.contains("triplets"));
    ++count;
  }
  CHECK(count == 10);
}

TEST_CASE("ablation settings and report") {
  const auto base = resolve_settings({});
  const auto no_tags = ablated_settings(base, Ablation::NoPosDep);
  CHECK(no_tags.model.d_pos == 0);
  CHECK(no_tags.model.d_dep == 0);
  CHECK(no_tags.to_json()["model"]["d_pos"] == 0);
  CHECK(ablated_settings(base, Ablation::RandomOrder).train.random_target_order);
  CHECK(parse_ablation("random_order") == Ablation::RandomOrder);
  CHECK_THROWS_AS(parse_ablation("dropout"), Error);

  const auto out = scratch("ablate");
  const auto r = cli(with_tiny({"ablate", "--ablation", "random_order", "--data-dir",
                                fixture("toy_annotated").string(), "--epochs", "1", "--runs", "1", "--out-dir",
                                out.string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("%F1 drop") != std::string::npos);
  CHECK(r.out.find("w/ Random") != std::string::npos);
  std::ifstream j(out / "ablation.json");
  const auto report = nlohmann::json::parse(j);
  CHECK(report["per_run"].size() == 1);
  CHECK(report.contains("median_delta_f1"));
}

TEST_CASE("identical settings give a zero delta") {
  auto s = resolve_settings({{{"data_dir", fixture("toy_annotated").string()},
                              {"epochs", "2"},
                              {"runs", "1"},
                              {"d_w", "8"},
                              {"d_pos", "4"},
                              {"d_dep", "4"},
                              {"d_h", "8"},
                              {"d_p", "8"}}});
  std::ostringstream sink;
  s.out_dir = scratch("control_a");
  const auto a = cmd_train(s, sink);
  s.out_dir = scratch("control_b");
  const auto b = cmd_train(s, sink);
  AblationReport report;
  report.baseline = a;
  report.ablated = b;
  CHECK(report.deltas() == std::vector<double>{0.0});
}

TEST_CASE("manifest medians are element-wise") {
  RunManifest m;
  for (long tp : {3, 1, 2}) {
    RunRecord r;
    r.test = Prf{tp, 4, 4};
    r.dev = Prf{tp, 5, 5};
    m.runs.push_back(r);
  }
  const auto med = m.medians();
  CHECK(med["test_f1"] == 0.5);
  CHECK(med["dev_p"] == 0.4);
}
