#include <doctest.h>

#include <filesystem>

#include "modfnn/cli.hpp"
#include "modfnn/error.hpp"
#include "modfnn/file_util.hpp"
#include "test_util.hpp"

using namespace modfnn;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "modfnn");
  return run_cli(args);
}

// Small synthetic run directory: 4 labels of 16x16 images.
struct Workspace {
  TempDir dir{"cli"};
  fs::path data = dir.path() / "data.fnb";
  fs::path config = dir.path() / "run.cfg";
  fs::path out = dir.path() / "run";

  explicit Workspace(const std::string& extra = "") {
    REQUIRE(run({"synth", "--output", data.string(), "--labels", "4", "--count", "48", "--size", "16"}) == 0);
    write_file_atomic(config, "dataset = data.fnb\nout = run\nk = 2\nr = 1\nfeatures = R, G, B\nhidden = 16\n"
                              "sgd.max_epochs = 60\nsgd.learning_rate = 0.1\n" + extra);
  }
  std::vector<std::string> with_config(std::vector<std::string> args) const {
    args.push_back("--config");
    args.push_back(config.string());
    return args;
  }
};

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_run_config(
      "# comment\ndataset = d.fnb\nlabels = 8\nk = 2\nr = 3\nfeatures = R, Y,Z\nmode = S'\n"
      "sgd.batch_size = 4\ngdt.lambda_step = 0.5\nhidden = 32, 8\nprotocol_m = 3\n",
      "/base");
  CHECK(c.dataset == fs::path("/base/d.fnb"));
  CHECK(c.labels == 8);
  CHECK(c.r == 3);
  CHECK(c.features == std::vector<std::string>{"R", "Y", "Z"});
  CHECK(c.plan.mode == TrainingMode::SPrime);
  CHECK(c.plan.sgd.batch_size == 4);
  CHECK(c.plan.gdt.lambda_step == 0.5);
  CHECK(c.plan.hidden == std::vector<int>{32, 8});
  CHECK(c.protocol_m == 3);
  CHECK_THROWS_AS(parse_run_config("colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("k = two\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("just words\n"), ConfigError);
}

TEST_CASE("catalog and argument errors") {
  TempDir dir("cat");
  CHECK(run({"catalog", "--output", (dir.path() / "cat.txt").string()}) == 0);
  CHECK(read_file(dir.path() / "cat.txt").find("Y 0.2126 0.7152 0.0722\n") != std::string::npos);
  CHECK(run({}) == kExitConfig);
  CHECK(run({"bogus"}) == kExitConfig);
  CHECK(run({"evaluate", "--scope", "nothing"}) == kExitConfig);
  CHECK(run({"train", "--protocol-m", "2"}) == kExitConfig);
}

TEST_CASE("end-to-end run") {
  Workspace ws;
  CHECK(run(ws.with_config({"modularize"})) == 0);
  CHECK(fs::exists(ws.out / "batches" / "f03_m002_s01.fvb"));
  const std::string cache = read_file(ws.out / "batches" / "f01_m001_s01.fvb");
  CHECK(run(ws.with_config({"modularize"})) == 0);
  CHECK(read_file(ws.out / "batches" / "f01_m001_s01.fvb") == cache);

  CHECK(run(ws.with_config({"train"})) == 0);
  const std::string manifest = read_file(ws.out / "model" / "manifest.txt");
  CHECK(manifest.find("complete = true\n") != std::string::npos);
  CHECK(manifest.find("Failed") == std::string::npos);
  CHECK(fs::exists(ws.out / "model" / "conflicts.txt"));

  CHECK(run(ws.with_config({"evaluate", "--scope", "training"})) == 0);
  CHECK(fs::exists(ws.out / "reports" / "training_eval_T_custom.txt"));
  CHECK(run(ws.with_config({"evaluate", "--scope", "model", "--protocol-m", "3"})) == kExitConfig);
  CHECK(run(ws.with_config({"evaluate", "--scope", "model", "--model", "1"})) == 0);
  const std::string report = read_file(ws.out / "reports" / "model_T_custom_p3_m1.txt");
  CHECK(report.find("protocol = top1\n") != std::string::npos);
  CHECK(report.find("accuracy = ") != std::string::npos);
  CHECK(fs::exists(ws.out / "reports" / "confusion_model_T_custom_p3_m1.csv"));

  CHECK(run(ws.with_config({"wheel", "--cell", "G,2,1"})) == 0);
  CHECK(run(ws.with_config({"wheel", "--cell", "3,1,1"})) == 0);
  const std::string svg = read_file(ws.out / "wheel" / "wheel_T_custom_G_m2_s1.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(fs::exists(ws.out / "wheel" / "wheel_T_custom_G_m2_s1.csv"));
  CHECK(fs::exists(ws.out / "wheel" / "wheel_T_custom_B_m1_s1.svg"));
  CHECK(run(ws.with_config({"wheel", "--cell", "Q,1,1"})) == kExitConfig);
  CHECK(run(ws.with_config({"wheel", "--cell", "R,3,1"})) == kExitConfig);

  fs::remove(ws.out / "model" / "weights" / "f02_m001_s01.fnn");
  CHECK(run(ws.with_config({"evaluate", "--scope", "model"})) == kExitEvaluation);
  CHECK(run(ws.with_config({"evaluate", "--scope", "training"})) == kExitEvaluation);
}

TEST_CASE("expanded protocol report") {
  TempDir dir("m3");
  const fs::path data = dir.path() / "d.fnb";
  REQUIRE(run({"synth", "--output", data.string(), "--labels", "6", "--count", "36", "--size", "16"}) == 0);
  write_file_atomic(dir.path() / "c.cfg", "dataset = d.fnb\nk = 1\nfeatures = R, G, B\nhidden = 16\n"
                                          "sgd.max_epochs = 60\nmode = S\n");
  const std::vector<std::string> cfg{"--config", (dir.path() / "c.cfg").string(), "--out",
                                     (dir.path() / "o").string()};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), cfg.begin(), cfg.end());
    return a;
  };
  REQUIRE(run(with({"modularize"})) == 0);
  REQUIRE(run(with({"train"})) == 0);
  CHECK(run(with({"evaluate", "--scope", "model", "--protocol-m", "3"})) == 0);
  const std::string report = read_file(dir.path() / "o" / "reports" / "model_S_custom_p3_m3.txt");
  CHECK(report.find("protocol = expanded-top3\n") != std::string::npos);
}

TEST_CASE("validation failures write nothing") {
  Workspace ws("k = 3\n");
  CHECK(run(ws.with_config({"modularize"})) == kExitConfig);
  CHECK_FALSE(fs::exists(ws.out));

  Workspace missing("dataset = nowhere.fnb\n");
  CHECK(run(missing.with_config({"modularize"})) == kExitData);
  CHECK_FALSE(fs::exists(missing.out));

  Workspace unknown("features = R, Nope\n");
  CHECK(run(unknown.with_config({"modularize"})) == kExitConfig);
  CHECK_FALSE(fs::exists(unknown.out));

  Workspace typo("sgd.speed = 3\n");
  CHECK(run(typo.with_config({"modularize"})) == kExitConfig);

  Workspace no_batches;
  CHECK(run(no_batches.with_config({"train"})) == kExitData);
  CHECK(run(no_batches.with_config({"evaluate"})) == kExitEvaluation);
}

TEST_CASE("diverging cells give a partial model") {
  Workspace ws("sgd.learning_rate = 1e300\nsgd.threshold = 1\n");
  REQUIRE(run(ws.with_config({"modularize"})) == 0);
  CHECK(run(ws.with_config({"train"})) == kExitTraining);
  const std::string manifest = read_file(ws.out / "model" / "manifest.txt");
  CHECK(manifest.find("complete = false\n") != std::string::npos);
  CHECK(manifest.find(" Failed ") != std::string::npos);
  CHECK(run(ws.with_config({"evaluate", "--scope", "model"})) == kExitEvaluation);
}

TEST_CASE("conflicting duplicate is reported") {
  TempDir dir("dup");
  const fs::path data = dir.path() / "d.fnb";
  REQUIRE(run({"synth", "--output", data.string(), "--labels", "2", "--count", "20", "--size", "16",
               "--conflict"}) == 0);
  write_file_atomic(dir.path() / "c.cfg", "dataset = d.fnb\nk = 1\nfeatures = R, G\nhidden = 16\n");
  const std::vector<std::string> cfg{"--config", (dir.path() / "c.cfg").string()};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), cfg.begin(), cfg.end());
    return a;
  };
  REQUIRE(run(with({"modularize"})) == 0);
  CHECK(run(with({"train"})) == 0);  // Inconsistent cells still count as completed
  const fs::path out = dir.path() / "run";
  const std::string manifest = read_file(out / "model" / "manifest.txt");
  CHECK(manifest.find("Inconsistent") != std::string::npos);
  const std::string conflicts = read_file(out / "model" / "conflicts.txt");
  CHECK(conflicts.find("img000000 img000020") != std::string::npos);
}
