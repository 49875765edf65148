#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "modfnn/training.hpp"

namespace modfnn {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitTraining = 4,
  kExitEvaluation = 5,
};

struct RunConfig {
  std::filesystem::path dataset;
  int labels = 0;  // 0: inferred from the data
  int k = 1;
  int r = 1;
  std::vector<std::string> features;  // empty: the whole catalog
  int model = 0;                      // Model-1..6 preset at evaluation, 0: all features
  TrainingPlan plan;
  int protocol_m = 1;
  int eval_batches = 10;
  std::filesystem::path out = "run";
};

// `key = value` lines; '#' starts a comment. Relative dataset and output
// paths resolve against `base_dir`, as does the default output directory.
// Throws ConfigError on unknown keys or bad values.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});

// Entry point of the `modfnn` tool.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace modfnn
