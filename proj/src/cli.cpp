#include "modfnn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>
#include <sstream>

#include "modfnn/dataset_io.hpp"
#include "modfnn/decimal.hpp"
#include "modfnn/error.hpp"
#include "modfnn/evaluation.hpp"
#include "modfnn/file_util.hpp"
#include "modfnn/voting.hpp"

namespace modfnn {
namespace {

namespace fs = std::filesystem;

// Failure with an explicit exit code.
class CommandError : public Error {
 public:
  CommandError(int code, const std::string& what) : Error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
}

double to_real(const std::string& key, const std::string& v) {
  try {
    return parse_real(v);
  } catch (const DataError&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    std::istringstream words(item);
    for (std::string w; words >> w;) out.push_back(w);
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir) {
  RunConfig cfg;
  if (!base_dir.empty()) cfg.out = base_dir / cfg.out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected `key = value`");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string v = trim(std::string_view(line).substr(eq + 1));
    auto& plan = cfg.plan;
    if (key == "dataset") {
      cfg.dataset = fs::path(v).is_absolute() || base_dir.empty() ? fs::path(v) : base_dir / v;
    } else if (key == "out") {
      cfg.out = fs::path(v).is_absolute() || base_dir.empty() ? fs::path(v) : base_dir / v;
    } else if (key == "labels") {
      cfg.labels = to_int(key, v);
    } else if (key == "k") {
      cfg.k = to_int(key, v);
    } else if (key == "r") {
      cfg.r = to_int(key, v);
    } else if (key == "features") {
      cfg.features = v == "all" ? std::vector<std::string>{} : split_list(v);
    } else if (key == "model") {
      cfg.model = to_int(key, v);
    } else if (key == "arch") {
      plan.arch_tag = v;
    } else if (key == "hidden") {
      plan.hidden.clear();
      for (const auto& h : split_list(v)) plan.hidden.push_back(to_int(key, h));
    } else if (key == "mode") {
      plan.mode = parse_training_mode(v);
    } else if (key == "decimals") {
      plan.decimals = to_int(key, v);
    } else if (key == "seed") {
      plan.seed = static_cast<std::uint64_t>(to_int(key, v));
    } else if (key == "workers") {
      plan.workers = to_int(key, v);
    } else if (key == "protocol_m") {
      cfg.protocol_m = to_int(key, v);
    } else if (key == "eval_batches") {
      cfg.eval_batches = to_int(key, v);
    } else if (key == "sgd.learning_rate") {
      plan.sgd.learning_rate = to_real(key, v);
    } else if (key == "sgd.decay") {
      plan.sgd.decay = to_real(key, v);
    } else if (key == "sgd.decay_interval") {
      plan.sgd.decay_interval = to_int(key, v);
    } else if (key == "sgd.batch_size") {
      plan.sgd.batch_size = to_int(key, v);
    } else if (key == "sgd.max_epochs") {
      plan.sgd.max_epochs = to_int(key, v);
    } else if (key == "sgd.threshold") {
      plan.sgd.threshold = to_real(key, v);
    } else if (key == "sgd.continue_fraction") {
      plan.continue_fraction = to_real(key, v);
    } else if (key == "gdt.lambda_step") {
      plan.gdt.lambda_step = to_real(key, v);
    } else if (key == "gdt.inner_steps") {
      plan.gdt.inner_steps = to_int(key, v);
    } else if (key == "gdt.learning_rate") {
      plan.gdt.learning_rate = to_real(key, v);
    } else if (key == "gdt.amplification") {
      plan.gdt.amplification = to_real(key, v);
    } else if (key == "gdt.patience") {
      plan.gdt.patience = to_int(key, v);
    } else if (key == "gdt.max_tunnels") {
      plan.gdt.max_tunnels = to_int(key, v);
    } else if (key == "gdt.max_stages") {
      plan.gdt.max_stages = static_cast<std::size_t>(to_int(key, v));
    } else if (key == "gdt.max_seconds") {
      plan.gdt.max_seconds = to_real(key, v);
    } else if (key == "gdt.conflict_decimals") {
      plan.gdt.conflict_decimals = to_int(key, v);
    } else {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

namespace {

struct Overrides {
  std::string config;
  std::string dataset;
  std::string mode;
  std::string out;
  std::optional<int> model;
  std::optional<int> protocol_m;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

void add_common_options(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "Run configuration file (key = value)");
  sub->add_option("--dataset", o.dataset, "Dataset: FNB1 tensor file or CSV manifest");
  sub->add_option("--mode", o.mode, "Training mode: S, S' or T");
  sub->add_option("--model", o.model, "Featured model preset 1..6")->check(CLI::Range(1, 6));
  sub->add_option("--protocol-m", o.protocol_m, "Candidates per FNN (1 or 3)")
      ->check(CLI::IsMember({1, 3}));
  sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "Base seed");
  sub->add_option("--out", o.out, "Output directory");
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig cfg;
  if (!o.config.empty()) {
    std::string text;
    try {
      text = read_file(o.config);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    cfg = parse_run_config(text, fs::path(o.config).parent_path());
  }
  if (!o.dataset.empty()) cfg.dataset = o.dataset;
  if (!o.mode.empty()) cfg.plan.mode = parse_training_mode(o.mode);
  if (!o.out.empty()) cfg.out = o.out;
  if (o.model) cfg.model = *o.model;
  if (o.protocol_m) cfg.protocol_m = *o.protocol_m;
  if (o.workers) cfg.plan.workers = *o.workers;
  if (o.seed) cfg.plan.seed = *o.seed;

  if (cfg.k < 1 || cfg.r < 1) throw ConfigError("k and r must be >= 1");
  if (cfg.model != 0) preset_feature_count(cfg.model);
  if (cfg.protocol_m < 1) throw ConfigError("protocol m must be >= 1");
  if (cfg.eval_batches < 1) throw ConfigError("eval_batches must be >= 1");
  if (cfg.plan.decimals < 1) throw ConfigError("decimals must be >= 1 for persisted models");
  if (cfg.plan.workers < 1) throw ConfigError("workers must be >= 1");
  cfg.plan.sgd.validate();
  cfg.plan.gdt.validate();
  if (cfg.plan.hidden.empty()) preset_arch(cfg.plan.arch_tag, 1, 1);
  for (const auto& f : cfg.features) feature_by_name(f);
  return cfg;
}

std::vector<FeatureSpec> configured_features(const RunConfig& cfg) {
  if (cfg.features.empty()) return feature_catalog();
  std::vector<FeatureSpec> out;
  for (const auto& f : cfg.features) out.push_back(feature_by_name(f));
  return out;
}

std::string file_tag(const ProtoModel& model) {
  std::string tag = model.tag();
  std::replace(tag.begin(), tag.end(), '\'', 'p');
  return tag;
}

LabeledDataset load_configured_dataset(const RunConfig& cfg, int label_count) {
  if (cfg.dataset.empty()) throw ConfigError("no dataset configured");
  return load_dataset(cfg.dataset, label_count);
}

int cmd_catalog(const std::string& output) {
  const std::string table = export_catalog(feature_catalog());
  if (output.empty()) {
    std::cout << table;
  } else {
    write_file_atomic(output, table);
  }
  return kExitOk;
}

struct SynthOptions {
  std::string output;
  SyntheticSpec spec;
  bool conflict = false;
};

int cmd_synth(const SynthOptions& o) {
  LabeledDataset ds = make_synthetic_dataset(o.spec);
  if (o.conflict) {
    if (ds.items.empty() || ds.label_count < 2)
      throw ConfigError("--conflict needs at least one image and two labels");
    LabeledItem dup = ds.items.front();
    dup.id = "dup000000";
    dup.label = (dup.label + 1) % ds.label_count;
    ds.items.push_back(std::move(dup));
  }
  write_file_atomic(o.output, encode_fnb(ds));
  std::cout << "wrote " << ds.items.size() << " images, " << ds.label_count << " labels to "
            << o.output << "\n";
  return kExitOk;
}

int cmd_modularize(const RunConfig& cfg) {
  const auto features = configured_features(cfg);
  const LabeledDataset ds = load_configured_dataset(cfg, cfg.labels);
  if (ds.label_count % cfg.k != 0)
    throw ConfigError("k=" + std::to_string(cfg.k) + " does not divide L=" + std::to_string(ds.label_count));
  const FeaturedBatchSet set = build_featured_batches(ds, features, cfg.k, cfg.r, cfg.plan.workers);
  save_featured_batches(set, cfg.out / "batches");
  std::cout << "wrote " << set.cells.size() << " featured batches to " << (cfg.out / "batches").string()
            << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
  const FeaturedBatchSet set = load_featured_batches(cfg.out / "batches");
  if (set.k != cfg.k || set.r != cfg.r)
    throw ConfigError("cached batches use k=" + std::to_string(set.k) + ", r=" + std::to_string(set.r) +
                      "; rerun modularize");
  const auto features = configured_features(cfg);
  if (features.size() != set.features.size() ||
      !std::equal(features.begin(), features.end(), set.features.begin(),
                  [](const FeatureSpec& a, const FeatureSpec& b) { return a.name == b.name; }))
    throw ConfigError("cached batches use a different feature list; rerun modularize");

  const ProtoModel model = train_proto_model(set, cfg.plan);
  save_proto_model(model, cfg.out / "model");

  std::string conflicts = "feature module submodule first_id second_id first_label second_label digest\n";
  std::size_t counts[5] = {};
  for (const auto& c : model.cells) {
    ++counts[static_cast<int>(c.status)];
    for (const auto& x : c.conflicts.conflicts)
      conflicts += std::to_string(c.index.feature) + " " + std::to_string(c.index.module) + " " +
                   std::to_string(c.index.submodule) + " " + x.first_id + " " + x.second_id + " " +
                   std::to_string(x.first_label) + " " + std::to_string(x.second_label) + " " +
                   x.digest + "\n";
    if (c.status == CellStatus::Failed)
      std::cerr << "cell " << c.index.feature << " " << c.index.module << " " << c.index.submodule
                << " failed: " << c.message << "\n";
  }
  write_file_atomic(cfg.out / "model" / "conflicts.txt", conflicts);

  std::cout << "trained " << model.cells.size() << " FNNs (" << model.tag() << "):";
  for (auto s : {CellStatus::Trained, CellStatus::ErrorFree, CellStatus::Inconsistent,
                 CellStatus::Stalled, CellStatus::Failed})
    if (counts[static_cast<int>(s)]) std::cout << " " << to_string(s) << "=" << counts[static_cast<int>(s)];
  std::cout << "\n";
  return model.complete() ? kExitOk : kExitTraining;
}

ProtoModel load_model_for_evaluation(const RunConfig& cfg) {
  try {
    return load_proto_model(cfg.out / "model");
  } catch (const DataError& e) {
    throw CommandError(kExitEvaluation, e.what());
  }
}

int cmd_evaluate_training(const RunConfig& cfg) {
  const ProtoModel model = load_model_for_evaluation(cfg);
  const FeaturedBatchSet set = load_featured_batches(cfg.out / "batches");
  TrainingEvalTable table;
  try {
    table = training_evaluation(model, set, cfg.plan.workers);
  } catch (const PartialModelError& e) {
    throw CommandError(kExitEvaluation, e.what());
  }
  const auto path = cfg.out / "reports" / ("training_eval_" + file_tag(model) + ".txt");
  write_file_atomic(path, format_training_report(table, model.tag()));
  std::cout << "training evaluation: min " << format_fixed(table.min, 3) << " mean "
            << format_fixed(table.mean, 3) << " max " << format_fixed(table.max, 3) << ", perfect "
            << table.perfect_fnns << "/" << table.total_fnns << ", error-free cells "
            << table.error_free_cells << "/" << table.total_cells << "\n";
  return kExitOk;
}

int cmd_evaluate_model(const RunConfig& cfg) {
  const ProtoModel model = load_model_for_evaluation(cfg);
  if (model.partial()) throw CommandError(kExitEvaluation, "proto-model has failed cells");
  const int p = cfg.model ? preset_feature_count(cfg.model) : static_cast<int>(model.features.size());
  if (p > static_cast<int>(model.features.size()))
    throw ConfigError("Model-" + std::to_string(cfg.model) + " needs " + std::to_string(p) +
                      " features, the proto-model has " + std::to_string(model.features.size()));
  if (cfg.protocol_m > model.labels_per_module())
    throw ConfigError("protocol m exceeds the labels per module");
  const FeaturedModel fm(model, p);
  const LabeledDataset ds = load_configured_dataset(cfg, model.label_count);
  if (ds.label_count != model.label_count)
    throw DataError("dataset label count does not match the proto-model");
  const int b = std::min<int>(cfg.eval_batches, static_cast<int>(ds.items.size()));

  std::vector<ConfusionMatrix> matrices;
  std::vector<VoteOutcome> outcomes;
  std::vector<int> truth;
  for (const auto& part : partition_eval_batches(ds, b)) {
    ModelEvaluation ev = model_evaluation(fm, part, cfg.protocol_m, cfg.plan.workers);
    matrices.push_back(confusion_matrix(ev.outcomes, ev.truth, ds.label_count));
    outcomes.insert(outcomes.end(), ev.outcomes.begin(), ev.outcomes.end());
    truth.insert(truth.end(), ev.truth.begin(), ev.truth.end());
  }
  ConfusionMatrix total(ds.label_count);
  for (const auto& m : matrices) total += m;
  const double accuracy = 100.0 * static_cast<double>(total.trace()) / static_cast<double>(total.total());
  const double top1 = top1_rate(outcomes, truth);
  const ErrorlessLabels errorless = errorless_labels(matrices);
  std::size_t super = 0, ties = 0;
  for (const auto& o : outcomes) {
    super += o.super_majority;
    ties += o.tie_break_used;
  }

  std::string report;
  auto kv = [&](const std::string& k, const std::string& v) { report += k + " = " + v + "\n"; };
  kv("scope", "model");
  kv("model", model.tag());
  kv("featured_model", cfg.model ? "Model-" + std::to_string(cfg.model) : "all");
  kv("features", std::to_string(p));
  kv("protocol", cfg.protocol_m == 1 ? "top1" : "expanded-top" + std::to_string(cfg.protocol_m));
  kv("protocol_m", std::to_string(cfg.protocol_m));
  kv("images", std::to_string(outcomes.size()));
  kv("accuracy", format_fixed(accuracy, 3));
  kv("top1", format_fixed(top1, 3));
  kv("super_majority_outcomes", std::to_string(super));
  kv("tie_breaks", std::to_string(ties));
  kv("eval_batches", std::to_string(b));
  kv("errorless_by_batch", format_fixed(errorless.by_batch, 1));
  kv("errorless_all", std::to_string(errorless.all));
  std::string labels;
  for (int l : errorless.labels) labels += (labels.empty() ? "" : " ") + std::to_string(l);
  kv("errorless_labels", labels);

  const std::string stem = "model_" + file_tag(model) + "_p" + std::to_string(p) + "_m" +
                           std::to_string(cfg.protocol_m);
  write_file_atomic(cfg.out / "reports" / (stem + ".txt"), report);
  write_file_atomic(cfg.out / "reports" / ("confusion_" + stem + ".csv"), confusion_csv(total));
  std::cout << "model evaluation (" << stem << "): accuracy " << format_fixed(accuracy, 3)
            << ", top1 " << format_fixed(top1, 3) << "\n";
  return kExitOk;
}

CellIndex parse_cell(const std::string& text, const ProtoModel& model) {
  const auto parts = split_list(text);
  if (parts.size() != 3) throw ConfigError("--cell expects FEATURE,MODULE,SUBMODULE");
  CellIndex c;
  const auto it = std::find_if(model.features.begin(), model.features.end(),
                               [&](const FeatureSpec& f) { return f.name == parts[0]; });
  if (it != model.features.end()) {
    c.feature = static_cast<int>(it - model.features.begin()) + 1;
  } else if (!parts[0].empty() && std::all_of(parts[0].begin(), parts[0].end(), ::isdigit)) {
    c.feature = to_int("cell", parts[0]);
  } else {
    throw ConfigError("unknown feature '" + parts[0] + "' in --cell");
  }
  c.module = to_int("cell", parts[1]);
  c.submodule = to_int("cell", parts[2]);
  try {
    model.index_of(c);
  } catch (const DomainError&) {
    throw ConfigError("cell " + text + " is outside the proto-model");
  }
  return c;
}

int cmd_wheel(const RunConfig& cfg, const std::string& cell_text) {
  const ProtoModel model = load_model_for_evaluation(cfg);
  const CellIndex cell = parse_cell(cell_text, model);
  const FeaturedBatchSet set = load_featured_batches(cfg.out / "batches");
  const FeaturedBatch& fb = set.at(cell);
  const WheelPlot plot = confusion_wheel(model.at(cell).params, fb);
  const std::string name = model.features[static_cast<std::size_t>(cell.feature - 1)].name;
  const std::string stem = "wheel_" + file_tag(model) + "_" + name + "_m" + std::to_string(cell.module) +
                           "_s" + std::to_string(cell.submodule);
  const std::string title = model.tag() + " feature " + name + " module " +
                            std::to_string(cell.module) + " submodule " + std::to_string(cell.submodule);
  write_file_atomic(cfg.out / "wheel" / (stem + ".svg"), render_wheel_svg(plot, title));
  write_file_atomic(cfg.out / "wheel" / (stem + ".csv"), wheel_csv(plot));
  std::size_t outside = 0;
  for (const auto& pt : plot.points) outside += pt.outside_sector;
  std::cout << "wheel " << stem << ": " << plot.points.size() << " points, " << outside
            << " outside their sector\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Modular featured FNN classifier: data preparation, training, evaluation"};
  app.require_subcommand(1);

  std::string catalog_out;
  auto* catalog = app.add_subcommand("catalog", "Export the RGB feature table");
  catalog->add_option("--output", catalog_out, "File to write (default: stdout)");

  SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "Write a synthetic FNB1 dataset");
  synth->add_option("--output", synth_opts.output, "Output file")->required();
  synth->add_option("--labels", synth_opts.spec.label_count, "Label count")->check(CLI::PositiveNumber);
  synth->add_option("--count", synth_opts.spec.count, "Image count")->check(CLI::NonNegativeNumber);
  synth->add_option("--size", synth_opts.spec.height, "Image height and width")->check(CLI::Range(4, 4096));
  synth->add_option("--noise", synth_opts.spec.noise, "Per-pixel noise amplitude");
  synth->add_option("--jitter", synth_opts.spec.jitter, "Per-image brightness offset amplitude");
  synth->add_option("--seed", synth_opts.spec.seed, "Seed");
  synth->add_flag("--conflict", synth_opts.conflict,
                  "Append a copy of the first image under a different label");

  Overrides o;
  auto* modularize = app.add_subcommand("modularize", "Write featured-batch caches per (i,j,s)");
  add_common_options(modularize, o);
  auto* train = app.add_subcommand("train", "Train the proto-model from cached batches");
  add_common_options(train, o);
  std::string scope = "training";
  auto* evaluate = app.add_subcommand("evaluate", "Training or model evaluation reports");
  add_common_options(evaluate, o);
  evaluate->add_option("--scope", scope, "training or model")
      ->check(CLI::IsMember({"training", "model"}));
  std::string cell_text;
  auto* wheel = app.add_subcommand("wheel", "Render the confusion wheel of one FNN");
  add_common_options(wheel, o);
  wheel->add_option("--cell", cell_text, "FEATURE,MODULE,SUBMODULE (feature by name or index)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  const bool evaluating = evaluate->parsed() || wheel->parsed();
  try {
    if (catalog->parsed()) return cmd_catalog(catalog_out);
    if (synth->parsed()) {
      synth_opts.spec.width = synth_opts.spec.height;
      return cmd_synth(synth_opts);
    }
    const RunConfig cfg = resolve_config(o);
    if (modularize->parsed()) return cmd_modularize(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (evaluate->parsed()) return scope == "model" ? cmd_evaluate_model(cfg) : cmd_evaluate_training(cfg);
    if (wheel->parsed()) return cmd_wheel(cfg, cell_text);
  } catch (const CommandError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code();
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const PartialModelError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return kExitEvaluation;
  } catch (const Error& e) {
    std::cerr << (evaluating ? "evaluation error: " : "data error: ") << e.what() << "\n";
    return evaluating ? kExitEvaluation : kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> storage = args;
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(storage.size()), argv.data());
}

}  // namespace modfnn
