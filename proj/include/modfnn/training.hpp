#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modfnn/dataset.hpp"
#include "modfnn/fnn.hpp"

namespace modfnn {

struct SgdConfig {
  double learning_rate = 0.05;
  double decay = 0.5;          // multiplied into the rate every decay_interval epochs
  int decay_interval = 50;     // epochs
  int batch_size = 16;
  int max_epochs = 200;
  double threshold = 0.98;     // stop at the first epoch with accuracy >= threshold
  double chance_margin = 0.05; // divergence if accuracy < 1/C - max(margin, 1/sqrt(n)) after 10% of the budget
  std::uint64_t seed = 1;

  void validate() const;
};

struct SgdResult {
  FnnParams params;
  std::vector<double> accuracy_trace;  // full-batch accuracy after each epoch
  bool reached_threshold = false;
};

// Plain minibatch SGD from a fresh initialization. Throws DivergenceError.
SgdResult sgd_train(const FnnArch& arch, const FeaturedBatch& fb, const SgdConfig& cfg);

// Runs exactly cfg.max_epochs further epochs without the threshold stop and
// returns the most accurate parameters seen, the starting point included.
FnnParams sgd_continue(const FnnParams& start, const FeaturedBatch& fb, const SgdConfig& cfg);

double training_accuracy(const FnnParams& p, const FeaturedBatch& fb);

// Error-weighted homotopy: at stage lambda the objective is
// sum_correct loss + (1 + lambda*beta) * sum_misclassified loss. A stage
// (inner_steps full-batch gradient steps) is accepted only when the number of
// misclassified samples does not grow; a rejected stage is rolled back and
// the step size halved. Lambda rises by lambda_step per stage; after
// `patience` non-improving stages at lambda = 1 the tunnel restarts at
// lambda = 0 around the current error set.
struct GdtConfig {
  double lambda_step = 0.25;
  int inner_steps = 10;
  double learning_rate = 0.05;
  double min_learning_rate = 1e-7;
  double amplification = 20.0;  // beta
  int patience = 6;
  int max_tunnels = 25;
  std::size_t max_stages = 5000;
  double max_seconds = 600.0;
  int conflict_decimals = 4;  // quantization used by the double-label pre-scan

  void validate() const;
};

enum class TunnelStatus { ErrorFree, Inconsistent, Stalled };

struct TunnelResult {
  FnnParams params;
  TunnelStatus status = TunnelStatus::Stalled;
  std::size_t errors = 0;
  std::vector<std::size_t> error_trace;  // first entry is the starting count
  ConflictReport conflicts;
  std::size_t stages = 0;
  std::size_t tunnels = 0;
};

TunnelResult gdt_tunnel(const FnnParams& start, const FeaturedBatch& fb, const GdtConfig& cfg);

enum class TrainingMode { S, SPrime, T };
std::string to_string(TrainingMode mode);
TrainingMode parse_training_mode(std::string_view text);

enum class CellStatus { Trained, ErrorFree, Inconsistent, Stalled, Failed };
std::string to_string(CellStatus status);
CellStatus parse_cell_status(std::string_view text);
std::string to_string(TunnelStatus status);

struct CellModel {
  CellIndex index;
  FnnParams params;  // as persisted (quantized when the plan says so)
  CellStatus status = CellStatus::Failed;
  double accuracy = 0.0;  // percent, of the persisted parameters
  std::size_t errors = 0;
  std::string message;
  std::vector<double> accuracy_trace;
  std::vector<std::size_t> error_trace;
  ConflictReport conflicts;
};

struct TrainingPlan {
  TrainingMode mode = TrainingMode::T;
  std::string arch_tag = "h1";
  std::vector<int> hidden;  // overrides the preset when non-empty
  SgdConfig sgd;
  GdtConfig gdt;
  double continue_fraction = 0.25;  // S' extra epochs as a share of sgd.max_epochs
  int decimals = 4;                 // 0 keeps full precision
  std::uint64_t seed = 1;
  int workers = 1;

  FnnArch arch_for(int input_size, int output_size) const;
};

// The full catalog of n*k*r FNNs.
struct ProtoModel {
  TrainingMode mode = TrainingMode::T;
  std::string arch_tag = "h1";
  FnnArch arch;
  std::vector<FeatureSpec> features;
  int k = 1;
  int r = 1;
  int label_count = 0;
  int decimals = 4;
  std::vector<CellModel> cells;  // ordered by (feature, module, submodule)

  std::size_t index_of(const CellIndex& c) const;
  const CellModel& at(const CellIndex& c) const { return cells.at(index_of(c)); }
  CellModel& at(const CellIndex& c) { return cells.at(index_of(c)); }
  bool complete() const;
  bool partial() const { return !complete(); }
  int labels_per_module() const { return label_count / k; }
  // e.g. "T_h1"
  std::string tag() const;
};

// Seed of one cell, derived from the plan seed and the cell index only.
std::uint64_t cell_seed(std::uint64_t base, const CellIndex& cell);

CellModel train_cell(const FeaturedBatch& fb, const FnnArch& arch, const TrainingPlan& plan);

ProtoModel train_proto_model(const FeaturedBatchSet& batches, const TrainingPlan& plan);
ProtoModel train_proto_model(const LabeledDataset& ds, const std::vector<FeatureSpec>& features,
                             int k, int r, const TrainingPlan& plan);

// Retrains only the listed cells, leaving every other catalog entry untouched.
void retrain_cells(ProtoModel& model, const FeaturedBatchSet& batches,
                   std::span<const CellIndex> cells, const TrainingPlan& plan);

// Manifest (`manifest.txt`) plus one weight file per cell under `dir`.
void save_proto_model(const ProtoModel& model, const std::filesystem::path& dir);
ProtoModel load_proto_model(const std::filesystem::path& dir);
std::string encode_manifest(const ProtoModel& model);

}  // namespace modfnn
