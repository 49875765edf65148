#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "modfnn/features.hpp"

namespace modfnn {

struct LabeledItem {
  std::string id;
  RgbImage image;
  int label = 0;  // global label in [0, L)
};

using ItemBatch = std::vector<LabeledItem>;

struct LabeledDataset {
  ItemBatch items;
  int label_count = 0;

  // Throws DataError on duplicate ids or labels outside [0, label_count).
  void validate() const;
};

// (module, local label) of a global label; modules are 1-based.
struct ModuleLabel {
  int module = 0;
  int local = 0;
  friend bool operator==(const ModuleLabel&, const ModuleLabel&) = default;
};

ModuleLabel module_of_label(int global_label, int k, int label_count);
int global_label(const ModuleLabel& ml, int k, int label_count);

// Splits the dataset into k label-contiguous module batches (module j holds
// labels [(j-1)L/k, jL/k)). Each batch is in canonical order.
std::vector<ItemBatch> modularize(const LabeledDataset& ds, int k);

// Partitions a module batch into r contiguous, near-equal parts of its
// id-sorted order. With a shuffle seed the id-sorted order is first permuted
// deterministically.
std::vector<ItemBatch> split_submodules(const ItemBatch& batch, int r,
                                        std::optional<std::uint64_t> shuffle_seed = {});

// Evaluation split: b contiguous near-equal parts of the canonical
// (label, id) order. The first `count % b` parts get one extra item.
std::vector<ItemBatch> partition_eval_batches(const LabeledDataset& ds, int b);

// Canonical ordering: global label, then image id.
void sort_canonical(ItemBatch& batch);

// 1-based (feature, module, submodule) coordinates of one FNN.
struct CellIndex {
  int feature = 1;
  int module = 1;
  int submodule = 1;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

// Inputs of one (feature, module, submodule) cell: one column per sample.
struct FeaturedBatch {
  CellIndex cell;
  Eigen::MatrixXd inputs;  // dim x count
  std::vector<int> labels;  // local labels
  std::vector<std::string> ids;

  std::size_t size() const { return labels.size(); }
  Eigen::Index dim() const { return inputs.rows(); }
};

FeaturedBatch materialize_featured_batch(const ItemBatch& subset, const FeatureSpec& spec,
                                         const CellIndex& cell, int k, int label_count);

struct Conflict {
  int feature = 0;
  std::string first_id;
  std::string second_id;
  std::string digest;  // hex FNV-1a of the quantized input vector
  int first_label = 0;
  int second_label = 0;
  friend auto operator<=>(const Conflict&, const Conflict&) = default;
};

struct ConflictReport {
  std::vector<Conflict> conflicts;
  bool empty() const { return conflicts.empty(); }
};

// Every pair of samples whose inputs agree after rounding to `decimals`
// fractional digits while their labels differ. Sorted, pair ids ordered.
ConflictReport scan_double_labels(const FeaturedBatch& fb, int decimals = 4);

// All n*k*r featured batches of a dataset, ordered by (feature, module,
// submodule).
struct FeaturedBatchSet {
  std::vector<FeatureSpec> features;
  int k = 1;
  int r = 1;
  int label_count = 0;
  std::vector<FeaturedBatch> cells;

  std::size_t index_of(const CellIndex& c) const;
  const FeaturedBatch& at(const CellIndex& c) const { return cells.at(index_of(c)); }
  int labels_per_module() const { return label_count / k; }
};

FeaturedBatchSet build_featured_batches(const LabeledDataset& ds,
                                        const std::vector<FeatureSpec>& features, int k, int r,
                                        int workers = 1);

// Deterministic synthetic data: each label owns a base color and an oriented
// stripe pattern, perturbed per image by seeded noise.
struct SyntheticSpec {
  int label_count = 4;
  int count = 200;
  int height = 64;
  int width = 64;
  int noise = 48;  // per-pixel noise amplitude
  int jitter = 0;  // per-image brightness offset amplitude
  std::uint64_t seed = 1;
};

LabeledDataset make_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace modfnn
