#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modfnn/dataset.hpp"
#include "modfnn/training.hpp"
#include "modfnn/voting.hpp"

namespace modfnn {

struct CellAccuracy {
  CellIndex index;
  double accuracy = 0.0;  // percent
  std::size_t errors = 0;
  std::size_t samples = 0;
};

// Per-FNN accuracy on its own featured batch, with the aggregate statistics.
struct TrainingEvalTable {
  std::vector<CellAccuracy> cells;
  double min = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::size_t perfect_fnns = 0;      // FNNs at 100%
  std::size_t total_fnns = 0;        // n*k*r
  std::size_t error_free_cells = 0;  // (module, submodule) with every feature at 100%
  std::size_t total_cells = 0;       // k*r
};

TrainingEvalTable training_evaluation(const ProtoModel& model, const FeaturedBatchSet& batches,
                                      int workers = 1);

// `key = value` lines.
std::string format_training_report(const TrainingEvalTable& table, const std::string& model_tag);

struct ModelEvaluation {
  double accuracy = 0.0;  // percent of images whose voted label is the true label
  double top1 = 0.0;      // percent of correct outcomes carried by a super-majority
  std::vector<VoteOutcome> outcomes;
  std::vector<int> truth;
};

ModelEvaluation model_evaluation(const FeaturedModel& fm, const ItemBatch& items, int m,
                                 int workers = 1);
inline ModelEvaluation model_evaluation(const FeaturedModel& fm, const LabeledDataset& ds, int m,
                                        int workers = 1) {
  return model_evaluation(fm, ds.items, m, workers);
}

// Top-1 over a list of outcomes; 100 when nothing is correct.
double top1_rate(std::span<const VoteOutcome> outcomes, std::span<const int> truth);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int label_count = 0);

  int label_count() const { return labels_; }
  std::uint64_t at(int truth, int predicted) const;
  void add(int truth, int predicted, std::uint64_t count = 1);
  std::uint64_t row_sum(int truth) const;
  std::uint64_t total() const;
  std::uint64_t trace() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int labels_;
  std::vector<std::uint64_t> counts_;  // row-major, rows = true label
};

ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> truth,
                                 int label_count);
ConfusionMatrix confusion_matrix(std::span<const VoteOutcome> outcomes, std::span<const int> truth,
                                 int label_count);

// `true,pred,count` rows for every non-zero entry.
std::string confusion_csv(const ConfusionMatrix& matrix);

struct ErrorlessLabels {
  double by_batch = 0.0;                 // mean perfect-label count per batch
  std::size_t all = 0;                   // perfect in the aggregated matrix
  std::vector<int> labels;               // the `all` labels, ascending
  std::vector<std::size_t> per_batch;
};

// A label is perfect in a matrix when its row is non-empty and diagonal-only.
ErrorlessLabels errorless_labels(const std::vector<ConfusionMatrix>& batches);

// Confusion wheel: softmax outputs projected onto C unit spokes.
struct WheelPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  int truth = 0;
  int predicted = 0;
  bool misclassified = false;   // argmax differs from the true label
  bool outside_sector = false;  // angle more than pi/C away from the true spoke
};

struct WheelPlot {
  int classes = 0;
  std::vector<std::pair<double, double>> spokes;
  std::vector<WheelPoint> points;
};

std::pair<double, double> wheel_point(const Eigen::VectorXd& probs);
WheelPlot confusion_wheel(const FnnParams& params, const FeaturedBatch& fb);
std::string render_wheel_svg(const WheelPlot& plot, const std::string& title);
// `sample_id,x,y,true,pred,outside_sector`
std::string wheel_csv(const WheelPlot& plot);

}  // namespace modfnn
