#include "modfnn/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "modfnn/decimal.hpp"
#include "modfnn/error.hpp"
#include "modfnn/parallel.hpp"

namespace modfnn {

TrainingEvalTable training_evaluation(const ProtoModel& model, const FeaturedBatchSet& batches,
                                      int workers) {
  if (model.features.size() != batches.features.size() || model.k != batches.k ||
      model.r != batches.r)
    throw PartialModelError("featured batches do not match the proto-model layout");
  const std::size_t expected =
      model.features.size() * static_cast<std::size_t>(model.k) * static_cast<std::size_t>(model.r);
  if (model.cells.size() != expected || batches.cells.size() != expected)
    throw PartialModelError("proto-model is missing cells");

  TrainingEvalTable table;
  table.cells.resize(expected);
  parallel_for(expected, workers, [&](std::size_t idx) {
    const auto& cell = model.cells[idx];
    const auto& fb = batches.cells[idx];
    if (cell.index != fb.cell) throw PartialModelError("catalog and batch index disagree");
    const std::size_t errors = fb.size() ? count_errors(cell.params, fb.inputs, fb.labels) : 0;
    const double acc = fb.size() ? 100.0 * (1.0 - static_cast<double>(errors) / static_cast<double>(fb.size()))
                                 : 100.0;
    table.cells[idx] = {cell.index, acc, errors, fb.size()};
  });

  std::vector<double> acc;
  for (const auto& c : table.cells) {
    acc.push_back(c.accuracy);
    table.perfect_fnns += c.errors == 0;
  }
  std::sort(acc.begin(), acc.end());
  table.total_fnns = acc.size();
  table.min = acc.front();
  table.max = acc.back();
  table.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  const std::size_t mid = acc.size() / 2;
  table.median = acc.size() % 2 ? acc[mid] : (acc[mid - 1] + acc[mid]) / 2.0;

  table.total_cells = static_cast<std::size_t>(model.k) * static_cast<std::size_t>(model.r);
  for (int j = 1; j <= model.k; ++j) {
    for (int s = 1; s <= model.r; ++s) {
      bool all = true;
      for (int i = 1; i <= static_cast<int>(model.features.size()); ++i)
        all = all && table.cells[model.index_of({i, j, s})].errors == 0;
      table.error_free_cells += all;
    }
  }
  return table;
}

std::string format_training_report(const TrainingEvalTable& t, const std::string& tag) {
  std::string out;
  auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("scope", "training");
  kv("model", tag);
  kv("min", format_fixed(t.min, 3));
  kv("mean", format_fixed(t.mean, 3));
  kv("median", format_fixed(t.median, 3));
  kv("max", format_fixed(t.max, 3));
  kv("perfect_fnns", std::to_string(t.perfect_fnns) + "/" + std::to_string(t.total_fnns));
  kv("error_free_cells", std::to_string(t.error_free_cells) + "/" + std::to_string(t.total_cells));
  for (const auto& c : t.cells)
    kv("cell " + std::to_string(c.index.feature) + " " + std::to_string(c.index.module) + " " +
           std::to_string(c.index.submodule),
       format_fixed(c.accuracy, 3));
  return out;
}

double top1_rate(std::span<const VoteOutcome> outcomes, std::span<const int> truth) {
  if (outcomes.size() != truth.size()) throw DimensionError("outcome/label count mismatch");
  std::size_t correct = 0, super = 0;
  for (std::size_t t = 0; t < outcomes.size(); ++t) {
    if (outcomes[t].label != truth[t]) continue;
    ++correct;
    super += outcomes[t].super_majority;
  }
  return correct ? 100.0 * static_cast<double>(super) / static_cast<double>(correct) : 100.0;
}

ModelEvaluation model_evaluation(const FeaturedModel& fm, const ItemBatch& items, int m, int workers) {
  if (items.empty()) throw DomainError("model evaluation of an empty dataset");
  ModelEvaluation ev;
  ev.outcomes.resize(items.size());
  ev.truth.resize(items.size());
  parallel_for(items.size(), workers, [&](std::size_t t) {
    ev.outcomes[t] = classify(fm, items[t].image, m);
    ev.truth[t] = items[t].label;
  });
  std::size_t correct = 0;
  for (std::size_t t = 0; t < items.size(); ++t) correct += ev.outcomes[t].label == ev.truth[t];
  ev.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(items.size());
  ev.top1 = top1_rate(ev.outcomes, ev.truth);
  return ev;
}

ConfusionMatrix::ConfusionMatrix(int label_count)
    : labels_(label_count),
      counts_(static_cast<std::size_t>(label_count) * static_cast<std::size_t>(label_count)) {
  if (label_count < 0) throw DomainError("negative label count");
}

std::uint64_t ConfusionMatrix::at(int truth, int predicted) const {
  if (truth < 0 || truth >= labels_ || predicted < 0 || predicted >= labels_)
    throw DomainError("confusion matrix index out of range");
  return counts_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(labels_) +
                 static_cast<std::size_t>(predicted)];
}

void ConfusionMatrix::add(int truth, int predicted, std::uint64_t count) {
  if (truth < 0 || truth >= labels_ || predicted < 0 || predicted >= labels_)
    throw DomainError("label out of range: true " + std::to_string(truth) + ", predicted " +
                      std::to_string(predicted));
  counts_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(labels_) +
          static_cast<std::size_t>(predicted)] += count;
}

std::uint64_t ConfusionMatrix::row_sum(int truth) const {
  std::uint64_t s = 0;
  for (int p = 0; p < labels_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (int t = 0; t < labels_; ++t) s += at(t, t);
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.labels_ != labels_) throw DimensionError("confusion matrices differ in size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> truth,
                                 int label_count) {
  if (predicted.size() != truth.size()) throw DimensionError("prediction/label count mismatch");
  ConfusionMatrix m(label_count);
  for (std::size_t t = 0; t < truth.size(); ++t) m.add(truth[t], predicted[t]);
  return m;
}

ConfusionMatrix confusion_matrix(std::span<const VoteOutcome> outcomes, std::span<const int> truth,
                                 int label_count) {
  std::vector<int> predicted;
  predicted.reserve(outcomes.size());
  for (const auto& o : outcomes) predicted.push_back(o.label);
  return confusion_matrix(predicted, truth, label_count);
}

std::string confusion_csv(const ConfusionMatrix& m) {
  std::string out = "true,pred,count\n";
  for (int t = 0; t < m.label_count(); ++t)
    for (int p = 0; p < m.label_count(); ++p)
      if (const auto c = m.at(t, p))
        out += std::to_string(t) + "," + std::to_string(p) + "," + std::to_string(c) + "\n";
  return out;
}

static std::vector<int> perfect_labels(const ConfusionMatrix& m) {
  std::vector<int> out;
  for (int t = 0; t < m.label_count(); ++t) {
    const auto row = m.row_sum(t);
    if (row > 0 && m.at(t, t) == row) out.push_back(t);
  }
  return out;
}

ErrorlessLabels errorless_labels(const std::vector<ConfusionMatrix>& batches) {
  if (batches.empty()) throw DomainError("errorless-label statistics need at least one batch");
  ErrorlessLabels out;
  ConfusionMatrix total(batches.front().label_count());
  for (const auto& m : batches) {
    out.per_batch.push_back(perfect_labels(m).size());
    total += m;
  }
  out.by_batch = static_cast<double>(std::accumulate(out.per_batch.begin(), out.per_batch.end(),
                                                     std::size_t{0})) /
                 static_cast<double>(batches.size());
  out.labels = perfect_labels(total);
  out.all = out.labels.size();
  return out;
}

}  // namespace modfnn
