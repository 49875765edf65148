#include "modfnn/voting.hpp"

#include <algorithm>
#include <map>

#include "modfnn/decimal.hpp"
#include "modfnn/error.hpp"

namespace modfnn {

int preset_feature_count(int model_number) {
  static constexpr int counts[] = {3, 6, 9, 12, 15, 17};
  if (model_number < 1 || model_number > 6) throw ConfigError("model preset must be 1..6");
  return counts[model_number - 1];
}

FeaturedModel::FeaturedModel(const ProtoModel& proto, int p) : proto_(&proto), p_(p) {
  if (p < 1 || p > static_cast<int>(proto.features.size()))
    throw ConfigError("featured model needs 1.." + std::to_string(proto.features.size()) +
                      " features, got " + std::to_string(p));
}

FeaturedModel FeaturedModel::preset(const ProtoModel& proto, int model_number) {
  return FeaturedModel(proto, preset_feature_count(model_number));
}

const PredictionRecord& RecordTensor::at(int feature, int module, int submodule) const {
  return records.at((static_cast<std::size_t>(feature - 1) * static_cast<std::size_t>(k) +
                     static_cast<std::size_t>(module - 1)) * static_cast<std::size_t>(r) +
                    static_cast<std::size_t>(submodule - 1));
}

RecordTensor predict_records(const FeaturedModel& fm, const RgbImage& image, int m) {
  const ProtoModel& proto = fm.proto();
  if (proto.partial()) throw PartialModelError("featured model has missing or failed cells");
  const int per = proto.labels_per_module();
  if (m < 1 || m > per) throw ConfigError("protocol m must be in [1, L/k]");
  RecordTensor tensor{fm.feature_count(), proto.k, proto.r, m, {}};
  tensor.records.reserve(static_cast<std::size_t>(tensor.p * tensor.k * tensor.r));
  for (int i = 1; i <= tensor.p; ++i) {
    const FeatureVector x = transform_image(proto.features[static_cast<std::size_t>(i - 1)], image);
    for (int j = 1; j <= proto.k; ++j) {
      for (int s = 1; s <= proto.r; ++s) {
        PredictionRecord rec = predict_top(proto.at({i, j, s}).params, x, m);
        rec.feature = i;
        rec.module = j;
        rec.submodule = s;
        for (auto& c : rec.candidates) c.label += (j - 1) * per;
        tensor.records.push_back(std::move(rec));
      }
    }
  }
  return tensor;
}

namespace {

// Summation in sorted order, so the result does not depend on feature order.
double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

}  // namespace

SubmoduleWinner submodule_winner(const std::vector<const PredictionRecord*>& records) {
  if (records.empty()) throw DomainError("submodule vote needs at least one feature");
  struct Tally {
    int votes = 0;
    std::vector<double> losses;
  };
  std::map<int, Tally> tally;
  SubmoduleWinner w;
  w.module = records.front()->module;
  w.submodule = records.front()->submodule;
  for (const PredictionRecord* rec : records) {
    if (rec->candidates.empty()) throw DomainError("prediction record without candidates");
    w.feature_losses.push_back(rec->candidates.front().loss);
    for (const auto& c : rec->candidates) {
      auto& t = tally[c.label];
      ++t.votes;
      t.losses.push_back(c.loss);
    }
  }
  bool first = true;
  for (auto& [label, t] : tally) {
    const double loss = sorted_sum(t.losses);
    // map iteration is by ascending label, so strict comparisons keep the
    // smaller label on a full tie
    if (first || t.votes > w.votes || (t.votes == w.votes && loss < w.summed_loss)) {
      w.label = label;
      w.votes = t.votes;
      w.summed_loss = loss;
      first = false;
    }
  }
  return w;
}

// Two-pass form scaled by n: sum((n*x - total)^2) / n^3. Every step before the
// final division is exact for short lists of dyadic values, so equal
// variances compare equal.
double population_variance(const std::vector<double>& input) {
  if (input.empty()) return 0.0;
  const double n = static_cast<double>(input.size());
  const double total = sorted_sum(input);
  std::vector<double> squares;
  squares.reserve(input.size());
  for (double v : input) squares.push_back((n * v - total) * (n * v - total));
  return sorted_sum(std::move(squares)) / (n * n * n);
}

VoteOutcome majority_vote(const std::vector<SubmoduleWinner>& winners, int p) {
  if (winners.empty()) throw DomainError("majority vote needs at least one submodule");
  int top = 0;
  for (const auto& w : winners) top = std::max(top, w.votes);
  std::vector<const SubmoduleWinner*> tied;
  for (const auto& w : winners)
    if (w.votes == top) tied.push_back(&w);

  const SubmoduleWinner* best = tied.front();
  VoteOutcome out;
  if (tied.size() > 1) {
    out.tie_break_used = true;
    double best_var = 0.0;
    for (const SubmoduleWinner* w : tied) {
      const double v = population_variance(w->feature_losses);
      if (w == tied.front() || v < best_var ||
          (v == best_var && std::tie(w->module, w->submodule) < std::tie(best->module, best->submodule))) {
        best = w;
        best_var = v;
      }
    }
    for (const SubmoduleWinner* w : tied)
      if (w != best)
        out.tied.push_back({w->module, w->submodule, w->label, population_variance(w->feature_losses)});
  }
  out.label = best->label;
  out.module = best->module;
  out.submodule = best->submodule;
  out.votes = best->votes;
  out.feature_count = p;
  out.super_majority = best->votes == p;
  return out;
}

VoteOutcome aggregate(const RecordTensor& tensor) {
  std::vector<SubmoduleWinner> winners;
  winners.reserve(static_cast<std::size_t>(tensor.k * tensor.r));
  std::vector<const PredictionRecord*> column(static_cast<std::size_t>(tensor.p));
  for (int j = 1; j <= tensor.k; ++j) {
    for (int s = 1; s <= tensor.r; ++s) {
      for (int i = 1; i <= tensor.p; ++i) column[static_cast<std::size_t>(i - 1)] = &tensor.at(i, j, s);
      SubmoduleWinner w = submodule_winner(column);
      w.module = j;
      w.submodule = s;
      winners.push_back(std::move(w));
    }
  }
  return majority_vote(winners, tensor.p);
}

VoteOutcome classify(const FeaturedModel& fm, const RgbImage& image, int m) {
  return aggregate(predict_records(fm, image, m));
}

std::string dump_records(const RecordTensor& tensor) {
  std::string out;
  for (const auto& rec : tensor.records)
    for (const auto& c : rec.candidates)
      out += std::to_string(rec.feature) + " " + std::to_string(rec.module) + " " +
             std::to_string(rec.submodule) + " " + std::to_string(c.label) + " " +
             format_fixed(c.loss, 6) + "\n";
  return out;
}

}  // namespace modfnn
