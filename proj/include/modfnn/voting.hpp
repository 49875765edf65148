#pragma once

#include <string>
#include <vector>

#include "modfnn/features.hpp"
#include "modfnn/fnn.hpp"
#include "modfnn/training.hpp"

namespace modfnn {

// A proto-model restricted to its first p features at inference time.
class FeaturedModel {
 public:
  FeaturedModel(const ProtoModel& proto, int p);
  // Model-1..Model-6 use the first 3, 6, 9, 12, 15, 17 features.
  static FeaturedModel preset(const ProtoModel& proto, int model_number);

  const ProtoModel& proto() const { return *proto_; }
  int feature_count() const { return p_; }

 private:
  const ProtoModel* proto_;
  int p_;
};

int preset_feature_count(int model_number);

// Predictions of every (feature, module, submodule) FNN for one image, with
// candidate labels reported as global labels.
struct RecordTensor {
  int p = 0;
  int k = 0;
  int r = 0;
  int m = 0;
  std::vector<PredictionRecord> records;  // ordered by (feature, module, submodule)

  const PredictionRecord& at(int feature, int module, int submodule) const;
};

RecordTensor predict_records(const FeaturedModel& fm, const RgbImage& image, int m);

struct SubmoduleWinner {
  int module = 0;
  int submodule = 0;
  int label = 0;
  int votes = 0;
  double summed_loss = 0.0;              // over the candidate entries naming `label`
  std::vector<double> feature_losses;    // best loss of each of the p features
};

// Step two: the label named by the most features among their candidate lists.
// Label ties go to the smaller summed loss, then the smaller label.
SubmoduleWinner submodule_winner(const std::vector<const PredictionRecord*>& records);

struct TieCandidate {
  int module = 0;
  int submodule = 0;
  int label = 0;
  double variance = 0.0;
  friend bool operator==(const TieCandidate&, const TieCandidate&) = default;
};

struct VoteOutcome {
  int label = 0;
  int module = 0;
  int submodule = 0;
  int votes = 0;
  int feature_count = 0;
  bool super_majority = false;
  bool tie_break_used = false;
  std::vector<TieCandidate> tied;  // losing candidates of the variance tie-break

  friend bool operator==(const VoteOutcome&, const VoteOutcome&) = default;
};

double population_variance(const std::vector<double>& values);

// Step three: the winner with the most votes; vote ties go to the smallest
// population variance of the per-feature losses, then the smallest (j, s).
VoteOutcome majority_vote(const std::vector<SubmoduleWinner>& winners, int p);

// Steps two and three over a full record tensor.
VoteOutcome aggregate(const RecordTensor& records);

VoteOutcome classify(const FeaturedModel& fm, const RgbImage& image, int m);

// One `i j s label loss` line per candidate, losses with 6 fractional digits.
std::string dump_records(const RecordTensor& records);

}  // namespace modfnn
