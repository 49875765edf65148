#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace modfnn {

// Layer sizes input -> hidden(s) -> output. Hidden layers use ReLU, the
// output layer softmax. One or two hidden layers.
struct FnnArch {
  std::vector<int> sizes;

  FnnArch() = default;
  explicit FnnArch(std::vector<int> layer_sizes);

  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }
  std::size_t layer_count() const { return sizes.size() - 1; }
  // "900x256x25"
  std::string to_string() const;
  static FnnArch parse(std::string_view text);

  friend bool operator==(const FnnArch&, const FnnArch&) = default;
};

// h1 = [input, 256, output], h2 = [input, 256, 77, output].
FnnArch preset_arch(std::string_view tag, int input_size, int output_size);

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_in x fan_out
  Eigen::VectorXd bias;     // fan_out
};

struct FnnParams {
  FnnArch arch;
  std::vector<DenseLayer> layers;
  int decimals = 0;  // declared precision; 0 means unconstrained

  // Zero parameters of the given shape.
  static FnnParams zeros(const FnnArch& arch);
  std::size_t parameter_count() const;
  bool same_shape(const FnnParams& other) const;
};

// Glorot-uniform weights, zero biases; deterministic for a seed.
FnnParams init_params(const FnnArch& arch, std::uint64_t seed);

// Output-layer pre-activations for each column of `inputs` (input x n).
Eigen::MatrixXd logits(const FnnParams& p, const Eigen::MatrixXd& inputs);
// Row-max-shifted log-softmax of each column.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits);

// Softmax probabilities for one input.
Eigen::VectorXd forward(const FnnParams& p, const Eigen::VectorXd& x);
Eigen::MatrixXd forward_batch(const FnnParams& p, const Eigen::MatrixXd& inputs);

// Cross-entropy -log(probs[label]).
double cross_entropy(const Eigen::VectorXd& probs, int label);

struct Candidate {
  int label = 0;
  double loss = 0.0;
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// One FNN's answer for one image: candidates sorted by ascending loss, ties by
// ascending label. The cell coordinates are filled in by the voting layer.
struct PredictionRecord {
  int feature = 0;
  int module = 0;
  int submodule = 0;
  std::vector<Candidate> candidates;
};

PredictionRecord predict_top(const FnnParams& p, const Eigen::VectorXd& x, int m);
// Top-m candidates from one column of log-probabilities.
std::vector<Candidate> top_candidates(const Eigen::Ref<const Eigen::VectorXd>& log_probs, int m);

// Argmax label per column (smallest index on ties).
std::vector<int> predict_labels(const FnnParams& p, const Eigen::MatrixXd& inputs);
std::size_t count_errors(const FnnParams& p, const Eigen::MatrixXd& inputs,
                         std::span<const int> labels);

// Mean cross-entropy gradient over the columns of `inputs`. The result has
// the shape of `p`.
FnnParams grad(const FnnParams& p, const Eigen::MatrixXd& inputs, std::span<const int> labels);
// Gradient of (1/n) * sum_t weight_t * loss_t. Optionally reports that loss.
FnnParams weighted_grad(const FnnParams& p, const Eigen::MatrixXd& inputs,
                        std::span<const int> labels, std::span<const double> weights,
                        double* loss_out = nullptr);
double mean_loss(const FnnParams& p, const Eigen::MatrixXd& inputs, std::span<const int> labels);

// p -= rate * g
void apply_step(FnnParams& p, const FnnParams& g, double rate);

// Every weight and bias rounded half-to-even to `decimals` digits.
FnnParams quantize_params(const FnnParams& p, int decimals);

std::uint64_t count_params(std::uint64_t n, std::uint64_t k, std::uint64_t r, const FnnArch& arch);
std::uint64_t count_neurons(std::uint64_t n, std::uint64_t k, std::uint64_t r, const FnnArch& arch);

// Weight file: header `FNN d=<d> arch=<s0>x...x<sout>`, then for each layer
// W row-major (fan_in rows) followed by b, one value per line with exactly d
// fractional digits.
std::string encode_weights(const FnnParams& p, int decimals);
FnnParams decode_weights(std::string_view text);

}  // namespace modfnn
