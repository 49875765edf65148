#include "modfnn/fnn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "modfnn/decimal.hpp"
#include "modfnn/error.hpp"

namespace modfnn {

FnnArch::FnnArch(std::vector<int> layer_sizes) : sizes(std::move(layer_sizes)) {
  if (sizes.size() < 3 || sizes.size() > 4)
    throw ConfigError("an FNN needs one or two hidden layers");
  for (int s : sizes)
    if (s < 1) throw ConfigError("layer sizes must be positive");
}

std::string FnnArch::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(sizes[i]);
  }
  return out;
}

FnnArch FnnArch::parse(std::string_view text) {
  std::vector<int> sizes;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto next = std::min(text.find('x', pos), text.size());
    int v = 0;
    auto res = std::from_chars(text.data() + pos, text.data() + next, v);
    if (res.ec != std::errc{} || res.ptr != text.data() + next)
      throw DataError("bad architecture '" + std::string(text) + "'");
    sizes.push_back(v);
    pos = next + 1;
  }
  return FnnArch(std::move(sizes));
}

FnnArch preset_arch(std::string_view tag, int input_size, int output_size) {
  if (tag == "h1") return FnnArch({input_size, 256, output_size});
  if (tag == "h2") return FnnArch({input_size, 256, 77, output_size});
  throw ConfigError("unknown architecture preset '" + std::string(tag) + "'");
}

FnnParams FnnParams::zeros(const FnnArch& arch) {
  FnnParams p;
  p.arch = arch;
  for (std::size_t l = 0; l < arch.layer_count(); ++l)
    p.layers.push_back({Eigen::MatrixXd::Zero(arch.sizes[l], arch.sizes[l + 1]),
                        Eigen::VectorXd::Zero(arch.sizes[l + 1])});
  return p;
}

std::size_t FnnParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers)
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  return n;
}

bool FnnParams::same_shape(const FnnParams& other) const { return arch == other.arch; }

FnnParams init_params(const FnnArch& arch, std::uint64_t seed) {
  FnnParams p = FnnParams::zeros(arch);
  std::mt19937_64 rng(seed);
  for (auto& layer : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = dist(rng);
  }
  return p;
}

namespace {

void check_input(const FnnParams& p, const Eigen::MatrixXd& inputs) {
  if (p.layers.empty()) throw DimensionError("empty parameter set");
  if (inputs.rows() != p.arch.input_size())
    throw DimensionError("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                         std::to_string(p.arch.input_size()));
}

// Pre-activations of every layer plus the inputs fed to each layer.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> layer_inputs;  // a_0 .. a_{L-1}
  std::vector<Eigen::MatrixXd> pre;           // z_1 .. z_L
};

ForwardPass run_forward(const FnnParams& p, const Eigen::MatrixXd& inputs) {
  check_input(p, inputs);
  ForwardPass fp;
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    Eigen::MatrixXd z = layer.weights.transpose() * a;
    z.colwise() += layer.bias;
    fp.layer_inputs.push_back(std::move(a));
    if (l + 1 < p.layers.size()) a = z.cwiseMax(0.0);
    fp.pre.push_back(std::move(z));
  }
  return fp;
}

void check_labels(const FnnParams& p, const Eigen::MatrixXd& inputs, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != inputs.cols())
    throw DimensionError("label count does not match sample count");
  for (int y : labels)
    if (y < 0 || y >= p.arch.output_size())
      throw DomainError("label " + std::to_string(y) + " outside the output layer");
}

}  // namespace

Eigen::MatrixXd logits(const FnnParams& p, const Eigen::MatrixXd& inputs) {
  check_input(p, inputs);
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Eigen::MatrixXd z = p.layers[l].weights.transpose() * a;
    z.colwise() += p.layers[l].bias;
    a = (l + 1 < p.layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
  }
  return a;
}

Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double mx = z.col(c).maxCoeff();
    const double lse = mx + std::log((z.col(c).array() - mx).exp().sum());
    out.col(c) = z.col(c).array() - lse;
  }
  return out;
}

Eigen::MatrixXd forward_batch(const FnnParams& p, const Eigen::MatrixXd& inputs) {
  return log_softmax(logits(p, inputs)).array().exp();
}

Eigen::VectorXd forward(const FnnParams& p, const Eigen::VectorXd& x) {
  return forward_batch(p, x).col(0);
}

double cross_entropy(const Eigen::VectorXd& probs, int label) {
  if (label < 0 || label >= probs.size())
    throw DomainError("label " + std::to_string(label) + " outside the probability vector");
  return -std::log(probs(label));
}

std::vector<Candidate> top_candidates(const Eigen::Ref<const Eigen::VectorXd>& log_probs, int m) {
  const auto classes = static_cast<int>(log_probs.size());
  if (m < 1 || m > classes) throw DomainError("candidate count must be in [1, output size]");
  std::vector<Candidate> all;
  all.reserve(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) all.push_back({c, -log_probs(c)});
  std::partial_sort(all.begin(), all.begin() + m, all.end(),
                    [](const Candidate& a, const Candidate& b) {
                      return a.loss < b.loss || (a.loss == b.loss && a.label < b.label);
                    });
  all.resize(static_cast<std::size_t>(m));
  return all;
}

PredictionRecord predict_top(const FnnParams& p, const Eigen::VectorXd& x, int m) {
  PredictionRecord rec;
  rec.candidates = top_candidates(log_softmax(logits(p, x)).col(0), m);
  return rec;
}

std::vector<int> predict_labels(const FnnParams& p, const Eigen::MatrixXd& inputs) {
  const Eigen::MatrixXd z = logits(p, inputs);
  std::vector<int> out(static_cast<std::size_t>(z.cols()));
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    Eigen::Index best = 0;
    z.col(c).maxCoeff(&best);  // first maximal index
    out[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return out;
}

std::size_t count_errors(const FnnParams& p, const Eigen::MatrixXd& inputs,
                         std::span<const int> labels) {
  check_labels(p, inputs, labels);
  const auto pred = predict_labels(p, inputs);
  std::size_t errors = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) errors += pred[t] != labels[t];
  return errors;
}

FnnParams weighted_grad(const FnnParams& p, const Eigen::MatrixXd& inputs,
                        std::span<const int> labels, std::span<const double> weights,
                        double* loss_out) {
  check_labels(p, inputs, labels);
  if (inputs.cols() == 0) throw DimensionError("gradient of an empty minibatch");
  if (weights.size() != labels.size()) throw DimensionError("weight count mismatch");

  ForwardPass fp = run_forward(p, inputs);
  const auto n = static_cast<double>(inputs.cols());
  Eigen::MatrixXd logp = log_softmax(fp.pre.back());
  Eigen::MatrixXd delta = logp.array().exp();
  double loss = 0.0;
  for (Eigen::Index t = 0; t < delta.cols(); ++t) {
    const int y = labels[static_cast<std::size_t>(t)];
    const double w = weights[static_cast<std::size_t>(t)];
    loss -= w * logp(y, t);
    delta(y, t) -= 1.0;
    delta.col(t) *= w / n;
  }
  if (loss_out) *loss_out = loss / n;

  FnnParams g = FnnParams::zeros(p.arch);
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    g.layers[l].weights.noalias() = fp.layer_inputs[l] * delta.transpose();
    g.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = p.layers[l].weights * delta;
      delta = back.cwiseProduct((fp.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

FnnParams grad(const FnnParams& p, const Eigen::MatrixXd& inputs, std::span<const int> labels) {
  const std::vector<double> ones(labels.size(), 1.0);
  return weighted_grad(p, inputs, labels, ones);
}

double mean_loss(const FnnParams& p, const Eigen::MatrixXd& inputs, std::span<const int> labels) {
  check_labels(p, inputs, labels);
  if (inputs.cols() == 0) return 0.0;
  const Eigen::MatrixXd logp = log_softmax(logits(p, inputs));
  double loss = 0.0;
  for (Eigen::Index t = 0; t < logp.cols(); ++t) loss -= logp(labels[static_cast<std::size_t>(t)], t);
  return loss / static_cast<double>(logp.cols());
}

void apply_step(FnnParams& p, const FnnParams& g, double rate) {
  if (!p.same_shape(g)) throw DimensionError("gradient shape does not match parameters");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    p.layers[l].weights -= rate * g.layers[l].weights;
    p.layers[l].bias -= rate * g.layers[l].bias;
  }
}

FnnParams quantize_params(const FnnParams& p, int decimals) {
  if (decimals < 1) throw ConfigError("quantization digits must be >= 1");
  FnnParams q = p;
  q.decimals = decimals;
  for (auto& layer : q.layers) {
    layer.weights = layer.weights.unaryExpr([decimals](double v) { return round_decimal(v, decimals); });
    layer.bias = layer.bias.unaryExpr([decimals](double v) { return round_decimal(v, decimals); });
  }
  return q;
}

std::uint64_t count_params(std::uint64_t n, std::uint64_t k, std::uint64_t r, const FnnArch& arch) {
  std::uint64_t per = 0;
  for (std::size_t l = 0; l + 1 < arch.sizes.size(); ++l)
    per += (static_cast<std::uint64_t>(arch.sizes[l]) + 1) * static_cast<std::uint64_t>(arch.sizes[l + 1]);
  return n * k * r * per;
}

std::uint64_t count_neurons(std::uint64_t n, std::uint64_t k, std::uint64_t r, const FnnArch& arch) {
  const std::uint64_t per = std::accumulate(arch.sizes.begin(), arch.sizes.end(), std::uint64_t{0});
  return n * k * r * per;
}

std::string encode_weights(const FnnParams& p, int decimals) {
  if (decimals < 1) throw ConfigError("weight files need at least one decimal digit");
  std::string out = "FNN d=" + std::to_string(decimals) + " arch=" + p.arch.to_string() + "\n";
  out.reserve(p.parameter_count() * static_cast<std::size_t>(decimals + 4));
  auto put = [&](double v) {
    out += format_fixed(round_decimal(v, decimals), decimals);
    out += '\n';
  };
  for (const auto& layer : p.layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) put(layer.weights(r, c));
    for (Eigen::Index c = 0; c < layer.bias.size(); ++c) put(layer.bias(c));
  }
  return out;
}

FnnParams decode_weights(std::string_view text) {
  const auto eol = text.find('\n');
  if (eol == std::string_view::npos) throw DataError("weight file has no header");
  std::istringstream header{std::string(text.substr(0, eol))};
  std::string magic, dfield, afield;
  header >> magic >> dfield >> afield;
  if (magic != "FNN" || !dfield.starts_with("d=") || !afield.starts_with("arch="))
    throw DataError("bad weight file header");
  int decimals = 0;
  {
    auto s = std::string_view(dfield).substr(2);
    auto res = std::from_chars(s.data(), s.data() + s.size(), decimals);
    if (res.ec != std::errc{} || decimals < 1) throw DataError("bad decimal count in weight file");
  }
  FnnParams p = FnnParams::zeros(FnnArch::parse(std::string_view(afield).substr(5)));
  p.decimals = decimals;

  std::size_t pos = eol + 1;
  auto next = [&]() {
    const auto end = text.find('\n', pos);
    if (pos >= text.size() || end == std::string_view::npos)
      throw DataError("weight file is truncated");
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    const auto dot = line.find('.');
    if (dot == std::string_view::npos || line.size() - dot - 1 != static_cast<std::size_t>(decimals))
      throw DataError("weight value '" + std::string(line) + "' does not have " +
                      std::to_string(decimals) + " fractional digits");
    double v = 0.0;
    auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc{} || res.ptr != line.data() + line.size())
      throw DataError("bad weight value '" + std::string(line) + "'");
    return v;
  };
  for (auto& layer : p.layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = next();
    for (Eigen::Index c = 0; c < layer.bias.size(); ++c) layer.bias(c) = next();
  }
  if (pos != text.size()) throw DataError("weight file has trailing values");
  return p;
}

}  // namespace modfnn
