#include "modfnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "modfnn/error.hpp"
#include "modfnn/parallel.hpp"

namespace modfnn {

void SgdConfig::validate() const {
  if (!(learning_rate > 0) || !(decay > 0) || decay_interval < 1)
    throw ConfigError("SGD rates and decay interval must be positive");
  if (batch_size < 1 || max_epochs < 0) throw ConfigError("SGD batch size/epochs out of range");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("SGD threshold must be in [0, 1]");
}

void GdtConfig::validate() const {
  if (!(lambda_step > 0.0 && lambda_step <= 1.0)) throw ConfigError("lambda step must be in (0, 1]");
  if (inner_steps < 1 || patience < 1 || max_tunnels < 1)
    throw ConfigError("GDT inner steps, patience and tunnels must be >= 1");
  if (!(learning_rate > 0) || !(amplification > 0))
    throw ConfigError("GDT learning rate and amplification must be positive");
  if (conflict_decimals < 1) throw ConfigError("conflict quantization digits must be >= 1");
}

namespace {

std::string format_rate(double rate) {
  std::ostringstream os;
  os << rate;
  return os.str();
}

struct BatchFit {
  double loss = 0.0;
  std::size_t errors = 0;
};

BatchFit evaluate_fit(const FnnParams& p, const FeaturedBatch& fb) {
  const Eigen::MatrixXd logp = log_softmax(logits(p, fb.inputs));
  BatchFit fit;
  for (Eigen::Index t = 0; t < logp.cols(); ++t) {
    const int y = fb.labels[static_cast<std::size_t>(t)];
    fit.loss -= logp(y, t);
    Eigen::Index best = 0;
    logp.col(t).maxCoeff(&best);
    fit.errors += best != y;
  }
  if (logp.cols() > 0) fit.loss /= static_cast<double>(logp.cols());
  return fit;
}

class SgdEpochs {
 public:
  SgdEpochs(const FeaturedBatch& fb, const SgdConfig& cfg)
      : fb_(fb), cfg_(cfg), rng_(cfg.seed), order_(fb.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  double rate(int epoch) const {
    return cfg_.learning_rate * std::pow(cfg_.decay, epoch / cfg_.decay_interval);
  }

  void run(FnnParams& p, int epoch) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    const double lr = rate(epoch);
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    Eigen::MatrixXd xb;
    std::vector<int> yb;
    for (std::size_t start = 0; start < order_.size(); start += bs) {
      const std::size_t len = std::min(bs, order_.size() - start);
      xb.resize(fb_.dim(), static_cast<Eigen::Index>(len));
      yb.resize(len);
      for (std::size_t t = 0; t < len; ++t) {
        xb.col(static_cast<Eigen::Index>(t)) = fb_.inputs.col(static_cast<Eigen::Index>(order_[start + t]));
        yb[t] = fb_.labels[order_[start + t]];
      }
      apply_step(p, grad(p, xb, yb), lr);
    }
  }

 private:
  const FeaturedBatch& fb_;
  const SgdConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
};

void check_trainable(const FnnParams& p, const FeaturedBatch& fb) {
  if (fb.size() == 0) throw DomainError("cannot train on an empty batch");
  if (fb.dim() != p.arch.input_size())
    throw DimensionError("batch dimension " + std::to_string(fb.dim()) +
                         " does not match network input " + std::to_string(p.arch.input_size()));
  for (int y : fb.labels)
    if (y < 0 || y >= p.arch.output_size())
      throw DimensionError("batch label " + std::to_string(y) + " exceeds the output layer");
}

}  // namespace

double training_accuracy(const FnnParams& p, const FeaturedBatch& fb) {
  if (fb.size() == 0) return 1.0;
  return 1.0 - static_cast<double>(count_errors(p, fb.inputs, fb.labels)) / static_cast<double>(fb.size());
}

SgdResult sgd_train(const FnnArch& arch, const FeaturedBatch& fb, const SgdConfig& cfg) {
  cfg.validate();
  SgdResult result{init_params(arch, cfg.seed), {}, false};
  check_trainable(result.params, fb);
  SgdEpochs epochs(fb, cfg);
  const double n = static_cast<double>(fb.size());
  const double chance = 1.0 / arch.output_size();
  // one misclassified sample moves small batches by more than the margin
  const double margin = std::max(cfg.chance_margin, 1.0 / std::sqrt(n));
  const int guard_epoch = std::max(2, static_cast<int>(std::ceil(0.1 * cfg.max_epochs)));

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    epochs.run(result.params, epoch);
    const BatchFit fit = evaluate_fit(result.params, fb);
    if (!std::isfinite(fit.loss))
      throw DivergenceError("SGD loss became non-finite at epoch " + std::to_string(epoch + 1) +
                                " (rate " + format_rate(epochs.rate(epoch)) + ")",
                            epoch + 1, epochs.rate(epoch));
    const double acc = 1.0 - static_cast<double>(fit.errors) / n;
    result.accuracy_trace.push_back(acc);
    if (acc >= cfg.threshold) {
      result.reached_threshold = true;
      break;
    }
    if (epoch + 1 >= guard_epoch && acc < chance - margin)
      throw DivergenceError("SGD accuracy fell below chance at epoch " + std::to_string(epoch + 1) +
                                " (rate " + format_rate(epochs.rate(epoch)) + ")",
                            epoch + 1, epochs.rate(epoch));
  }
  return result;
}

FnnParams sgd_continue(const FnnParams& start, const FeaturedBatch& fb, const SgdConfig& cfg) {
  cfg.validate();
  check_trainable(start, fb);
  FnnParams best = start;
  std::size_t best_errors = evaluate_fit(start, fb).errors;
  FnnParams p = start;
  SgdEpochs epochs(fb, cfg);
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    epochs.run(p, epoch);
    const BatchFit fit = evaluate_fit(p, fb);
    if (!std::isfinite(fit.loss))
      throw DivergenceError("continued SGD loss became non-finite at epoch " +
                                std::to_string(epoch + 1),
                            epoch + 1, epochs.rate(epoch));
    if (fit.errors < best_errors) {
      best_errors = fit.errors;
      best = p;
    }
  }
  return best;
}

TunnelResult gdt_tunnel(const FnnParams& start, const FeaturedBatch& fb, const GdtConfig& cfg) {
  cfg.validate();
  check_trainable(start, fb);
  TunnelResult result;
  result.params = start;

  result.conflicts = scan_double_labels(fb, cfg.conflict_decimals);
  result.errors = count_errors(start, fb.inputs, fb.labels);
  result.error_trace.push_back(result.errors);
  if (!result.conflicts.empty()) {
    result.status = TunnelStatus::Inconsistent;
    return result;
  }
  if (result.errors == 0) {
    result.status = TunnelStatus::ErrorFree;
    return result;
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<int> predicted = predict_labels(start, fb.inputs);
  std::vector<double> weights(fb.size());
  double lambda = 0.0;
  double lr = cfg.learning_rate;
  int stall = 0;

  while (true) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (result.stages >= cfg.max_stages || elapsed > cfg.max_seconds) break;

    for (std::size_t t = 0; t < fb.size(); ++t)
      weights[t] = predicted[t] == fb.labels[t] ? 1.0 : 1.0 + lambda * cfg.amplification;
    FnnParams candidate = result.params;
    for (int step = 0; step < cfg.inner_steps; ++step)
      apply_step(candidate, weighted_grad(candidate, fb.inputs, fb.labels, weights), lr);
    ++result.stages;

    std::vector<int> cand_pred = predict_labels(candidate, fb.inputs);
    std::size_t cand_errors = 0;
    for (std::size_t t = 0; t < fb.size(); ++t) cand_errors += cand_pred[t] != fb.labels[t];

    if (cand_errors <= result.errors) {
      stall = cand_errors < result.errors ? 0 : stall + 1;
      result.params = std::move(candidate);
      predicted = std::move(cand_pred);
      result.errors = cand_errors;
      result.error_trace.push_back(cand_errors);
      if (cand_errors == 0) {
        result.status = TunnelStatus::ErrorFree;
        return result;
      }
    } else {
      lr = std::max(lr / 2.0, cfg.min_learning_rate);
      ++stall;
    }

    lambda = std::min(1.0, lambda + cfg.lambda_step);
    if (lambda >= 1.0 && stall >= cfg.patience) {
      if (++result.tunnels >= static_cast<std::size_t>(cfg.max_tunnels)) break;
      lambda = 0.0;
      lr = cfg.learning_rate;
      stall = 0;
    }
  }
  result.status = TunnelStatus::Stalled;
  return result;
}

std::string to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::S: return "S";
    case TrainingMode::SPrime: return "S'";
    case TrainingMode::T: return "T";
  }
  return "?";
}

TrainingMode parse_training_mode(std::string_view text) {
  if (text == "S") return TrainingMode::S;
  if (text == "S'" || text == "Sp" || text == "S-prime") return TrainingMode::SPrime;
  if (text == "T") return TrainingMode::T;
  throw ConfigError("unknown training mode '" + std::string(text) + "' (expected S, S' or T)");
}

std::string to_string(CellStatus status) {
  switch (status) {
    case CellStatus::Trained: return "Trained";
    case CellStatus::ErrorFree: return "ErrorFree";
    case CellStatus::Inconsistent: return "Inconsistent";
    case CellStatus::Stalled: return "Stalled";
    case CellStatus::Failed: return "Failed";
  }
  return "?";
}

CellStatus parse_cell_status(std::string_view text) {
  for (auto s : {CellStatus::Trained, CellStatus::ErrorFree, CellStatus::Inconsistent,
                 CellStatus::Stalled, CellStatus::Failed})
    if (to_string(s) == text) return s;
  throw DataError("unknown cell status '" + std::string(text) + "'");
}

std::string to_string(TunnelStatus status) {
  switch (status) {
    case TunnelStatus::ErrorFree: return "ErrorFree";
    case TunnelStatus::Inconsistent: return "Inconsistent";
    case TunnelStatus::Stalled: return "Stalled";
  }
  return "?";
}

FnnArch TrainingPlan::arch_for(int input_size, int output_size) const {
  if (hidden.empty()) return preset_arch(arch_tag, input_size, output_size);
  std::vector<int> sizes{input_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_size);
  return FnnArch(std::move(sizes));
}

std::size_t ProtoModel::index_of(const CellIndex& c) const {
  if (c.feature < 1 || c.feature > static_cast<int>(features.size()) || c.module < 1 ||
      c.module > k || c.submodule < 1 || c.submodule > r)
    throw DomainError("cell index out of range");
  return (static_cast<std::size_t>(c.feature - 1) * static_cast<std::size_t>(k) +
          static_cast<std::size_t>(c.module - 1)) * static_cast<std::size_t>(r) +
         static_cast<std::size_t>(c.submodule - 1);
}

bool ProtoModel::complete() const {
  if (cells.size() != features.size() * static_cast<std::size_t>(k) * static_cast<std::size_t>(r))
    return false;
  return std::none_of(cells.begin(), cells.end(),
                      [](const CellModel& c) { return c.status == CellStatus::Failed; });
}

std::string ProtoModel::tag() const { return to_string(mode) + "_" + arch_tag; }

std::uint64_t cell_seed(std::uint64_t base, const CellIndex& cell) {
  // splitmix64 over the base seed and the packed cell coordinates
  std::uint64_t z = base ^ (static_cast<std::uint64_t>(cell.feature) << 40) ^
                    (static_cast<std::uint64_t>(cell.module) << 20) ^
                    static_cast<std::uint64_t>(cell.submodule);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CellModel train_cell(const FeaturedBatch& fb, const FnnArch& arch, const TrainingPlan& plan) {
  CellModel cell;
  cell.index = fb.cell;
  cell.params = FnnParams::zeros(arch);

  SgdConfig sgd = plan.sgd;
  sgd.seed = cell_seed(plan.seed, fb.cell);
  try {
    SgdResult s = sgd_train(arch, fb, sgd);
    cell.params = std::move(s.params);
    cell.accuracy_trace = std::move(s.accuracy_trace);
    cell.status = CellStatus::Trained;
    if (plan.mode == TrainingMode::SPrime) {
      SgdConfig more = sgd;
      more.max_epochs = static_cast<int>(std::ceil(plan.continue_fraction * plan.sgd.max_epochs));
      more.seed = sgd.seed + 1;
      cell.params = sgd_continue(cell.params, fb, more);
    } else if (plan.mode == TrainingMode::T) {
      TunnelResult t = gdt_tunnel(cell.params, fb, plan.gdt);
      cell.params = std::move(t.params);
      cell.error_trace = std::move(t.error_trace);
      cell.conflicts = std::move(t.conflicts);
      cell.status = t.status == TunnelStatus::ErrorFree      ? CellStatus::ErrorFree
                    : t.status == TunnelStatus::Inconsistent ? CellStatus::Inconsistent
                                                             : CellStatus::Stalled;
    }
  } catch (const DivergenceError& e) {
    cell.status = CellStatus::Failed;
    cell.message = e.what();
  }
  if (plan.decimals > 0) cell.params = quantize_params(cell.params, plan.decimals);
  cell.errors = fb.size() ? count_errors(cell.params, fb.inputs, fb.labels) : 0;
  cell.accuracy = fb.size() ? 100.0 * (1.0 - static_cast<double>(cell.errors) / static_cast<double>(fb.size()))
                            : 100.0;
  if (cell.status == CellStatus::ErrorFree && cell.errors > 0) {
    cell.status = CellStatus::Stalled;
    cell.message = "rounding to " + std::to_string(plan.decimals) + " decimals reintroduced " +
                   std::to_string(cell.errors) + " errors";
  }
  return cell;
}

ProtoModel train_proto_model(const FeaturedBatchSet& batches, const TrainingPlan& plan) {
  plan.sgd.validate();
  plan.gdt.validate();
  if (batches.cells.empty()) throw ConfigError("no featured batches to train");
  ProtoModel model;
  model.mode = plan.mode;
  model.arch_tag = plan.hidden.empty() ? plan.arch_tag : "custom";
  model.arch = plan.arch_for(static_cast<int>(batches.cells.front().dim()), batches.labels_per_module());
  model.features = batches.features;
  model.k = batches.k;
  model.r = batches.r;
  model.label_count = batches.label_count;
  model.decimals = plan.decimals;
  model.cells.resize(batches.cells.size());
  parallel_for(batches.cells.size(), plan.workers, [&](std::size_t idx) {
    model.cells[idx] = train_cell(batches.cells[idx], model.arch, plan);
  });
  return model;
}

ProtoModel train_proto_model(const LabeledDataset& ds, const std::vector<FeatureSpec>& features,
                             int k, int r, const TrainingPlan& plan) {
  return train_proto_model(build_featured_batches(ds, features, k, r, plan.workers), plan);
}

void retrain_cells(ProtoModel& model, const FeaturedBatchSet& batches,
                   std::span<const CellIndex> cells, const TrainingPlan& plan) {
  std::vector<CellIndex> todo(cells.begin(), cells.end());
  parallel_for(todo.size(), plan.workers, [&](std::size_t t) {
    model.at(todo[t]) = train_cell(batches.at(todo[t]), model.arch, plan);
  });
}

}  // namespace modfnn
