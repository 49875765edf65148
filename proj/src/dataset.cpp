#include "modfnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "modfnn/decimal.hpp"
#include "modfnn/error.hpp"
#include "modfnn/parallel.hpp"

namespace modfnn {

void LabeledDataset::validate() const {
  if (label_count < 1) throw DataError("dataset needs at least one label");
  std::set<std::string_view> seen;
  for (const auto& item : items) {
    if (item.label < 0 || item.label >= label_count)
      throw DataError("item '" + item.id + "' has label " + std::to_string(item.label) +
                      " outside [0, " + std::to_string(label_count) + ")");
    if (!seen.insert(item.id).second) throw DataError("duplicate image id '" + item.id + "'");
  }
}

static void check_modules(int k, int label_count) {
  if (k < 1 || label_count < 1 || label_count % k != 0)
    throw ConfigError("module count k=" + std::to_string(k) + " must divide L=" +
                      std::to_string(label_count));
}

ModuleLabel module_of_label(int g, int k, int label_count) {
  check_modules(k, label_count);
  if (g < 0 || g >= label_count)
    throw DomainError("label " + std::to_string(g) + " outside [0, " +
                      std::to_string(label_count) + ")");
  const int per = label_count / k;
  return {g / per + 1, g % per};
}

int global_label(const ModuleLabel& ml, int k, int label_count) {
  check_modules(k, label_count);
  const int per = label_count / k;
  if (ml.module < 1 || ml.module > k || ml.local < 0 || ml.local >= per)
    throw DomainError("module/local label out of range");
  return (ml.module - 1) * per + ml.local;
}

void sort_canonical(ItemBatch& batch) {
  std::sort(batch.begin(), batch.end(), [](const LabeledItem& a, const LabeledItem& b) {
    return std::tie(a.label, a.id) < std::tie(b.label, b.id);
  });
}

std::vector<ItemBatch> modularize(const LabeledDataset& ds, int k) {
  check_modules(k, ds.label_count);
  std::vector<ItemBatch> batches(static_cast<std::size_t>(k));
  for (const auto& item : ds.items)
    batches[static_cast<std::size_t>(module_of_label(item.label, k, ds.label_count).module - 1)]
        .push_back(item);
  for (auto& b : batches) sort_canonical(b);
  return batches;
}

// Sizes of a balanced contiguous split; the first `n % parts` get one more.
static std::vector<std::size_t> balanced_sizes(std::size_t n, std::size_t parts) {
  std::vector<std::size_t> sizes(parts, n / parts);
  for (std::size_t i = 0; i < n % parts; ++i) ++sizes[i];
  return sizes;
}

static std::vector<ItemBatch> split_contiguous(const ItemBatch& ordered, std::size_t parts) {
  std::vector<ItemBatch> out;
  out.reserve(parts);
  auto it = ordered.begin();
  for (std::size_t size : balanced_sizes(ordered.size(), parts)) {
    out.emplace_back(it, it + static_cast<std::ptrdiff_t>(size));
    it += static_cast<std::ptrdiff_t>(size);
  }
  return out;
}

std::vector<ItemBatch> split_submodules(const ItemBatch& batch, int r,
                                        std::optional<std::uint64_t> shuffle_seed) {
  if (r < 1) throw ConfigError("submodule count r must be >= 1");
  if (static_cast<std::size_t>(r) > batch.size())
    throw ConfigError("r=" + std::to_string(r) + " exceeds batch size " +
                      std::to_string(batch.size()));
  ItemBatch ordered = batch;
  std::sort(ordered.begin(), ordered.end(),
            [](const LabeledItem& a, const LabeledItem& b) { return a.id < b.id; });
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(ordered.begin(), ordered.end(), rng);
  }
  return split_contiguous(ordered, static_cast<std::size_t>(r));
}

std::vector<ItemBatch> partition_eval_batches(const LabeledDataset& ds, int b) {
  if (b < 1) throw ConfigError("evaluation batch count must be >= 1");
  if (static_cast<std::size_t>(b) > ds.items.size())
    throw ConfigError("evaluation batch count " + std::to_string(b) + " exceeds item count " +
                      std::to_string(ds.items.size()));
  ItemBatch ordered = ds.items;
  sort_canonical(ordered);
  return split_contiguous(ordered, static_cast<std::size_t>(b));
}

FeaturedBatch materialize_featured_batch(const ItemBatch& subset, const FeatureSpec& spec,
                                         const CellIndex& cell, int k, int label_count) {
  FeaturedBatch fb;
  fb.cell = cell;
  if (subset.empty()) return fb;
  const auto dim = feature_vector_length(subset.front().image.height(),
                                         subset.front().image.width());
  fb.inputs.resize(dim, static_cast<Eigen::Index>(subset.size()));
  fb.labels.reserve(subset.size());
  fb.ids.reserve(subset.size());
  for (std::size_t t = 0; t < subset.size(); ++t) {
    const auto& item = subset[t];
    const FeatureVector v = transform_image(spec, item.image);
    if (v.size() != dim) throw DimensionError("images in one batch must share a size");
    fb.inputs.col(static_cast<Eigen::Index>(t)) = v;
    fb.labels.push_back(module_of_label(item.label, k, label_count).local);
    fb.ids.push_back(item.id);
  }
  return fb;
}

static std::string fnv1a_digest(const std::vector<std::int64_t>& values) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::int64_t v : values) {
    auto u = static_cast<std::uint64_t>(v);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (u >> (8 * byte)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ConflictReport scan_double_labels(const FeaturedBatch& fb, int decimals) {
  if (decimals < 1) throw ConfigError("quantization digits must be >= 1");
  const double scale = std::pow(10.0, decimals);
  std::map<std::vector<std::int64_t>, std::vector<std::size_t>> groups;
  for (std::size_t t = 0; t < fb.size(); ++t) {
    std::vector<std::int64_t> key(static_cast<std::size_t>(fb.dim()));
    for (Eigen::Index d = 0; d < fb.dim(); ++d)
      key[static_cast<std::size_t>(d)] = std::llround(
          round_decimal(fb.inputs(d, static_cast<Eigen::Index>(t)), decimals) * scale);
    groups[std::move(key)].push_back(t);
  }

  ConflictReport report;
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    const std::string digest = fnv1a_digest(key);
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const std::size_t x = members[a], y = members[b];
        if (fb.labels[x] == fb.labels[y]) continue;
        Conflict c{fb.cell.feature, fb.ids[x], fb.ids[y], digest, fb.labels[x], fb.labels[y]};
        if (c.second_id < c.first_id) {
          std::swap(c.first_id, c.second_id);
          std::swap(c.first_label, c.second_label);
        }
        report.conflicts.push_back(std::move(c));
      }
    }
  }
  std::sort(report.conflicts.begin(), report.conflicts.end());
  return report;
}

std::size_t FeaturedBatchSet::index_of(const CellIndex& c) const {
  if (c.feature < 1 || c.feature > static_cast<int>(features.size()) || c.module < 1 ||
      c.module > k || c.submodule < 1 || c.submodule > r)
    throw DomainError("cell index out of range");
  return (static_cast<std::size_t>(c.feature - 1) * static_cast<std::size_t>(k) +
          static_cast<std::size_t>(c.module - 1)) * static_cast<std::size_t>(r) +
         static_cast<std::size_t>(c.submodule - 1);
}

FeaturedBatchSet build_featured_batches(const LabeledDataset& ds,
                                        const std::vector<FeatureSpec>& features, int k, int r,
                                        int workers) {
  ds.validate();
  if (features.empty()) throw ConfigError("at least one feature is required");
  FeaturedBatchSet set{features, k, r, ds.label_count, {}};
  const auto modules = modularize(ds, k);
  std::vector<std::vector<ItemBatch>> subsets;
  for (const auto& m : modules) subsets.push_back(split_submodules(m, r));

  const std::size_t n = features.size();
  set.cells.resize(n * static_cast<std::size_t>(k) * static_cast<std::size_t>(r));
  parallel_for(set.cells.size(), workers, [&](std::size_t idx) {
    const auto s = static_cast<int>(idx % static_cast<std::size_t>(r));
    const auto j = static_cast<int>((idx / static_cast<std::size_t>(r)) % static_cast<std::size_t>(k));
    const auto i = static_cast<int>(idx / (static_cast<std::size_t>(r) * static_cast<std::size_t>(k)));
    set.cells[idx] = materialize_featured_batch(
        subsets[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)],
        features[static_cast<std::size_t>(i)], CellIndex{i + 1, j + 1, s + 1}, k, ds.label_count);
  });
  return set;
}

LabeledDataset make_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.label_count < 1 || spec.count < 0 || spec.jitter < 0) throw ConfigError("invalid synthetic spec");
  LabeledDataset ds;
  ds.label_count = spec.label_count;

  struct Style {
    double base[3];
    double angle;
    double frequency;
  };
  std::mt19937_64 style_rng(spec.seed * 0x9e3779b97f4a7c15ULL + 17);
  std::uniform_real_distribution<double> color(60.0, 196.0);
  std::vector<Style> styles;
  for (int c = 0; c < spec.label_count; ++c) {
    Style st{};
    for (double& b : st.base) b = color(style_rng);
    st.angle = std::numbers::pi * c / spec.label_count;
    st.frequency = 2.0 + c % 3;
    styles.push_back(st);
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> noise(-spec.noise, spec.noise);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (int t = 0; t < spec.count; ++t) {
    const int label = t % spec.label_count;
    const Style& st = styles[static_cast<std::size_t>(label)];
    RgbImage img(spec.height, spec.width);
    const double ph = phase(rng);
    const double shift = spec.jitter > 0 ? std::uniform_real_distribution<double>(-spec.jitter, spec.jitter)(rng) : 0.0;
    const double ca = std::cos(st.angle), sa = std::sin(st.angle);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double u = (x * ca + y * sa) / spec.width;
        const double wave = 40.0 * std::sin(2.0 * std::numbers::pi * st.frequency * u + ph);
        for (int ch = 0; ch < 3; ++ch) {
          const double v = st.base[ch] + shift + wave + noise(rng);
          img.at(y, x, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
    char id[32];
    std::snprintf(id, sizeof(id), "img%06d", t);
    ds.items.push_back({id, std::move(img), label});
  }
  return ds;
}

}  // namespace modfnn
