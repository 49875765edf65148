#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "modfnn/error.hpp"
#include "modfnn/voting.hpp"
#include "oracles.hpp"
#include "vote_fixtures.hpp"

using namespace modfnn;

namespace {

PredictionRecord rec(int i, std::vector<Candidate> c) { return {i, 1, 1, std::move(c)}; }

SubmoduleWinner winner(int j, int s, int label, int votes, std::vector<double> losses) {
  return {j, s, label, votes, 0.0, std::move(losses)};
}

// Zero-parameter proto-model: every FNN outputs the uniform distribution.
ProtoModel zero_model(int n, int k, int r, int labels, int image_size = 8) {
  ProtoModel m;
  m.features.assign(feature_catalog().begin(), feature_catalog().begin() + n);
  m.k = k;
  m.r = r;
  m.label_count = labels;
  m.arch = FnnArch({feature_vector_length(image_size, image_size), 4, labels / k});
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= k; ++j)
      for (int s = 1; s <= r; ++s) {
        CellModel c;
        c.index = {i, j, s};
        c.params = FnnParams::zeros(m.arch);
        c.status = CellStatus::Trained;
        m.cells.push_back(c);
      }
  return m;
}

}  // namespace

TEST_CASE("featured model presets") {
  CHECK(preset_feature_count(1) == 3);
  CHECK(preset_feature_count(2) == 6);
  CHECK(preset_feature_count(6) == 17);
  CHECK_THROWS_AS(preset_feature_count(7), ConfigError);
  const ProtoModel m = zero_model(6, 1, 1, 2);
  CHECK(FeaturedModel::preset(m, 2).feature_count() == 6);
  CHECK_THROWS_AS(FeaturedModel::preset(m, 3), ConfigError);
  CHECK_THROWS_AS(FeaturedModel(m, 0), ConfigError);
}

TEST_CASE("predict_records on a zero model") {
  const ProtoModel m = zero_model(3, 2, 2, 8);
  const FeaturedModel fm(m, 3);
  std::mt19937_64 rng(1);
  const RgbImage img = oracle::random_image(rng, 8, 8);
  const RecordTensor t1 = predict_records(fm, img, 1);
  CHECK(t1.records.size() == 12);
  for (const auto& r : t1.records) {
    REQUIRE(r.candidates.size() == 1);
    CHECK(std::abs(r.candidates[0].loss - std::log(4.0)) <= 1e-12);
    CHECK(module_of_label(r.candidates[0].label, 2, 8).module == r.module);
  }
  CHECK(t1.at(3, 2, 1).feature == 3);
  CHECK(t1.at(3, 2, 1).module == 2);
  CHECK(t1.at(3, 2, 1).submodule == 1);
  const RecordTensor t3 = predict_records(fm, img, 3);
  for (const auto& r : t3.records) {
    REQUIRE(r.candidates.size() == 3);
    CHECK(r.candidates[0].label != r.candidates[1].label);
    CHECK(r.candidates[1].label != r.candidates[2].label);
    CHECK(r.candidates[0].label != r.candidates[2].label);
  }
  CHECK_THROWS_AS(predict_records(fm, img, 5), ConfigError);

  ProtoModel broken = m;
  broken.cells[4].status = CellStatus::Failed;
  CHECK_THROWS_AS(predict_records(FeaturedModel(broken, 3), img, 1), PartialModelError);
  const VoteOutcome o = classify(fm, img, 1);
  CHECK((o.label >= 0 && o.label < 8));
}

TEST_CASE("submodule_winner") {
  PredictionRecord a = rec(1, {{7, 0.1}}), b = rec(2, {{7, 0.2}}), c = rec(3, {{7, 0.3}});
  SubmoduleWinner w = submodule_winner({&a, &b, &c});
  CHECK(w.label == 7);
  CHECK(w.votes == 3);
  CHECK(w.feature_losses == std::vector<double>{0.1, 0.2, 0.3});

  c = rec(3, {{9, 0.01}});
  w = submodule_winner({&a, &b, &c});
  CHECK(w.label == 7);
  CHECK(w.votes == 2);

  PredictionRecord x = rec(1, {{4, 0.1}}), y = rec(2, {{9, 0.5}});
  w = submodule_winner({&x, &y});
  CHECK(w.label == 4);
  CHECK(w.votes == 1);
  CHECK(w.summed_loss == 0.1);

  // equal votes and losses go to the smaller label
  PredictionRecord u = rec(1, {{6, 0.25}}), v = rec(2, {{5, 0.25}});
  CHECK(submodule_winner({&u, &v}).label == 5);

  // m = 3: a label present in every list wins even when never first
  PredictionRecord p1 = rec(1, {{1, 0.1}, {2, 0.5}, {3, 0.9}});
  PredictionRecord p2 = rec(2, {{4, 0.1}, {2, 0.6}, {5, 0.8}});
  PredictionRecord p3 = rec(3, {{6, 0.2}, {7, 0.3}, {2, 0.4}});
  w = submodule_winner({&p1, &p2, &p3});
  CHECK(w.label == 2);
  CHECK(w.votes == 3);
  CHECK(w.feature_losses == std::vector<double>{0.1, 0.1, 0.2});
}

TEST_CASE("majority_vote") {
  VoteOutcome o = majority_vote({winner(1, 1, 3, 2, {0.1, 0.2, 0.3}), winner(2, 1, 12, 3, {0.1, 0.1, 0.1})}, 3);
  CHECK(o.label == 12);
  CHECK(o.super_majority);
  CHECK_FALSE(o.tie_break_used);
  CHECK(o.tied.empty());

  // variance 0.01 vs 0.02 at equal votes
  const double d1 = 0.1, d2 = std::sqrt(2.0) * 0.1;
  o = majority_vote({winner(1, 2, 5, 2, {0.5 - d2, 0.5 + d2}), winner(2, 1, 9, 2, {0.5 - d1, 0.5 + d1})}, 2);
  CHECK(o.label == 9);
  CHECK(o.super_majority);
  CHECK(o.tie_break_used);
  REQUIRE(o.tied.size() == 1);
  CHECK(o.tied[0].label == 5);
  CHECK(o.tied[0].variance == doctest::Approx(0.02));

  // exact variance tie -> smallest (j, s)
  o = majority_vote({winner(2, 1, 20, 1, {0.5, 1.0}), winner(1, 2, 10, 1, {1.0, 1.5})}, 2);
  CHECK(o.module == 1);
  CHECK(o.submodule == 2);
  CHECK_FALSE(o.super_majority);
  CHECK(o.tie_break_used);

  o = majority_vote({winner(1, 1, 0, 1, {2.0, 3.0})}, 2);
  CHECK(o.label == 0);
  CHECK(o.votes == 1);
  CHECK_FALSE(o.tie_break_used);
  CHECK_THROWS_AS(majority_vote({}, 2), DomainError);
}

TEST_CASE("population variance") {
  CHECK(population_variance({}) == 0.0);
  CHECK(population_variance({4.0}) == 0.0);
  CHECK(population_variance({1.0, 3.0}) == 1.0);
  CHECK(population_variance({2, 4, 4, 4, 5, 5, 7, 9}) == 4.0);
  CHECK(population_variance({0.25, 0.5, 1.0}) == population_variance({1.0, 0.25, 0.5}));
}

TEST_CASE("aggregation agrees with the brute-force reference") {
  std::mt19937_64 rng(2024);
  int ties = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const RandomTensor rt = random_tensor(rng);
    const VoteOutcome got = aggregate(rt.tensor);
    const oracle::RefOutcome want = oracle::brute_force_vote(rt.lists, rt.tensor.k, rt.tensor.r);
    CAPTURE(trial);
    CHECK(got.label == want.label);
    CHECK(got.module == want.module);
    CHECK(got.submodule == want.submodule);
    CHECK(got.votes == want.votes);
    CHECK(got.super_majority == want.super_majority);
    CHECK(got.tie_break_used == want.tie_break_used);
    CHECK(got.votes <= rt.tensor.p);
    ties += got.tie_break_used;
  }
  CHECK(ties > 50);
}

TEST_CASE("aggregation ignores feature order") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const RandomTensor rt = random_tensor(rng);
    const RecordTensor& t = rt.tensor;
    std::vector<int> perm(static_cast<std::size_t>(t.p));
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    RecordTensor q = t;
    for (int i = 1; i <= t.p; ++i)
      for (int j = 1; j <= t.k; ++j)
        for (int s = 1; s <= t.r; ++s) {
          PredictionRecord moved = t.at(perm[static_cast<std::size_t>(i - 1)], j, s);
          moved.feature = i;
          q.records[static_cast<std::size_t>(((i - 1) * t.k + (j - 1)) * t.r + (s - 1))] = moved;
        }
    CHECK(aggregate(q) == aggregate(t));
  }
}

TEST_CASE("expanding the candidate lists never costs votes") {
  // take an m=3 tensor and truncate it to its first candidates
  std::mt19937_64 rng(11);
  int checked = 0;
  while (checked < 200) {
    const RandomTensor rt = random_tensor(rng);
    if (rt.tensor.m != 3) continue;
    RecordTensor one = rt.tensor;
    one.m = 1;
    for (auto& r : one.records) r.candidates.resize(1);
    for (int j = 1; j <= one.k; ++j)
      for (int s = 1; s <= one.r; ++s) {
        std::vector<const PredictionRecord*> a, b;
        for (int i = 1; i <= one.p; ++i) {
          a.push_back(&rt.tensor.at(i, j, s));
          b.push_back(&one.at(i, j, s));
        }
        CHECK(submodule_winner(a).votes >= submodule_winner(b).votes);
      }
    ++checked;
  }
}

TEST_CASE("record dump") {
  RecordTensor t{1, 1, 2, 2, {{1, 1, 1, {{0, 0.5}, {1, 1.25}}}, {1, 1, 2, {{1, 0.0000004}, {0, 2.0}}}}};
  CHECK(dump_records(t) ==
        "1 1 1 0 0.500000\n1 1 1 1 1.250000\n1 1 2 1 0.000000\n1 1 2 0 2.000000\n");
}
