#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "modfnn/error.hpp"
#include "modfnn/evaluation.hpp"

using namespace modfnn;

namespace {

VoteOutcome outcome(int label, bool super) {
  VoteOutcome o;
  o.label = label;
  o.votes = super ? 3 : 2;
  o.feature_count = 3;
  o.super_majority = super;
  return o;
}

}  // namespace

TEST_CASE("top1_rate") {
  std::vector<VoteOutcome> o{outcome(1, true), outcome(2, false), outcome(3, true), outcome(0, false)};
  std::vector<int> truth{1, 2, 3, 0};
  CHECK(top1_rate(o, truth) == 50.0);
  truth = {9, 9, 9, 9};
  CHECK(top1_rate(o, truth) == 100.0);
  truth = {1, 2, 9, 9};
  CHECK(top1_rate(o, truth) == 50.0);
  std::vector<VoteOutcome> rev(o.rbegin(), o.rend());
  std::vector<int> rtruth(truth.rbegin(), truth.rend());
  CHECK(top1_rate(rev, rtruth) == top1_rate(o, truth));
  CHECK_THROWS_AS(top1_rate(o, std::vector<int>{1}), DimensionError);
}

TEST_CASE("confusion matrix") {
  const std::vector<int> truth{0, 1, 2, 2};
  ConfusionMatrix diag = confusion_matrix(std::span<const int>(truth), truth, 3);
  CHECK(diag.trace() == 4);
  CHECK(diag.total() == 4);
  CHECK(diag.at(2, 2) == 2);
  CHECK(diag.row_sum(2) == 2);

  const std::vector<int> p1{5}, t1{3};
  const ConfusionMatrix one = confusion_matrix(std::span<const int>(p1), t1, 6);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) CHECK(one.at(a, b) == (a == 3 && b == 5 ? 1u : 0u));
  CHECK(confusion_csv(one) == "true,pred,count\n3,5,1\n");

  ConfusionMatrix sum = diag;
  sum += diag;
  CHECK(sum.total() == 8);
  CHECK_THROWS_AS(sum += one, DimensionError);
  const std::vector<int> bad{7};
  CHECK_THROWS_AS(confusion_matrix(std::span<const int>(bad), t1, 6), DomainError);

  std::vector<VoteOutcome> o{outcome(0, true), outcome(2, true), outcome(2, false)};
  const ConfusionMatrix cm = confusion_matrix(std::span<const VoteOutcome>(o), std::vector<int>{0, 1, 2}, 3);
  CHECK(cm.at(1, 2) == 1);
  CHECK(cm.trace() == 2);
}

TEST_CASE("errorless labels") {
  ConfusionMatrix all_right(4);
  for (int l = 0; l < 4; ++l) all_right.add(l, l, 3);
  ErrorlessLabels e = errorless_labels({all_right});
  CHECK(e.by_batch == 4.0);
  CHECK(e.all == 4);
  CHECK(e.labels == std::vector<int>{0, 1, 2, 3});

  // label 0 perfect in 9 of 10 batches; label 1 absent from half of them
  std::vector<ConfusionMatrix> batches;
  for (int b = 0; b < 10; ++b) {
    ConfusionMatrix m(3);
    m.add(0, b == 4 ? 2 : 0);
    if (b % 2 == 0) m.add(1, 1);
    m.add(2, 1);
    batches.push_back(m);
  }
  e = errorless_labels(batches);
  // per batch: label 0 (9 batches) + label 1 (5 batches) + label 2 (never)
  CHECK(e.by_batch == doctest::Approx(1.4));
  CHECK(e.all == 1);
  CHECK(e.labels == std::vector<int>{1});
  CHECK(e.per_batch.size() == 10);
  CHECK(e.per_batch[4] == 1);
  CHECK_THROWS_AS(errorless_labels({}), DomainError);
}

TEST_CASE("wheel geometry") {
  Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(25);
  one_hot(0) = 1.0;
  auto [x0, y0] = wheel_point(one_hot);
  CHECK(std::abs(x0 - 1.0) <= 1e-12);
  CHECK(std::abs(y0) <= 1e-12);
  one_hot.setZero();
  one_hot(7) = 1.0;
  const auto [x7, y7] = wheel_point(one_hot);
  CHECK(std::abs(x7 - std::cos(2 * std::numbers::pi * 7 / 25)) <= 1e-12);
  CHECK(std::abs(y7 - std::sin(2 * std::numbers::pi * 7 / 25)) <= 1e-12);

  const auto [xu, yu] = wheel_point(Eigen::VectorXd::Constant(25, 1.0 / 25));
  CHECK(std::hypot(xu, yu) <= 1e-12);

  // halfway between spokes 0 and 1: the bisector, shortened to cos(pi/25)
  Eigen::VectorXd half = Eigen::VectorXd::Zero(25);
  half(0) = half(1) = 0.5;
  const auto [xh, yh] = wheel_point(half);
  CHECK(std::abs(std::atan2(yh, xh) - std::numbers::pi / 25) <= 1e-12);
  CHECK(std::abs(std::hypot(xh, yh) - std::cos(std::numbers::pi / 25)) <= 1e-12);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd a = Eigen::VectorXd::NullaryExpr(6, [&] { return u(rng); });
    Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(6, [&] { return u(rng); });
    a /= a.sum();
    b /= b.sum();
    const double w = u(rng);
    const auto [xa, ya] = wheel_point(a);
    const auto [xb, yb] = wheel_point(b);
    const auto [xm, ym] = wheel_point(w * a + (1 - w) * b);
    CHECK(std::abs(xm - (w * xa + (1 - w) * xb)) <= 1e-10);
    CHECK(std::abs(ym - (w * ya + (1 - w) * yb)) <= 1e-10);
    CHECK(std::hypot(xa, ya) <= 1.0 + 1e-12);
  }
}

TEST_CASE("confusion wheel of a network") {
  // 2 -> 2 -> 3 net; class from the sign pattern of the inputs
  FnnParams p = FnnParams::zeros(FnnArch({2, 2, 3}));
  p.layers[0].weights << 1, 0, 0, 1;
  p.layers[1].weights << 8, 0, 0, 0, 8, 0;
  p.layers[1].bias << 0, 0, 4;
  FeaturedBatch fb;
  fb.inputs.resize(2, 3);
  fb.inputs << 1, 0, 0, 0, 1, 0;
  fb.labels = {0, 1, 0};
  fb.ids = {"a", "b", "c"};
  const WheelPlot plot = confusion_wheel(p, fb);
  CHECK(plot.classes == 3);
  REQUIRE(plot.points.size() == 3);
  CHECK(plot.points[0].predicted == 0);
  CHECK_FALSE(plot.points[0].misclassified);
  CHECK_FALSE(plot.points[0].outside_sector);
  CHECK(plot.points[2].predicted == 2);
  CHECK(plot.points[2].misclassified);
  CHECK(plot.points[2].outside_sector);

  const std::string svg = render_wheel_svg(plot, "demo");
  CHECK(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"1000\"", 0) == 0);
  CHECK(svg.find("r=\"450\"") != std::string::npos);
  CHECK(svg.find("<title>demo</title>") != std::string::npos);
  CHECK(svg.substr(svg.size() - 7) == "</svg>\n");
  const std::string csv = wheel_csv(plot);
  CHECK(csv.rfind("sample_id,x,y,true,pred,outside_sector\na,", 0) == 0);
  CHECK(csv.find("\nc,") != std::string::npos);
  CHECK(csv.substr(csv.size() - 7) == ",0,2,1\n");
}

TEST_CASE("training evaluation statistics") {
  ProtoModel m;
  m.features = {feature_by_name("R"), feature_by_name("G")};
  m.k = 1;
  m.r = 2;
  m.label_count = 2;
  m.arch = FnnArch({2, 2, 2});
  FeaturedBatchSet set;
  set.features = m.features;
  set.k = 1;
  set.r = 2;
  set.label_count = 2;
  for (int i = 1; i <= 2; ++i)
    for (int s = 1; s <= 2; ++s) {
      CellModel c;
      c.index = {i, 1, s};
      c.params = FnnParams::zeros(m.arch);
      // bias toward label 0, so only label-0 samples are right
      c.params.layers[1].bias << 1, 0;
      c.status = CellStatus::Trained;
      m.cells.push_back(c);
      FeaturedBatch fb;
      fb.cell = c.index;
      fb.inputs = Eigen::MatrixXd::Zero(2, 4);
      fb.labels = (i == 2 && s == 2) ? std::vector<int>{0, 1, 1, 1} : std::vector<int>{0, 0, 0, 0};
      set.cells.push_back(fb);
    }
  const TrainingEvalTable t = training_evaluation(m, set);
  CHECK(t.min == 25.0);
  CHECK(t.max == 100.0);
  CHECK(t.median == 100.0);
  CHECK(t.mean == doctest::Approx(81.25));
  CHECK(t.perfect_fnns == 3);
  CHECK(t.total_fnns == 4);
  CHECK(t.error_free_cells == 1);
  CHECK(t.total_cells == 2);
  const std::string report = format_training_report(t, "T_h1");
  CHECK(report.find("perfect_fnns = 3/4\n") != std::string::npos);
  CHECK(report.find("cell 2 1 2 = 25.000\n") != std::string::npos);

  set.cells.pop_back();
  CHECK_THROWS_AS(training_evaluation(m, set), PartialModelError);
}
