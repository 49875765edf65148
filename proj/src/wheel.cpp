#include <cmath>
#include <numbers>

#include "modfnn/decimal.hpp"
#include "modfnn/error.hpp"
#include "modfnn/evaluation.hpp"

namespace modfnn {

namespace {

double spoke_angle(int c, int classes) { return 2.0 * std::numbers::pi * c / classes; }

std::string color_of(int label, int classes) {
  return "hsl(" + std::to_string(360 * label / std::max(classes, 1)) + ",70%,45%)";
}

}  // namespace

std::pair<double, double> wheel_point(const Eigen::VectorXd& probs) {
  const auto classes = static_cast<int>(probs.size());
  double x = 0.0, y = 0.0;
  for (int c = 0; c < classes; ++c) {
    x += probs(c) * std::cos(spoke_angle(c, classes));
    y += probs(c) * std::sin(spoke_angle(c, classes));
  }
  return {x, y};
}

WheelPlot confusion_wheel(const FnnParams& params, const FeaturedBatch& fb) {
  WheelPlot plot;
  plot.classes = params.arch.output_size();
  for (int c = 0; c < plot.classes; ++c)
    plot.spokes.emplace_back(std::cos(spoke_angle(c, plot.classes)), std::sin(spoke_angle(c, plot.classes)));
  if (fb.size() == 0) return plot;

  const Eigen::MatrixXd probs = forward_batch(params, fb.inputs);
  for (Eigen::Index t = 0; t < probs.cols(); ++t) {
    WheelPoint pt;
    pt.id = fb.ids.empty() ? std::to_string(t) : fb.ids[static_cast<std::size_t>(t)];
    std::tie(pt.x, pt.y) = wheel_point(probs.col(t));
    pt.truth = fb.labels[static_cast<std::size_t>(t)];
    Eigen::Index best = 0;
    probs.col(t).maxCoeff(&best);
    pt.predicted = static_cast<int>(best);
    pt.misclassified = pt.predicted != pt.truth;
    double diff = std::atan2(pt.y, pt.x) - spoke_angle(pt.truth, plot.classes);
    diff = std::remainder(diff, 2.0 * std::numbers::pi);
    pt.outside_sector = std::abs(diff) > std::numbers::pi / plot.classes;
    plot.points.push_back(std::move(pt));
  }
  return plot;
}

std::string render_wheel_svg(const WheelPlot& plot, const std::string& title) {
  constexpr double kCenter = 500.0;
  constexpr double kRadius = 450.0;
  auto px = [](double v) { return format_fixed(kCenter + kRadius * v, 3); };
  auto py = [](double v) { return format_fixed(kCenter - kRadius * v, 3); };

  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"1000\" "
      "viewBox=\"0 0 1000 1000\">\n";
  out += "<title>" + title + "</title>\n";
  out += "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" fill=\"white\"/>\n";
  out += "<circle cx=\"500\" cy=\"500\" r=\"450\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  for (int c = 0; c < plot.classes; ++c) {
    const auto [sx, sy] = plot.spokes[static_cast<std::size_t>(c)];
    out += "<line x1=\"500\" y1=\"500\" x2=\"" + px(sx) + "\" y2=\"" + py(sy) +
           "\" stroke=\"" + color_of(c, plot.classes) + "\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + px(1.06 * sx) + "\" y=\"" + py(1.06 * sy) +
           "\" font-size=\"16\" text-anchor=\"middle\" dominant-baseline=\"middle\">" +
           std::to_string(c) + "</text>\n";
  }
  for (const auto& pt : plot.points) {
    out += "<circle cx=\"" + px(pt.x) + "\" cy=\"" + py(pt.y) + "\" r=\"" +
           (pt.misclassified ? "6" : "4") + "\" fill=\"" + color_of(pt.truth, plot.classes) + "\"";
    if (pt.misclassified) out += " stroke=\"black\" stroke-width=\"2\"";
    out += "/>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string wheel_csv(const WheelPlot& plot) {
  std::string out = "sample_id,x,y,true,pred,outside_sector\n";
  for (const auto& pt : plot.points)
    out += pt.id + "," + format_fixed(pt.x, 6) + "," + format_fixed(pt.y, 6) + "," +
           std::to_string(pt.truth) + "," + std::to_string(pt.predicted) + "," +
           (pt.outside_sector ? "1" : "0") + "\n";
  return out;
}

}  // namespace modfnn
