#include "dsstitch/svg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dsstitch/errors.hpp"

namespace dsstitch {

namespace {
constexpr double kMargin = 40.0;

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}
}  // namespace

SvgPlot::SvgPlot(const BoundingBox& box, int width, int height)
    : width_(width), height_(height) {
  const double span_x = std::max(box.hi[0] - box.lo[0], 1e-9);
  const double span_y = std::max(box.hi[1] - box.lo[1], 1e-9);
  scale_ = std::min((width - 2 * kMargin) / span_x,
                    (height - 2 * kMargin) / span_y);
  min_x_ = box.lo[0];
  min_y_ = box.lo[1];
}

double SvgPlot::px(double x) const { return kMargin + (x - min_x_) * scale_; }
double SvgPlot::py(double y) const {
  return height_ - kMargin - (y - min_y_) * scale_;
}

void SvgPlot::polyline(const std::vector<Vec>& pts, const std::string& color,
                       double width, double opacity) {
  if (pts.size() < 2) return;
  std::ostringstream ss;
  ss << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
     << num(width) << "\" stroke-opacity=\"" << num(opacity) << "\" points=\"";
  for (const auto& p : pts) ss << num(px(p[0])) << ',' << num(py(p[1])) << ' ';
  ss << "\"/>";
  elements_.push_back(ss.str());
}

void SvgPlot::ellipse(const Vec& mean, const Mat& cov, double n_sigma,
                      const std::string& color, double opacity) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  const Vec vals = eig.eigenvalues().cwiseMax(0.0);
  const double rx = n_sigma * std::sqrt(vals[1]) * scale_;
  const double ry = n_sigma * std::sqrt(vals[0]) * scale_;
  const double angle =
      std::atan2(eig.eigenvectors()(1, 1), eig.eigenvectors()(0, 1)) * 180.0 /
      M_PI;
  std::ostringstream ss;
  ss << "<ellipse cx=\"" << num(px(mean[0])) << "\" cy=\"" << num(py(mean[1]))
     << "\" rx=\"" << num(rx) << "\" ry=\"" << num(ry) << "\" fill=\"" << color
     << "\" fill-opacity=\"" << num(opacity) << "\" transform=\"rotate("
     << num(-angle) << ' ' << num(px(mean[0])) << ' ' << num(py(mean[1]))
     << ")\"/>";
  elements_.push_back(ss.str());
}

void SvgPlot::arrow(const Vec& from, const Vec& to, const std::string& color,
                    double width, double opacity) {
  const double x1 = px(from[0]), y1 = py(from[1]);
  const double x2 = px(to[0]), y2 = py(to[1]);
  std::ostringstream ss;
  ss << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\""
     << num(x2) << "\" y2=\"" << num(y2) << "\" stroke=\"" << color
     << "\" stroke-width=\"" << num(width) << "\" stroke-opacity=\""
     << num(opacity) << "\"/>";
  // Arrowhead: two short strokes at the tip.
  const double dx = x2 - x1, dy = y2 - y1;
  const double len = std::hypot(dx, dy);
  if (len > 1e-9) {
    const double ux = dx / len, uy = dy / len;
    const double size = 6.0;
    for (double side : {1.0, -1.0}) {
      const double hx = x2 - size * (ux + side * 0.5 * uy);
      const double hy = y2 - size * (uy - side * 0.5 * ux);
      ss.str("");
      ss << "<line x1=\"" << num(x2) << "\" y1=\"" << num(y2) << "\" x2=\""
         << num(hx) << "\" y2=\"" << num(hy) << "\" stroke=\"" << color
         << "\" stroke-width=\"" << num(width) << "\" stroke-opacity=\""
         << num(opacity) << "\"/>";
      elements_.push_back(ss.str());
    }
  }
}

void SvgPlot::add_dataset(const DemonstrationSet& set) {
  if (set.dimension != 2)
    throw ValidationError("plotting supports d=2 only");
  for (const auto& demo : set.demonstrations) {
    for (const auto& traj : demo.trajectories) {
      std::vector<Vec> pts;
      pts.reserve(traj.points.size());
      for (const auto& p : traj.points) pts.push_back(p.position);
      polyline(pts, "#2a9d8f", 1.5, 0.8);
      if (!pts.empty()) add_marker(pts.front(), "#d62728", 5.0);
    }
    add_marker(demo.attractor, "#2ca02c", 6.0);
  }
}

void SvgPlot::add_graph(const GaussianGraph& graph) {
  for (const auto& v : graph.vertices) {
    if (v.reversed) continue;  // counterparts share the same ellipse
    ellipse(v.component.mean, v.component.covariance, 2.0, "#f4a261", 0.15);
    ellipse(v.component.mean, v.component.covariance, 1.0, "#f4a261", 0.3);
  }
  for (int i = 0; i < graph.vertex_count(); ++i)
    for (const auto& [j, w] : graph.adjacency[i])
      arrow(graph.vertices[i].component.mean,
            graph.vertices[j].component.mean, "#e76f51", 1.0, 0.5);
}

void SvgPlot::add_rollout(const std::vector<Vec>& positions) {
  polyline(positions, "#d62728", 2.0, 0.9);
}

void SvgPlot::add_marker(const Vec& position, const std::string& color,
                         double radius) {
  std::ostringstream ss;
  ss << "<circle cx=\"" << num(px(position[0])) << "\" cy=\""
     << num(py(position[1])) << "\" r=\"" << num(radius) << "\" fill=\""
     << color << "\"/>";
  elements_.push_back(ss.str());
}

void SvgPlot::write(const std::string& path) const {
  std::ofstream file(path);
  if (!file) throw ValidationError("cannot write " + path);
  file << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
       << "\" height=\"" << height_ << "\">\n";
  file << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& el : elements_) file << el << '\n';
  file << "</svg>\n";
}

}  // namespace dsstitch
