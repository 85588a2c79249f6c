#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsstitch/dataset.hpp"
#include "dsstitch/gaussian_graph.hpp"
#include "dsstitch/simulation.hpp"

namespace dsstitch {

/// 2D workspace plot: demonstration trajectories (teal) with red starts
/// and green attractors, optionally overlaid with graph ellipses/edges
/// (orange) and rollouts (red).
class SvgPlot {
 public:
  SvgPlot(const BoundingBox& box, int width = 900, int height = 900);

  void add_dataset(const DemonstrationSet& set);
  void add_graph(const GaussianGraph& graph);
  void add_rollout(const std::vector<Vec>& positions);
  void add_marker(const Vec& position, const std::string& color,
                  double radius = 5.0);

  void write(const std::string& path) const;

 private:
  double px(double x) const;
  double py(double y) const;
  void polyline(const std::vector<Vec>& pts, const std::string& color,
                double width, double opacity);
  void ellipse(const Vec& mean, const Mat& cov, double n_sigma,
               const std::string& color, double opacity);
  void arrow(const Vec& from, const Vec& to, const std::string& color,
             double width, double opacity);

  double min_x_, min_y_, scale_;
  int width_, height_;
  std::vector<std::string> elements_;
};

}  // namespace dsstitch
