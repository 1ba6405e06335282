// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef GEOTOPICS_QUERY_HPP
#define GEOTOPICS_QUERY_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <utility>
#include <vector>

#include "geotopics/model.hpp"

namespace geotopics {

// City-covering lattice of cell centers used for heatmaps and the similarity
// integrals.
struct GridSpec {
  double min_x = 0.0, min_y = 0.0;
  double max_x = 1.0, max_y = 1.0;
  int nx = 100, ny = 100;

  int cell_count() const { return nx * ny; }
  double cell_width() const { return (max_x - min_x) / nx; }
  double cell_height() const { return (max_y - min_y) / ny; }
  double cell_area() const { return cell_width() * cell_height(); }
  // Row-major: index = iy * nx + ix.
  Eigen::Vector2d cell_center(int ix, int iy) const {
    return {min_x + (ix + 0.5) * cell_width(), min_y + (iy + 0.5) * cell_height()};
  }
};

struct HeatmapCell {
  int ix = 0, iy = 0;
  int value_index = 0;
  double score = 0.0;    // probability (likely) or ratio (distinctive)
  double density = 0.0;  // p(loc | I) at the cell center
};

enum class HeatmapMode { Likely, Distinctive };

struct HeatmapLayer {
  GridSpec grid;
  int feature = 0;
  HeatmapMode mode = HeatmapMode::Likely;
  std::vector<HeatmapCell> cells;
};

// gamma(x | l) = sum_z N_z(l) beta_z(x) theta_z / sum_z N_z(l) theta_z,
// with the topic weights computed in log space. Throws when every topic
// density underflows ("location outside model support").
Eigen::VectorXd conditional_feature_distribution(const ModelInstance& model, int feature,
                                                 const Eigen::Vector2d& l);

// p(x | I) = sum_z theta_z beta_z(x).
Eigen::VectorXd marginal_feature_distribution(const ModelInstance& model, int feature);

// Argmax of the conditional distribution; ties resolved by domain order.
std::pair<int, double> most_likely_value(const ModelInstance& model, int feature,
                                         const Eigen::Vector2d& l);

// gamma(x|l) / p(x|I), elementwise.
Eigen::VectorXd distinctiveness_ratio(const ModelInstance& model, int feature,
                                      const Eigen::Vector2d& l);
std::pair<int, double> most_distinctive_value(const ModelInstance& model, int feature,
                                              const Eigen::Vector2d& l);

// Box: [1st, 99th] percentile of venue coordinates (dataset) or min/max of
// c_z +- 3 sigma per axis (model), padded 5% per side; 100x100 cells.
GridSpec default_grid(const ModelInstance& model, int nx = 100, int ny = 100);
GridSpec default_grid(const Dataset& ds, int nx = 100, int ny = 100);

HeatmapLayer render_heatmap(const ModelInstance& model, int feature, const GridSpec& grid,
                            HeatmapMode mode, int threads = 1);

// CSV columns: x, y, value_label, score, density.
void write_heatmap_csv(const HeatmapLayer& layer, const FeatureDomains& domains,
                       std::ostream& out);

// Mixture location density sum_z theta_z N_z(l).
double location_mixture_density(const ModelInstance& model, const Eigen::Vector2d& l);

}  // namespace geotopics

#endif  // GEOTOPICS_QUERY_HPP
