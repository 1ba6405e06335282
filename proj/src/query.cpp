// Apache License, Version 2.0, refer to LICENSE.txt

#include "geotopics/query.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace geotopics {

namespace {

// log(theta_z) + log N_z(l) per topic.
Eigen::VectorXd topic_log_weights(const ModelInstance& model, const Eigen::Vector2d& l) {
  Eigen::VectorXd w(model.k);
  for (int z = 0; z < model.k; ++z) {
    w[z] = std::log(std::max(model.theta[z], 1e-300)) +
           log_density(model.topics[static_cast<std::size_t>(z)].location, l);
  }
  return w;
}

Eigen::MatrixXd beta_matrix(const ModelInstance& model, int feature) {
  const int m = model.domains.at(feature).size();
  Eigen::MatrixXd beta(model.k, m);
  for (int z = 0; z < model.k; ++z) {
    beta.row(z) = beta_from_deviation(model.mu[static_cast<std::size_t>(feature)],
                                      model.topics[static_cast<std::size_t>(z)].eta[static_cast<std::size_t>(feature)])
                      .transpose();
  }
  return beta;
}

int argmax_first(const Eigen::VectorXd& v) {
  int arg = 0;
  for (Eigen::Index j = 1; j < v.size(); ++j) {
    if (v[j] > v[arg]) arg = static_cast<int>(j);
  }
  return arg;
}

}  // namespace

Eigen::VectorXd conditional_feature_distribution(const ModelInstance& model, int feature,
                                                 const Eigen::Vector2d& l) {
  if (!l.allFinite()) throw DomainError("conditional_feature_distribution: non-finite location");
  const Eigen::VectorXd logw = topic_log_weights(model, l);
  const double shift = logw.maxCoeff();
  if (shift < -700.0) {
    throw DomainError("location outside model support");
  }
  Eigen::VectorXd w = (logw.array() - shift).exp();
  w /= w.sum();
  Eigen::VectorXd gamma = beta_matrix(model, feature).transpose() * w;
  gamma /= gamma.sum();
  return gamma;
}

Eigen::VectorXd marginal_feature_distribution(const ModelInstance& model, int feature) {
  return beta_matrix(model, feature).transpose() * model.theta;
}

std::pair<int, double> most_likely_value(const ModelInstance& model, int feature,
                                         const Eigen::Vector2d& l) {
  const Eigen::VectorXd gamma = conditional_feature_distribution(model, feature, l);
  const int arg = argmax_first(gamma);
  return {arg, gamma[arg]};
}

Eigen::VectorXd distinctiveness_ratio(const ModelInstance& model, int feature,
                                      const Eigen::Vector2d& l) {
  const Eigen::VectorXd gamma = conditional_feature_distribution(model, feature, l);
  const Eigen::VectorXd marginal = marginal_feature_distribution(model, feature);
  if (marginal.minCoeff() <= 0.0) {
    throw DomainError("distinctiveness_ratio: marginal has zero mass");
  }
  return gamma.array() / marginal.array();
}

std::pair<int, double> most_distinctive_value(const ModelInstance& model, int feature,
                                              const Eigen::Vector2d& l) {
  const Eigen::VectorXd r = distinctiveness_ratio(model, feature, l);
  const int arg = argmax_first(r);
  return {arg, r[arg]};
}

namespace {

GridSpec padded_grid(double min_x, double max_x, double min_y, double max_y, int nx, int ny) {
  const double pad_x = 0.05 * (max_x - min_x);
  const double pad_y = 0.05 * (max_y - min_y);
  GridSpec grid;
  grid.min_x = min_x - pad_x;
  grid.max_x = max_x + pad_x;
  grid.min_y = min_y - pad_y;
  grid.max_y = max_y + pad_y;
  grid.nx = nx;
  grid.ny = ny;
  if (!(grid.max_x > grid.min_x) || !(grid.max_y > grid.min_y)) {
    throw DomainError("default_grid: degenerate extent");
  }
  if (nx < 2 || ny < 2) throw DomainError("default_grid: resolution must be at least 2x2");
  return grid;
}

double percentile(std::vector<double>& values, double p) {
  std::sort(values.begin(), values.end());
  const double idx = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
  const std::size_t hi = std::min(values.size() - 1, lo + 1);
  const double frac = idx - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

GridSpec default_grid(const ModelInstance& model, int nx, int ny) {
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -min_x, min_y = min_x, max_y = -min_x;
  for (const auto& topic : model.topics) {
    const double sx = 3.0 * std::sqrt(topic.location.cov(0, 0));
    const double sy = 3.0 * std::sqrt(topic.location.cov(1, 1));
    min_x = std::min(min_x, topic.location.mean[0] - sx);
    max_x = std::max(max_x, topic.location.mean[0] + sx);
    min_y = std::min(min_y, topic.location.mean[1] - sy);
    max_y = std::max(max_y, topic.location.mean[1] + sy);
  }
  return padded_grid(min_x, max_x, min_y, max_y, nx, ny);
}

GridSpec default_grid(const Dataset& ds, int nx, int ny) {
  if (ds.size() == 0) throw DomainError("default_grid: empty dataset");
  std::vector<double> xs, ys;
  xs.reserve(ds.venues.size());
  ys.reserve(ds.venues.size());
  for (const auto& v : ds.venues) {
    xs.push_back(v.location[0]);
    ys.push_back(v.location[1]);
  }
  const double min_x = percentile(xs, 0.01);
  const double max_x = percentile(xs, 0.99);
  const double min_y = percentile(ys, 0.01);
  const double max_y = percentile(ys, 0.99);
  return padded_grid(min_x, max_x, min_y, max_y, nx, ny);
}

double location_mixture_density(const ModelInstance& model, const Eigen::Vector2d& l) {
  double p = 0.0;
  for (int z = 0; z < model.k; ++z) {
    p += model.theta[z] * density(model.topics[static_cast<std::size_t>(z)].location, l);
  }
  return p;
}

HeatmapLayer render_heatmap(const ModelInstance& model, int feature, const GridSpec& grid,
                            HeatmapMode mode, int threads) {
  HeatmapLayer layer;
  layer.grid = grid;
  layer.feature = feature;
  layer.mode = mode;
  layer.cells.resize(static_cast<std::size_t>(grid.cell_count()));
  const Eigen::VectorXd marginal = marginal_feature_distribution(model, feature);

  parallel_for(static_cast<std::size_t>(grid.cell_count()), threads, [&](std::size_t idx) {
    const int ix = static_cast<int>(idx) % grid.nx;
    const int iy = static_cast<int>(idx) / grid.nx;
    const Eigen::Vector2d l = grid.cell_center(ix, iy);
    HeatmapCell cell;
    cell.ix = ix;
    cell.iy = iy;
    cell.density = location_mixture_density(model, l);
    Eigen::VectorXd score;
    try {
      score = conditional_feature_distribution(model, feature, l);
      if (mode == HeatmapMode::Distinctive) {
        score = (score.array() / marginal.array()).matrix();
      }
      cell.value_index = argmax_first(score);
      cell.score = score[cell.value_index];
    } catch (const DomainError&) {
      // Cell far outside the model support: no value, zero score.
      cell.value_index = -1;
      cell.score = 0.0;
    }
    layer.cells[idx] = cell;
  });
  return layer;
}

void write_heatmap_csv(const HeatmapLayer& layer, const FeatureDomains& domains,
                       std::ostream& out) {
  const auto& labels = domains.at(layer.feature).labels;
  out << "x,y,value_label,score,density\n";
  char buf[128];
  for (const auto& cell : layer.cells) {
    const Eigen::Vector2d l = layer.grid.cell_center(cell.ix, cell.iy);
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,", l[0], l[1]);
    out << buf;
    out << (cell.value_index >= 0 ? labels[static_cast<std::size_t>(cell.value_index)] : "");
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", cell.score, cell.density);
    out << buf;
  }
}

}  // namespace geotopics
