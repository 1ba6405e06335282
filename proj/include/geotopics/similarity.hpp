// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef GEOTOPICS_SIMILARITY_HPP
#define GEOTOPICS_SIMILARITY_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "geotopics/model.hpp"
#include "geotopics/query.hpp"

namespace geotopics {

struct WeightedRegionSet {
  std::vector<Region> regions;
  std::string provenance;  // "model", "grid-a", or "merged"
};

// Precomputed per-cell quantities for a (model, feature, grid) pair on each
// side: psi(x, l) = sum_z N_z(l) beta_z(x) theta_z, its conditional
// gamma(x | l) = psi / p(l), and the cell centers. The two models may carry
// different value sets for the feature (two cities observe different
// categories and users); the cached columns are aligned on the shared labels,
// since a value absent from the other model can never agree. Built once,
// then read-only.
class SimilarityContext {
 public:
  SimilarityContext(const ModelInstance& model_a, const ModelInstance& model_b, int feature,
                    const GridSpec& grid_a, const GridSpec& grid_b, int threads = 1);

  struct Side {
    GridSpec grid;
    Eigen::MatrixXd cell_centers;  // cells x 2
    Eigen::MatrixXd psi;           // cells x |shared labels|, label-aligned
    Eigen::MatrixXd gamma;         // cells x |shared labels|, label-aligned
    double cell_area = 0.0;
  };

  const Side& side(int i) const { return i == 0 ? a_ : b_; }
  int feature() const { return feature_; }
  const std::vector<std::string>& shared_labels() const { return shared_labels_; }

  // Gaussian densities at the cell centers of one side, plus the covered mass
  // (density * cell area summed). Mass below 0.5 means the region falls
  // outside the grid and is an error.
  Eigen::VectorXd region_densities(int side_index, const Gaussian2D& g) const;

 private:
  Side a_, b_;
  int feature_ = 0;
  std::vector<std::string> shared_labels_;
};

// psi(x, l) for one model.
double joint_feature_location(const ModelInstance& model, int feature, int value,
                              const Eigen::Vector2d& l);

// Probability that venues drawn at random locations inside the two regions
// agree on the feature. Discrete double sum with the Gaussian cell weights
// renormalized per grid, so the result stays a probability under truncation.
double condsim(const Gaussian2D& g1, const Gaussian2D& g2, const SimilarityContext& ctx);

// Expected product of region densities and feature agreement for venues
// drawn from the two whole-city models. Cell areas only; no renormalization.
double jointsim(const Gaussian2D& g1, const Gaussian2D& g2, const SimilarityContext& ctx);

// Moment-matched Gaussian of the two-component mixture with proportions
// (w_a, w_b); weight adds.
Region gaussian_moment_merge(const Region& a, const Region& b);

// The k topic Gaussians, weighted by theta.
WeightedRegionSet model_base_regions(const ModelInstance& model);

// Isotropic Gaussians tiling the model's default grid box. Each has 1-sigma
// ellipse area equal to 1/a of the median topic ellipse area; spacing is
// 2 sigma; weights 1/count.
WeightedRegionSet grid_base_regions(const ModelInstance& model, double a);

struct ExploreCandidate {
  std::vector<int> bases1, bases2;  // merged base indices per side
  double score = 0.0;
};

struct ExploreResult {
  Region g1, g2;
  std::vector<int> bases1, bases2;
  double score = 0.0;
  std::vector<ExploreCandidate> trace;  // retrieved candidates, in pop order
};

enum class SimilarityMeasure { Jointsim, Condsim };

// Best-first search for the similarity-maximizing region pair: phase 1 scores
// all base pairs, phase 2 runs up to R Retrieve-Update-Expand loops, merging
// via gaussian_moment_merge and never re-merging an already-included base.
// jointsim is the measure that makes sense here (it rewards covered mass);
// the measure stays swappable for experiments.
ExploreResult geo_explore(const SimilarityContext& ctx, const WeightedRegionSet& bases1,
                          const WeightedRegionSet& bases2, int R = 5,
                          SimilarityMeasure measure = SimilarityMeasure::Jointsim);

struct BestPair {
  int i = -1, j = -1;
  double score = 0.0;
};

// Exact condsim maximization over the Cartesian product of the two base sets;
// ties resolved by the lowest index pair.
BestPair all_pairs_condsim(const SimilarityContext& ctx, const WeightedRegionSet& bases1,
                           const WeightedRegionSet& bases2);

}  // namespace geotopics

#endif  // GEOTOPICS_SIMILARITY_HPP
