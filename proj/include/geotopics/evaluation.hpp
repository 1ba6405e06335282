// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef GEOTOPICS_EVALUATION_HPP
#define GEOTOPICS_EVALUATION_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "geotopics/model.hpp"
#include "geotopics/similarity.hpp"
#include "geotopics/trainer.hpp"

namespace geotopics {

struct AblationResult {
  std::string feature;  // feature name, or "location"
  double full_log_likelihood = 0.0;     // full model, on all data
  double ablated_log_likelihood = 0.0;  // clamped retrain, on all data
  double drop_total = 0.0;              // full - ablated
  double drop_per_venue = 0.0;
  int k = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

struct FeatureMetrics {
  std::string feature;
  double mean_entropy = 0.0;  // mean beta entropy across topics, nats
  double mean_jsd = 0.0;      // mean JSD(beta_z, exp(mu)) across topics, nats
};

struct MetricsReport {
  std::vector<FeatureMetrics> features;
  double heldout_mean_log_likelihood = 0.0;
  int k = 0;
  double lambda = 0.0;
};

// H = -sum beta_j ln beta_j, with 0 ln 0 := 0.
double beta_entropy(const Eigen::VectorXd& beta);
double mean_feature_entropy(const ModelInstance& model, int feature);

// 0.5 KL(p || (p+q)/2) + 0.5 KL(q || (p+q)/2), natural log.
double jsd(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
double mean_jsd_from_city(const ModelInstance& model, int feature);

// Retrains with eta of the feature clamped to zero (same split, k, lambda and
// init seed) and reports the log-likelihood drop over all the data. A
// pretrained full model may be passed to avoid re-fitting it.
AblationResult ablate_categorical(const Dataset& ds, const TrainingConfig& cfg, int feature,
                                  const ModelInstance* full_model = nullptr);

// Retrains with every topic's location density replaced by the fixed mixture
// of the full model's Gaussians (weights theta); categorical parameters
// re-fit.
AblationResult ablate_location(const Dataset& ds, const TrainingConfig& cfg,
                               const ModelInstance* full_model = nullptr);

struct ContributionsReport {
  // One row per (feature, seed); `ranked` orders features by mean drop,
  // largest first.
  std::vector<AblationResult> rows;
  std::vector<std::string> ranked;
};

// All five ablations (four categorical features plus location) under one
// configuration, repeated across the given seeds.
ContributionsReport feature_contributions(const Dataset& ds, const TrainingConfig& cfg,
                                          const std::vector<std::uint64_t>& seeds = {});

// Smallest scaled ML-covariance Gaussian containing every point: the scale is
// the least s >= 1 putting all squared Mahalanobis distances at most 2.
Region fit_enclosing_gaussian(const std::vector<Eigen::Vector2d>& points);

// Trains with topic Gaussians frozen to the imported regions (theta, eta
// free) and reports held-out likelihood plus per-feature entropy/JSD.
MetricsReport compare_fixed_regions(const Dataset& ds, const WeightedRegionSet& regions,
                                    const TrainingConfig& cfg);

// Metrics of an already-trained model evaluated on the given data.
MetricsReport model_metrics(const ModelInstance& model, const Dataset& heldout);

}  // namespace geotopics

#endif  // GEOTOPICS_EVALUATION_HPP
