// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef GEOTOPICS_MODEL_HPP
#define GEOTOPICS_MODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "geotopics/data.hpp"
#include "geotopics/gaussian.hpp"

namespace geotopics {

// One mixture component: a spatial Gaussian plus, per categorical feature,
// a deviation vector eta from the city-wide log-probabilities mu.
struct TopicParams {
  Gaussian2D location;
  std::vector<Eigen::VectorXd> eta;  // one dense vector per feature
};

struct ModelInstance {
  int k = 0;
  Eigen::VectorXd theta;               // length k, sums to 1
  std::vector<TopicParams> topics;     // size k
  std::vector<Eigen::VectorXd> mu;     // per feature, log-probabilities
  FeatureDomains domains;
  double lambda = 1.0;                 // L1 coefficient used in training
  nlohmann::json metadata;             // seed, grouping d, provenance
};

// A weighted spatial region: model topic, grid cell, or merged Gaussian.
struct Region {
  Gaussian2D gaussian;
  double weight = 1.0;
};

// beta = softmax(mu + eta), computed with max subtraction. eta = 0 gives the
// global distribution exp(mu).
Eigen::VectorXd beta_from_deviation(const Eigen::VectorXd& mu, const Eigen::VectorXd& eta);
Eigen::VectorXd log_beta_from_deviation(const Eigen::VectorXd& mu, const Eigen::VectorXd& eta);

inline double location_log_density(const TopicParams& topic, const Eigen::Vector2d& l) {
  return log_density(topic.location, l);
}

// log sum_z theta_z N(loc; c_z, Sigma_z) prod_i prod_j beta_z^(i)[j]^n, via
// log-sum-exp over topics.
double venue_log_likelihood(const ModelInstance& model, const Venue& v);

struct DatasetLogLikelihood {
  double total = 0.0;
  double mean = 0.0;
};
DatasetLogLikelihood dataset_log_likelihood(const ModelInstance& model, const Dataset& ds);

// Data log-likelihood plus the log-priors that vary with the parameters:
// -lambda * ||eta||_1 per topic and feature, and the Jeffreys covariance
// term -2*log det(Sigma_z) per topic (the prior whose exact MAP update is
// the M-step's "+4" denominator). Uniform priors contribute constants and
// are omitted.
double penalized_objective(const ModelInstance& model, const Dataset& ds);

// How many values each venue draws for a categorical feature when sampling.
// Fixed n, or 1 + Geometric so the count is always >= 1 with the given mean.
struct CountRule {
  enum class Kind { Fixed, Geometric };
  Kind kind = Kind::Fixed;
  double value = 1.0;  // fixed count, or mean for the geometric rule

  static CountRule fixed(double n) { return {Kind::Fixed, n}; }
  static CountRule geometric(double mean) { return {Kind::Geometric, mean}; }
};

// Draws M venues from the model: topic ~ theta, location ~ N(c_z, Sigma_z),
// then N_i i.i.d. values per categorical feature (category always draws one).
// The same rule is shared by the check-in derived features unless a
// per-feature vector is given. Deterministic under seed.
Dataset sample_dataset(const ModelInstance& model, int num_venues, const CountRule& rule,
                       std::uint64_t seed);
Dataset sample_dataset(const ModelInstance& model, int num_venues,
                       const std::vector<CountRule>& rules_per_feature, std::uint64_t seed);

// Versioned JSON model file (.geotopics.json). Round-trips all parameters
// exactly; invariants are re-validated on load.
void save_model(const ModelInstance& model, const std::string& path);
ModelInstance load_model(const std::string& path);

void validate_model(const ModelInstance& model);

}  // namespace geotopics

#endif  // GEOTOPICS_MODEL_HPP
