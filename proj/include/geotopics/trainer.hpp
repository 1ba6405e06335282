// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef GEOTOPICS_TRAINER_HPP
#define GEOTOPICS_TRAINER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "geotopics/model.hpp"

namespace geotopics {

// Per-venue posterior topic distribution, M x k, rows sum to 1.
using Responsibilities = Eigen::MatrixXd;

struct EtaSolverConfig {
  int max_inner_iters = 200;
  double inner_rel_tol = 1e-6;
};

struct TrainingConfig {
  int k = 1;
  double lambda = 1.0;
  int max_em_iters = 200;
  double em_rel_tol = 1e-6;  // relative change of the penalized objective
  EtaSolverConfig eta_solver;
  std::uint64_t init_seed = 0;
  std::string init_scheme = "kmeans++";
  int threads = 1;
};

struct EmIterationStats {
  int iteration = 0;
  double penalized_objective = 0.0;
  double data_log_likelihood = 0.0;
  int reinitialized_topics = 0;
};

struct EmTrace {
  std::vector<EmIterationStats> iterations;
  bool converged = false;
};

// Training-time overrides used by the ablation and fixed-region studies.
struct EmOptions {
  // Features whose eta stays clamped to zero in every M-step.
  std::vector<int> clamp_eta_features;
  // Freeze topic Gaussians to these (theta, eta still free).
  std::optional<std::vector<Gaussian2D>> frozen_gaussians;
  // Replace every topic's location density by the fixed mixture of
  // `mixture_components` with `mixture_weights`.
  bool shared_location_mixture = false;
  std::vector<Gaussian2D> mixture_components;
  Eigen::VectorXd mixture_weights;
  // Start from a converged model's theta/eta (and Gaussians, unless replaced
  // above). Needed when the location signal is removed: from a cold start all
  // topics then score identically and EM sits at an exactly symmetric
  // fixpoint.
  std::optional<ModelInstance> warm_start;
};

// mu_j = log((count_j + eps) / (total + eps*m)); counts are total occurrences
// across all venues' count vectors for the feature.
Eigen::VectorXd compute_global_log_probs(const Dataset& ds, int feature, double eps = 0.5);

Responsibilities e_step(const ModelInstance& model, const Dataset& ds);

struct MixtureStats {
  Eigen::VectorXd theta;
  std::vector<Eigen::Vector2d> centers;
  std::vector<Eigen::Matrix2d> covariances;  // floored SPD
  std::vector<int> empty_topics;             // responsibility mass < 1e-12
};

// theta_z ~ sum_d q_d(z); c_z the responsibility-weighted mean; Sigma_z the
// weighted scatter divided by (sum_d q_d(z) + 4), the Jeffreys correction.
MixtureStats m_step_mixture(const Responsibilities& resp, const Dataset& ds);

// The concave subproblem for one (topic, feature): maximize
//   F(eta) = sum_j w_j log beta_j(eta) - lambda ||eta||_1
// by proximal gradient ascent with soft-thresholding and backtracking.
// Exact zeros from the proximal operator are preserved.
Eigen::VectorXd solve_eta(const Eigen::VectorXd& weighted_counts, const Eigen::VectorXd& mu,
                          double lambda, const Eigen::VectorXd& warm_start,
                          const EtaSolverConfig& cfg);

double eta_objective(const Eigen::VectorXd& weighted_counts, const Eigen::VectorXd& mu,
                     double lambda, const Eigen::VectorXd& eta);

// Per-topic eta update for one feature, weighted by responsibilities.
std::vector<Eigen::VectorXd> m_step_eta(const Responsibilities& resp, const Dataset& ds,
                                        int feature, double lambda, const Eigen::VectorXd& mu,
                                        const std::vector<Eigen::VectorXd>& warm_start,
                                        const EtaSolverConfig& cfg = {});

struct TrainResult {
  ModelInstance model;
  EmTrace trace;
};

TrainResult run_em(const Dataset& ds, const TrainingConfig& cfg, const EmOptions& options = {});

struct GridSearchEntry {
  int k = 0;
  double lambda = 0.0;
  double train_mean_log_likelihood = 0.0;
  double test_mean_log_likelihood = 0.0;
};

struct GridSearchReport {
  std::vector<GridSearchEntry> entries;
  int selected = -1;  // index into entries
};

struct GridSearchResult {
  ModelInstance best_model;
  EmTrace best_trace;
  GridSearchReport report;
};

// 80/20 split by cfg.init_seed, one training run per (k, lambda), selection
// by test mean log-likelihood; ties prefer smaller k, then smaller lambda.
GridSearchResult grid_search(const Dataset& ds, const std::vector<int>& ks,
                             const std::vector<double>& lambdas, const TrainingConfig& cfg);

inline const std::vector<int>& default_grid_ks() {
  static const std::vector<int> ks = {5, 10, 20, 35, 50, 55};
  return ks;
}
inline const std::vector<double>& default_grid_lambdas() {
  static const std::vector<double> ls = {0.1, 1.0, 10.0};
  return ls;
}

}  // namespace geotopics

#endif  // GEOTOPICS_TRAINER_HPP
