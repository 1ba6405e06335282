// Apache License, Version 2.0, refer to LICENSE.txt

#include "geotopics/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace geotopics {

double beta_entropy(const Eigen::VectorXd& beta) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta[j] > 0.0) h -= beta[j] * std::log(beta[j]);
  }
  return std::max(0.0, h);
}

double mean_feature_entropy(const ModelInstance& model, int feature) {
  double total = 0.0;
  for (const auto& topic : model.topics) {
    total += beta_entropy(beta_from_deviation(model.mu[static_cast<std::size_t>(feature)],
                                              topic.eta[static_cast<std::size_t>(feature)]));
  }
  return total / static_cast<double>(model.k);
}

namespace {

double kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  double d = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (p[j] > 0.0) d += p[j] * std::log(p[j] / q[j]);
  }
  return d;
}

}  // namespace

double jsd(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw DomainError("jsd: length mismatch");
  const Eigen::VectorXd mid = 0.5 * (p + q);
  return 0.5 * kl(p, mid) + 0.5 * kl(q, mid);
}

double mean_jsd_from_city(const ModelInstance& model, int feature) {
  const Eigen::VectorXd city = model.mu[static_cast<std::size_t>(feature)].array().exp();
  double total = 0.0;
  for (const auto& topic : model.topics) {
    total += jsd(beta_from_deviation(model.mu[static_cast<std::size_t>(feature)],
                                     topic.eta[static_cast<std::size_t>(feature)]),
                 city);
  }
  return total / static_cast<double>(model.k);
}

// --- ablations ----------------------------------------------------------------

namespace {

struct SplitModel {
  Dataset train;
  Dataset test;
  ModelInstance model;
};

SplitModel train_full(const Dataset& ds, const TrainingConfig& cfg,
                      const ModelInstance* provided) {
  SplitModel out;
  std::tie(out.train, out.test) = split_train_test(ds, 0.8, cfg.init_seed);
  if (provided != nullptr) {
    out.model = *provided;
  } else {
    out.model = run_em(out.train, cfg).model;
  }
  return out;
}

// Log-likelihood of a location-ablated model: the spatial factor is the fixed
// mixture g0, the categorical factor mixes over topics as usual.
double ablated_location_log_likelihood(const ModelInstance& trained,
                                       const std::vector<Gaussian2D>& components,
                                       const Eigen::VectorXd& weights, const Dataset& ds) {
  std::vector<Eigen::MatrixXd> log_beta(trained.mu.size());
  for (std::size_t i = 0; i < trained.mu.size(); ++i) {
    log_beta[i].resize(trained.k, trained.mu[i].size());
    for (int z = 0; z < trained.k; ++z) {
      log_beta[i].row(z) =
          log_beta_from_deviation(trained.mu[i],
                                  trained.topics[static_cast<std::size_t>(z)].eta[i])
              .transpose();
    }
  }
  const Eigen::VectorXd log_theta = trained.theta.array().max(1e-300).log();
  const Eigen::VectorXd log_w = weights.array().max(1e-300).log();

  std::vector<double> per_venue(ds.venues.size());
  for (std::size_t d = 0; d < ds.venues.size(); ++d) {
    const Venue& v = ds.venues[d];
    Eigen::VectorXd mix(static_cast<Eigen::Index>(components.size()));
    for (std::size_t c = 0; c < components.size(); ++c) {
      mix[static_cast<Eigen::Index>(c)] =
          log_w[static_cast<Eigen::Index>(c)] + log_density(components[c], v.location);
    }
    const double g0 = mix.maxCoeff() + std::log((mix.array() - mix.maxCoeff()).exp().sum());

    Eigen::VectorXd scores = log_theta;
    for (std::size_t i = 0; i < v.counts.size(); ++i) {
      for (const auto& [j, n] : v.counts[i]) scores += n * log_beta[i].col(j);
    }
    const double cat = scores.maxCoeff() + std::log((scores.array() - scores.maxCoeff()).exp().sum());
    per_venue[d] = g0 + cat;
  }
  return pairwise_sum(per_venue);
}

}  // namespace

AblationResult ablate_categorical(const Dataset& ds, const TrainingConfig& cfg, int feature,
                                  const ModelInstance* full_model) {
  const SplitModel full = train_full(ds, cfg, full_model);

  EmOptions options;
  options.clamp_eta_features = {feature};
  const ModelInstance ablated = run_em(full.train, cfg, options).model;

  AblationResult result;
  result.feature = ds.domains.at(feature).name;
  result.full_log_likelihood = dataset_log_likelihood(full.model, ds).total;
  result.ablated_log_likelihood = dataset_log_likelihood(ablated, ds).total;
  result.drop_total = result.full_log_likelihood - result.ablated_log_likelihood;
  result.drop_per_venue = result.drop_total / static_cast<double>(ds.size());
  result.k = cfg.k;
  result.lambda = cfg.lambda;
  result.seed = cfg.init_seed;
  return result;
}

AblationResult ablate_location(const Dataset& ds, const TrainingConfig& cfg,
                               const ModelInstance* full_model) {
  const SplitModel full = train_full(ds, cfg, full_model);

  EmOptions options;
  options.shared_location_mixture = true;
  options.mixture_weights = full.model.theta;
  for (const auto& topic : full.model.topics) options.mixture_components.push_back(topic.location);
  // With the location term shared, nothing breaks topic symmetry from a cold
  // start; re-fit the categorical parameters from the converged full model.
  options.warm_start = full.model;
  const ModelInstance ablated = run_em(full.train, cfg, options).model;

  AblationResult result;
  result.feature = "location";
  result.full_log_likelihood = dataset_log_likelihood(full.model, ds).total;
  result.ablated_log_likelihood = ablated_location_log_likelihood(
      ablated, options.mixture_components, options.mixture_weights, ds);
  result.drop_total = result.full_log_likelihood - result.ablated_log_likelihood;
  result.drop_per_venue = result.drop_total / static_cast<double>(ds.size());
  result.k = cfg.k;
  result.lambda = cfg.lambda;
  result.seed = cfg.init_seed;
  return result;
}

ContributionsReport feature_contributions(const Dataset& ds, const TrainingConfig& cfg,
                                          const std::vector<std::uint64_t>& seeds) {
  const std::vector<std::uint64_t> run_seeds = seeds.empty()
                                                   ? std::vector<std::uint64_t>{cfg.init_seed}
                                                   : seeds;
  ContributionsReport report;
  std::map<std::string, double> total_drop;
  for (std::uint64_t seed : run_seeds) {
    TrainingConfig run_cfg = cfg;
    run_cfg.init_seed = seed;
    const SplitModel full = train_full(ds, run_cfg, nullptr);
    for (int i = 0; i < ds.domains.count(); ++i) {
      AblationResult r = ablate_categorical(ds, run_cfg, i, &full.model);
      total_drop[r.feature] += r.drop_total;
      report.rows.push_back(std::move(r));
    }
    AblationResult loc = ablate_location(ds, run_cfg, &full.model);
    total_drop[loc.feature] += loc.drop_total;
    report.rows.push_back(std::move(loc));
  }
  report.ranked.reserve(total_drop.size());
  for (const auto& [name, drop] : total_drop) report.ranked.push_back(name);
  std::sort(report.ranked.begin(), report.ranked.end(),
            [&](const std::string& a, const std::string& b) {
              if (total_drop[a] != total_drop[b]) return total_drop[a] > total_drop[b];
              return a < b;
            });
  return report;
}

Region fit_enclosing_gaussian(const std::vector<Eigen::Vector2d>& points) {
  if (points.size() < 3) throw DomainError("fit_enclosing_gaussian: need at least 3 points");
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  double scale2 = 0.0;
  for (const auto& p : points) {
    const Eigen::Vector2d d = p - centroid;
    cov += d * d.transpose();
    scale2 = std::max(scale2, d.squaredNorm());
  }
  cov /= static_cast<double>(points.size());
  if (cov.determinant() <= 1e-12 * scale2 * scale2) {
    throw DomainError("fit_enclosing_gaussian: points are collinear or degenerate");
  }

  Region region;
  region.gaussian.mean = centroid;
  region.gaussian.cov = cov;
  double max_d2 = 0.0;
  for (const auto& p : points) {
    max_d2 = std::max(max_d2, squared_mahalanobis(region.gaussian, p));
  }
  const double s = std::max(1.0, max_d2 / 2.0);
  region.gaussian.cov = ensure_spd(s * cov);
  region.weight = 1.0;
  return region;
}

MetricsReport compare_fixed_regions(const Dataset& ds, const WeightedRegionSet& regions,
                                    const TrainingConfig& cfg) {
  if (regions.regions.empty()) throw DomainError("compare_fixed_regions: empty region set");
  TrainingConfig run_cfg = cfg;
  run_cfg.k = static_cast<int>(regions.regions.size());

  auto [train, test] = split_train_test(ds, 0.8, run_cfg.init_seed);
  EmOptions options;
  std::vector<Gaussian2D> frozen;
  for (const auto& r : regions.regions) frozen.push_back(r.gaussian);
  options.frozen_gaussians = std::move(frozen);
  const ModelInstance model = run_em(train, run_cfg, options).model;
  return model_metrics(model, test);
}

MetricsReport model_metrics(const ModelInstance& model, const Dataset& heldout) {
  MetricsReport report;
  report.k = model.k;
  report.lambda = model.lambda;
  for (int i = 0; i < model.domains.count(); ++i) {
    FeatureMetrics fm;
    fm.feature = model.domains.at(i).name;
    fm.mean_entropy = mean_feature_entropy(model, i);
    fm.mean_jsd = mean_jsd_from_city(model, i);
    report.features.push_back(std::move(fm));
  }
  report.heldout_mean_log_likelihood = dataset_log_likelihood(model, heldout).mean;
  return report;
}

}  // namespace geotopics
