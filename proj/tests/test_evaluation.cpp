// Apache License, Version 2.0, refer to LICENSE.txt

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geotopics/evaluation.hpp"
#include "oracles.hpp"
#include "toy_models.hpp"

using namespace geotopics;

TEST_CASE("beta_entropy closed forms") {
  CHECK(beta_entropy(Eigen::VectorXd::Constant(7, 1.0 / 7.0)) ==
        doctest::Approx(std::log(7.0)).epsilon(1e-12));
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(5);
  onehot[2] = 1.0;
  CHECK(beta_entropy(onehot) == 0.0);
  Eigen::VectorXd p(3);
  p << 0.5, 0.25, 0.25;
  CHECK(beta_entropy(p) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("jsd closed forms and oracle") {
  Eigen::VectorXd p(4), q(4);
  p << 0.1, 0.2, 0.3, 0.4;
  q << 0.4, 0.3, 0.2, 0.1;
  CHECK(jsd(p, p) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(jsd(p, q) == doctest::Approx(jsd(q, p)).epsilon(1e-12));

  Eigen::VectorXd a = Eigen::VectorXd::Zero(2), b = Eigen::VectorXd::Zero(2);
  a[0] = 1.0;
  b[1] = 1.0;
  CHECK(jsd(a, b) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Independent two-term KL computation.
  const Eigen::VectorXd mid = 0.5 * (p + q);
  double kl_pm = 0.0, kl_qm = 0.0;
  for (int j = 0; j < 4; ++j) {
    kl_pm += p[j] * std::log(p[j] / mid[j]);
    kl_qm += q[j] * std::log(q[j] / mid[j]);
  }
  CHECK(jsd(p, q) == doctest::Approx(0.5 * kl_pm + 0.5 * kl_qm).epsilon(1e-12));

  CHECK_THROWS_AS(jsd(p, Eigen::VectorXd::Constant(3, 1.0 / 3.0)), DomainError);
}

TEST_CASE("mean entropy and JSD respect their bounds on a trained model") {
  auto domains = toys::make_domains(3, 6);
  auto truth = toys::make_model(2, domains);
  truth.topics[0].location.mean = {-4.0, 0.0};
  truth.topics[1].location.mean = {4.0, 0.0};
  truth.topics[0].eta[kFeatureUsers] = toys::near_one_hot_eta(6, 0, 2.0);
  truth.topics[1].eta[kFeatureUsers] = toys::near_one_hot_eta(6, 5, 2.0);
  const Dataset ds = sample_dataset(truth, 400, CountRule::fixed(4), 10);
  TrainingConfig cfg;
  cfg.k = 2;
  cfg.init_seed = 2;
  const ModelInstance model = run_em(ds, cfg).model;
  for (int i = 0; i < domains.count(); ++i) {
    const double h = mean_feature_entropy(model, i);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(domains.at(i).size())) + 1e-12);
    const double d = mean_jsd_from_city(model, i);
    CHECK(d >= 0.0);
    CHECK(d <= std::log(2.0) + 1e-12);
  }
}

TEST_CASE("fit_enclosing_gaussian") {
  SUBCASE("unit square corners end exactly at the bound") {
    const std::vector<Eigen::Vector2d> corners = {
        {0.5, 0.5}, {0.5, -0.5}, {-0.5, 0.5}, {-0.5, -0.5}};
    const Region r = fit_enclosing_gaussian(corners);
    CHECK(r.gaussian.mean.norm() < 1e-12);
    for (const auto& p : corners) {
      CHECK(squared_mahalanobis(r.gaussian, p) == doctest::Approx(2.0).epsilon(1e-9));
    }
  }
  SUBCASE("points already inside keep the sample covariance") {
    // A regular hexagon: symmetry puts every vertex exactly at the bound, so
    // the scale factor stays 1 and the covariance is the ML covariance.
    std::vector<Eigen::Vector2d> hex;
    for (int i = 0; i < 6; ++i) {
      const double a = M_PI * i / 3.0;
      hex.push_back({2.0 * std::cos(a), 2.0 * std::sin(a)});
    }
    Eigen::Matrix2d ml = Eigen::Matrix2d::Zero();
    for (const auto& p : hex) ml += p * p.transpose();
    ml /= 6.0;
    const Region r = fit_enclosing_gaussian(hex);
    CHECK((r.gaussian.cov - ml).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("random convex polygons end with the farthest point at the bound") {
    Rng rng(14);
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<Eigen::Vector2d> pts;
      const int n = 5 + static_cast<int>(rng.uniform_int(6));
      for (int i = 0; i < n; ++i) {
        const double a = 2.0 * M_PI * i / n;
        const double radius = rng.uniform(0.5, 3.0);
        pts.push_back({radius * std::cos(a) + 1.0, radius * std::sin(a) - 2.0});
      }
      const Region r = fit_enclosing_gaussian(pts);
      double max_d2 = 0.0;
      for (const auto& p : pts) {
        const double d2 = squared_mahalanobis(r.gaussian, p);
        CHECK(d2 <= 2.0 + 1e-9);
        max_d2 = std::max(max_d2, d2);
      }
      CHECK(max_d2 == doctest::Approx(2.0).epsilon(1e-9));
    }
  }
  SUBCASE("collinear points are an error") {
    CHECK_THROWS_AS(
        fit_enclosing_gaussian({{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}}),
        DomainError);
    CHECK_THROWS_AS(fit_enclosing_gaussian({{0.0, 0.0}, {1.0, 1.0}}), DomainError);
  }
}

namespace {

// k topics with identical location Gaussians; only `users` varies.
ModelInstance users_only_truth(int k, int m_users) {
  auto model = toys::make_model(k, toys::make_domains(3, m_users));
  model.theta = Eigen::VectorXd::Constant(k, 1.0 / k);
  const int block = m_users / k;
  for (int z = 0; z < k; ++z) {
    auto& topic = model.topics[static_cast<std::size_t>(z)];
    topic.location.mean = {0.0, 0.0};
    topic.location.cov = Eigen::Matrix2d::Identity();
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(m_users, -8.0);
    for (int j = z * block; j < (z + 1) * block; ++j) eta[j] = 2.0;
    topic.eta[kFeatureUsers] = eta;
  }
  return model;
}

}  // namespace

TEST_CASE("ablating an uninformative feature costs nothing") {
  // Near-uniform counts: the lambda = 1 threshold keeps eta at exactly zero in
  // both runs, so the drop is exactly zero.
  auto truth = toys::make_model(1, toys::make_domains(3, 4));
  const Dataset ds = sample_dataset(truth, 300, CountRule::fixed(3), 42);
  TrainingConfig cfg;
  cfg.k = 1;
  cfg.lambda = 1.0;
  cfg.init_seed = 5;
  const AblationResult r = ablate_categorical(ds, cfg, kFeatureCategory);
  CHECK(r.drop_total == 0.0);
  CHECK(std::abs(r.drop_per_venue) < 0.01);
}

TEST_CASE("ablation drops isolate the planted feature") {
  const ModelInstance truth = users_only_truth(3, 12);
  const Dataset ds = sample_dataset(truth, 900, CountRule::fixed(20), 3);
  TrainingConfig cfg;
  cfg.k = 3;
  cfg.lambda = 0.1;
  cfg.init_seed = 12;

  auto [train, test] = split_train_test(ds, 0.8, cfg.init_seed);
  const ModelInstance full = run_em(train, cfg).model;

  const AblationResult users = ablate_categorical(ds, cfg, kFeatureUsers, &full);
  const AblationResult category = ablate_categorical(ds, cfg, kFeatureCategory, &full);
  const AblationResult location = ablate_location(ds, cfg, &full);

  CHECK(users.drop_total > 100.0);
  CHECK(users.drop_total > 5.0 * std::abs(category.drop_total));
  CHECK(users.drop_total > 5.0 * std::abs(location.drop_total));
  CHECK(users.drop_per_venue == doctest::Approx(users.drop_total / ds.size()));
}

TEST_CASE("location ablation is free when topics share one Gaussian") {
  const ModelInstance truth = users_only_truth(2, 8);
  const Dataset ds = sample_dataset(truth, 500, CountRule::fixed(15), 8);
  TrainingConfig cfg;
  cfg.k = 2;
  cfg.lambda = 0.1;
  cfg.init_seed = 3;
  const AblationResult r = ablate_location(ds, cfg);
  CHECK(std::abs(r.drop_per_venue) < 0.01);
}

TEST_CASE("the location drop measures location-feature coupling") {
  SUBCASE("separated topics with identical features lose nothing") {
    // The mixture factorizes: p(loc, feats) = g0(loc) p(feats), which the
    // ablated model represents exactly.
    auto truth = toys::make_model(2, toys::make_domains(3, 4));
    truth.topics[0].location.mean = {-6.0, 0.0};
    truth.topics[1].location.mean = {6.0, 0.0};
    const Dataset ds = sample_dataset(truth, 500, CountRule::fixed(3), 9);
    TrainingConfig cfg;
    cfg.k = 2;
    cfg.init_seed = 6;
    const AblationResult loc = ablate_location(ds, cfg);
    CHECK(std::abs(loc.drop_per_venue) < 0.02);
  }
  SUBCASE("separated topics with coupled features pay for the ablation") {
    auto truth = toys::make_model(2, toys::make_domains(3, 4));
    truth.topics[0].location.mean = {-6.0, 0.0};
    truth.topics[1].location.mean = {6.0, 0.0};
    truth.topics[0].eta[kFeatureUsers] = toys::near_one_hot_eta(4, 0, 6.0);
    truth.topics[1].eta[kFeatureUsers] = toys::near_one_hot_eta(4, 3, 6.0);
    const Dataset ds = sample_dataset(truth, 500, CountRule::fixed(5), 9);
    TrainingConfig cfg;
    cfg.k = 2;
    cfg.init_seed = 6;
    const AblationResult loc = ablate_location(ds, cfg);
    CHECK(loc.drop_total > 100.0);
    CHECK(loc.drop_per_venue == doctest::Approx(loc.drop_total / ds.size()));
  }
}

TEST_CASE("feature_contributions runs all five ablations") {
  const ModelInstance truth = users_only_truth(2, 8);
  const Dataset ds = sample_dataset(truth, 300, CountRule::fixed(10), 4);
  TrainingConfig cfg;
  cfg.k = 2;
  cfg.lambda = 0.1;
  cfg.init_seed = 1;
  const ContributionsReport report = feature_contributions(ds, cfg);
  CHECK(report.rows.size() == 5);
  CHECK(report.ranked.size() == 5);
  CHECK(report.ranked[0] == "users");
  const ContributionsReport again = feature_contributions(ds, cfg);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    CHECK(report.rows[i].drop_total == again.rows[i].drop_total);
  }
}

TEST_CASE("huge lambda makes every categorical ablation free") {
  const ModelInstance truth = users_only_truth(2, 8);
  const Dataset ds = sample_dataset(truth, 300, CountRule::fixed(10), 4);
  TrainingConfig cfg;
  cfg.k = 2;
  cfg.lambda = 1e6;
  cfg.init_seed = 1;
  for (int i = 0; i < ds.domains.count(); ++i) {
    const AblationResult r = ablate_categorical(ds, cfg, i);
    CHECK(std::abs(r.drop_per_venue) < 0.01);
  }
}

TEST_CASE("compare_fixed_regions") {
  auto truth = toys::make_model(2, toys::make_domains(3, 4));
  truth.topics[0].location.mean = {-5.0, 0.0};
  truth.topics[1].location.mean = {5.0, 0.0};
  truth.topics[0].eta[kFeatureCategory] = toys::near_one_hot_eta(3, 0, 2.0);
  truth.topics[1].eta[kFeatureCategory] = toys::near_one_hot_eta(3, 1, 2.0);
  const Dataset ds = sample_dataset(truth, 600, CountRule::fixed(3), 17);
  TrainingConfig cfg;
  cfg.k = 2;
  cfg.init_seed = 13;

  SUBCASE("freezing to the free model's own Gaussians costs almost nothing") {
    auto [train, test] = split_train_test(ds, 0.8, cfg.init_seed);
    const ModelInstance free_model = run_em(train, cfg).model;
    const MetricsReport free_report = model_metrics(free_model, test);
    const MetricsReport frozen_report =
        compare_fixed_regions(ds, model_base_regions(free_model), cfg);
    CHECK(std::abs(frozen_report.heldout_mean_log_likelihood -
                   free_report.heldout_mean_log_likelihood) < 0.5);
  }
  SUBCASE("one city-wide Gaussian reproduces city-wide statistics") {
    WeightedRegionSet one;
    Region r;
    r.gaussian.mean = {0.0, 0.0};
    r.gaussian.cov = 30.0 * Eigen::Matrix2d::Identity();
    one.regions = {r};
    const MetricsReport report = compare_fixed_regions(ds, one, cfg);
    REQUIRE(report.features.size() == 4);
    for (const auto& fm : report.features) {
      CHECK(fm.mean_jsd == doctest::Approx(0.0).epsilon(1e-9));
    }
  }
  SUBCASE("report schema has one entropy and one JSD row per feature") {
    const MetricsReport report = compare_fixed_regions(ds, model_base_regions(truth), cfg);
    CHECK(report.features.size() == 4);
    for (const auto& fm : report.features) {
      CHECK(fm.mean_entropy >= 0.0);
      CHECK(fm.mean_jsd >= 0.0);
    }
  }
}
