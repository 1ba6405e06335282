// Apache License, Version 2.0, refer to LICENSE.txt

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "geotopics/query.hpp"
#include "oracles.hpp"
#include "toy_models.hpp"

using namespace geotopics;

TEST_CASE("conditional_feature_distribution") {
  auto domains = toys::make_domains(4, 3);
  SUBCASE("single topic ignores the location") {
    auto model = toys::make_model(1, domains);
    model.topics[0].eta[kFeatureCategory] << 0.9, -0.3, 0.0, 0.4;
    const Eigen::VectorXd beta =
        beta_from_deviation(model.mu[kFeatureCategory], model.topics[0].eta[kFeatureCategory]);
    for (const Eigen::Vector2d& l : {Eigen::Vector2d{0.0, 0.0}, Eigen::Vector2d{2.0, -1.0}}) {
      const Eigen::VectorXd gamma = conditional_feature_distribution(model, kFeatureCategory, l);
      CHECK((gamma - beta).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("a locally dominant topic pins the conditional") {
    auto model = toys::make_model(2, domains);
    model.topics[0].location.mean = {0.0, 0.0};
    model.topics[0].location.cov = 1e-4 * Eigen::Matrix2d::Identity();
    model.topics[1].location.mean = {5.0, 0.0};
    model.topics[0].eta[kFeatureCategory] << 2.0, 0.0, -1.0, 0.0;
    const Eigen::VectorXd b0 =
        beta_from_deviation(model.mu[kFeatureCategory], model.topics[0].eta[kFeatureCategory]);
    const Eigen::VectorXd gamma =
        conditional_feature_distribution(model, kFeatureCategory, {0.0, 0.0});
    CHECK((gamma - b0).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("two-topic toy matches the direct oracle") {
    auto model = toys::make_model(2, domains);
    model.theta << 0.55, 0.45;
    model.topics[0].location.mean = {-1.0, 0.2};
    model.topics[1].location.mean = {1.0, -0.4};
    model.topics[1].location.cov = Eigen::Vector2d(1.8, 0.6).asDiagonal();
    model.topics[0].eta[kFeatureCategory] << 0.5, -0.5, 0.1, 0.0;
    model.topics[1].eta[kFeatureCategory] << -0.2, 0.7, 0.0, 0.3;
    for (const Eigen::Vector2d& l :
         {Eigen::Vector2d{0.0, 0.0}, Eigen::Vector2d{0.8, 0.3}, Eigen::Vector2d{-1.5, -0.2}}) {
      const Eigen::VectorXd ours = conditional_feature_distribution(model, kFeatureCategory, l);
      const Eigen::VectorXd oracle = oracles::direct_gamma(model, kFeatureCategory, l);
      CHECK((ours - oracle).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(ours.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("far outside the support is an error") {
    auto model = toys::make_model(1, domains);
    CHECK_THROWS_AS(conditional_feature_distribution(model, kFeatureCategory, {1e5, 1e5}),
                    DomainError);
  }
}

TEST_CASE("marginal_feature_distribution") {
  auto domains = toys::make_domains(2, 3);
  SUBCASE("single topic returns beta") {
    auto model = toys::make_model(1, domains);
    model.topics[0].eta[kFeatureCategory] << 0.8, 0.0;
    const Eigen::VectorXd beta =
        beta_from_deviation(model.mu[kFeatureCategory], model.topics[0].eta[kFeatureCategory]);
    CHECK((marginal_feature_distribution(model, kFeatureCategory) - beta).cwiseAbs().maxCoeff() <
          1e-12);
  }
  SUBCASE("mixture of one-hot topics") {
    auto model = toys::make_model(2, domains);
    model.topics[0].eta[kFeatureCategory] = toys::near_one_hot_eta(2, 0, 40.0);
    model.topics[1].eta[kFeatureCategory] = toys::near_one_hot_eta(2, 1, 40.0);
    const Eigen::VectorXd p = marginal_feature_distribution(model, kFeatureCategory);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("most_likely_value ties resolve by domain order") {
  auto domains = toys::make_domains(3, 2);
  auto model = toys::make_model(1, domains);
  SUBCASE("plain argmax") {
    model.topics[0].eta[kFeatureCategory] << 0.0, 1.2, 0.0;
    const auto [value, prob] = most_likely_value(model, kFeatureCategory, {0.0, 0.0});
    CHECK(value == 1);
    CHECK(prob > 0.5);
  }
  SUBCASE("uniform conditional picks the first value") {
    const auto [value, prob] = most_likely_value(model, kFeatureCategory, {0.0, 0.0});
    CHECK(value == 0);
    CHECK(prob == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("distinctiveness ratios") {
  auto domains = toys::make_domains(3, 2);
  SUBCASE("single topic means no distinctiveness") {
    auto model = toys::make_model(1, domains);
    model.topics[0].eta[kFeatureCategory] << 0.4, -0.1, 0.0;
    const Eigen::VectorXd r = distinctiveness_ratio(model, kFeatureCategory, {0.3, 0.3});
    for (int j = 0; j < 3; ++j) CHECK(r[j] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("ratio is gamma over marginal, componentwise") {
    auto model = toys::make_model(2, domains);
    model.theta << 0.3, 0.7;
    model.topics[0].location.mean = {-1.0, 0.0};
    model.topics[1].location.mean = {1.0, 0.0};
    model.topics[0].eta[kFeatureCategory] << 1.0, 0.0, -0.5;
    model.topics[1].eta[kFeatureCategory] << -0.6, 0.8, 0.0;
    const Eigen::Vector2d l{-0.7, 0.1};
    const Eigen::VectorXd gamma = oracles::direct_gamma(model, kFeatureCategory, l);
    Eigen::VectorXd marginal = Eigen::VectorXd::Zero(3);
    for (int z = 0; z < 2; ++z) {
      marginal += model.theta[z] *
                  oracles::naive_beta(model.mu[kFeatureCategory],
                                      model.topics[static_cast<std::size_t>(z)].eta[kFeatureCategory]);
    }
    const Eigen::VectorXd r = distinctiveness_ratio(model, kFeatureCategory, l);
    for (int j = 0; j < 3; ++j) {
      CHECK(r[j] == doctest::Approx(gamma[j] / marginal[j]).epsilon(1e-9));
    }
  }
  SUBCASE("a rare local value scores a large ratio") {
    // A tiny morning-heavy topic inside a big evening-heavy city: the local
    // conditional is ~0.3 while the city-wide probability is ~0.01.
    auto model = toys::make_model(2, domains);
    model.theta << 0.011, 0.989;
    model.topics[0].location.mean = {0.0, 0.0};
    model.topics[0].location.cov = 0.04 * Eigen::Matrix2d::Identity();
    model.topics[1].location.mean = {4.1, 0.0};
    model.topics[1].location.cov = 4.0 * Eigen::Matrix2d::Identity();
    model.topics[0].eta[kFeatureTimeOfDay] = toys::near_one_hot_eta(6, 0, 30.0);
    model.topics[1].eta[kFeatureTimeOfDay] = toys::near_one_hot_eta(6, 3, 30.0);

    // Location chosen so the tiny topic carries ~30% of the posterior.
    Eigen::Vector2d l{0.5, 0.0};
    const Eigen::VectorXd gamma = conditional_feature_distribution(model, kFeatureTimeOfDay, l);
    const Eigen::VectorXd p = marginal_feature_distribution(model, kFeatureTimeOfDay);
    const Eigen::VectorXd r = distinctiveness_ratio(model, kFeatureTimeOfDay, l);
    CHECK(p[0] == doctest::Approx(0.011).epsilon(0.01));
    CHECK(r[0] == doctest::Approx(gamma[0] / p[0]).epsilon(1e-9));
    CHECK(r[0] > 10.0);
    const auto [value, ratio] = most_distinctive_value(model, kFeatureTimeOfDay, l);
    CHECK(value == 0);
    CHECK(ratio == doctest::Approx(r[0]));
  }
}

TEST_CASE("default_grid construction") {
  SUBCASE("from venues on the unit square") {
    Dataset ds;
    ds.domains = toys::make_domains(2, 2);
    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
      ds.venues.push_back(
          toys::make_venue({rng.uniform(), rng.uniform()}, 0, {{0, 1.0}}));
    }
    const GridSpec grid = default_grid(ds);
    CHECK(grid.nx == 100);
    CHECK(grid.min_x < 0.05);
    CHECK(grid.max_x > 0.95);
    CHECK(grid.min_x > -0.2);
    CHECK(grid.max_x < 1.2);
  }
  SUBCASE("from a single-topic model") {
    auto model = toys::make_model(1, toys::make_domains(2, 2));
    model.topics[0].location.mean = {2.0, -1.0};
    const GridSpec grid = default_grid(model);
    CHECK(grid.min_x <= -1.0);
    CHECK(grid.max_x >= 5.0);
    CHECK(grid.min_y <= -4.0);
    CHECK(grid.max_y >= 2.0);
  }
  SUBCASE("grid mass approximates the analytic box mass") {
    auto model = toys::make_model(2, toys::make_domains(2, 2));
    model.topics[0].location.mean = {-1.0, 0.5};
    model.topics[0].location.cov = Eigen::Vector2d(0.8, 1.1).asDiagonal();
    model.topics[1].location.mean = {1.5, -0.5};
    model.topics[1].location.cov = Eigen::Vector2d(1.3, 0.6).asDiagonal();
    const GridSpec grid = default_grid(model);
    double grid_mass = 0.0;
    for (int iy = 0; iy < grid.ny; ++iy) {
      for (int ix = 0; ix < grid.nx; ++ix) {
        grid_mass += location_mixture_density(model, grid.cell_center(ix, iy)) * grid.cell_area();
      }
    }
    double analytic = 0.0;
    for (int z = 0; z < 2; ++z) {
      const auto& t = model.topics[static_cast<std::size_t>(z)];
      analytic += model.theta[z] *
                  oracles::diag_gauss_rect_mass(t.location.mean, t.location.cov(0, 0),
                                                t.location.cov(1, 1), grid.min_x, grid.max_x,
                                                grid.min_y, grid.max_y);
    }
    CHECK(grid_mass == doctest::Approx(analytic).epsilon(0.02));
  }
  SUBCASE("degenerate extent is an error") {
    Dataset ds;
    ds.domains = toys::make_domains(2, 2);
    for (int i = 0; i < 5; ++i) {
      ds.venues.push_back(toys::make_venue({1.0, 1.0}, 0, {{0, 1.0}}));
    }
    CHECK_THROWS_AS(default_grid(ds), DomainError);
  }
}

TEST_CASE("render_heatmap") {
  auto domains = toys::make_domains(3, 2);
  SUBCASE("single topic paints one label everywhere") {
    auto model = toys::make_model(1, domains);
    model.topics[0].eta[kFeatureCategory] << 0.0, 1.0, 0.0;
    const GridSpec grid = default_grid(model, 20, 20);
    const HeatmapLayer layer = render_heatmap(model, kFeatureCategory, grid, HeatmapMode::Likely);
    for (const auto& cell : layer.cells) CHECK(cell.value_index == 1);

    const HeatmapLayer ratios =
        render_heatmap(model, kFeatureCategory, grid, HeatmapMode::Distinctive);
    for (const auto& cell : ratios.cells) CHECK(cell.score == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("east/west topics switch labels at the bisector") {
    auto model = toys::make_model(2, domains);
    model.topics[0].location.mean = {-1.0, 0.0};
    model.topics[1].location.mean = {1.0, 0.0};
    model.topics[0].eta[kFeatureCategory] = toys::near_one_hot_eta(3, 0, 25.0);
    model.topics[1].eta[kFeatureCategory] = toys::near_one_hot_eta(3, 1, 25.0);
    GridSpec grid;
    grid.min_x = -3.0;
    grid.max_x = 3.0;
    grid.min_y = -1.0;
    grid.max_y = 1.0;
    grid.nx = 60;
    grid.ny = 10;
    const HeatmapLayer layer = render_heatmap(model, kFeatureCategory, grid, HeatmapMode::Likely);
    for (const auto& cell : layer.cells) {
      const double x = layer.grid.cell_center(cell.ix, cell.iy)[0];
      if (x < -grid.cell_width()) CHECK(cell.value_index == 0);
      if (x > grid.cell_width()) CHECK(cell.value_index == 1);
    }
  }
  SUBCASE("csv export carries labels and 17-digit numbers") {
    auto model = toys::make_model(1, domains);
    const GridSpec grid = default_grid(model, 3, 2);
    const HeatmapLayer layer = render_heatmap(model, kFeatureCategory, grid, HeatmapMode::Likely);
    std::ostringstream os;
    write_heatmap_csv(layer, model.domains, os);
    const std::string text = os.str();
    CHECK(text.rfind("x,y,value_label,score,density\n", 0) == 0);
    CHECK(text.find("c0") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 6);
  }
}

TEST_CASE("conditional expectation over the grid matches the marginal") {
  auto domains = toys::make_domains(4, 2);
  auto model = toys::make_model(3, domains);
  model.theta << 0.5, 0.3, 0.2;
  model.topics[0].location.mean = {-2.0, 0.0};
  model.topics[1].location.mean = {2.0, 1.0};
  model.topics[2].location.mean = {0.0, -2.0};
  model.topics[0].eta[kFeatureCategory] << 1.0, -0.5, 0.0, 0.0;
  model.topics[1].eta[kFeatureCategory] << -0.5, 1.0, 0.2, 0.0;
  model.topics[2].eta[kFeatureCategory] << 0.0, 0.0, 1.2, -0.7;

  const GridSpec grid = default_grid(model);
  const Eigen::VectorXd marginal = marginal_feature_distribution(model, kFeatureCategory);
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(4);
  double mass = 0.0;
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const Eigen::Vector2d l = grid.cell_center(ix, iy);
      const double p = location_mixture_density(model, l);
      weighted += p * conditional_feature_distribution(model, kFeatureCategory, l);
      mass += p;
    }
  }
  weighted /= mass;
  for (int x = 0; x < 4; ++x) {
    if (marginal[x] >= 0.01) {
      CHECK(std::abs(weighted[x] - marginal[x]) / marginal[x] < 0.01);
    }
  }
}
