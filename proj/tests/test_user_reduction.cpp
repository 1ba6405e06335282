// Apache License, Version 2.0, refer to LICENSE.txt

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geotopics/user_reduction.hpp"
#include "toy_models.hpp"

using namespace geotopics;

namespace {

// n_users x n_venues count pattern -> Dataset with those user counts.
Dataset dataset_from_counts(const Eigen::MatrixXd& counts) {
  Dataset ds;
  ds.domains = toys::make_domains(2, static_cast<int>(counts.rows()));
  for (int v = 0; v < counts.cols(); ++v) {
    SparseCounts users;
    for (int u = 0; u < counts.rows(); ++u) {
      if (counts(u, v) > 0.0) users.push_back({u, counts(u, v)});
    }
    Venue venue = toys::make_venue({static_cast<double>(v), 0.0}, 0, users);
    venue.venue_id = "v" + std::to_string(v);
    ds.venues.push_back(std::move(venue));
  }
  return ds;
}

}  // namespace

TEST_CASE("build_user_venue_matrix") {
  SUBCASE("single user, single venue, three check-ins") {
    Eigen::MatrixXd counts(1, 1);
    counts << 3.0;
    const auto m = build_user_venue_matrix(dataset_from_counts(counts));
    CHECK(m.counts(0, 0) == 3.0);
  }
  SUBCASE("two disjoint blocks give a block-diagonal matrix") {
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 4);
    counts.block(0, 0, 2, 2) << 2, 1, 1, 2;
    counts.block(2, 2, 2, 2) << 3, 1, 1, 3;
    const auto m = build_user_venue_matrix(dataset_from_counts(counts));
    CHECK(m.counts == counts);
    CHECK(m.counts.block(0, 2, 2, 2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("top_right_singular_vectors basic shapes") {
  SUBCASE("identity recovers the standard basis up to order") {
    Eigen::MatrixXd counts = Eigen::MatrixXd::Identity(2, 2);
    UserVenueMatrix m{counts};
    const Eigen::MatrixXd v = top_right_singular_vectors(m, 2);
    // Columns are (permuted) standard basis vectors with positive peaks.
    for (int j = 0; j < 2; ++j) {
      CHECK(v.col(j).cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(v.col(j).maxCoeff() > 0.0);
    }
    CHECK(std::abs(v.col(0).dot(v.col(1))) < 1e-12);
  }
  SUBCASE("rank-1 matrix returns the user factor, positively normalized") {
    Eigen::VectorXd u(3), w(4);
    u << -2.0, 1.0, 0.5;  // largest-magnitude entry is negative
    w << 1.0, 2.0, 0.5, 1.5;
    UserVenueMatrix m{u * w.transpose()};
    const Eigen::MatrixXd v = top_right_singular_vectors(m, 1);
    const Eigen::VectorXd expected = -u / u.norm();  // flipped so the peak is positive
    CHECK((v.col(0) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("d beyond the rank zero-fills") {
    Eigen::VectorXd u(3), w(3);
    u << 1.0, 2.0, 3.0;
    w << 1.0, 1.0, 1.0;
    UserVenueMatrix m{u * w.transpose()};
    const Eigen::MatrixXd v = top_right_singular_vectors(m, 3);
    CHECK(v.col(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.col(1).norm() == 0.0);
    CHECK(v.col(2).norm() == 0.0);
  }
}

TEST_CASE("two-block matrix groups users by block, against the MMt oracle") {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 4);
  counts.block(0, 0, 2, 2) << 5, 2, 2, 5;
  counts.block(2, 2, 2, 2) << 4, 1, 1, 4;
  UserVenueMatrix m{counts};
  const Eigen::MatrixXd v = top_right_singular_vectors(m, 2);

  // Oracle: explicit eigen-decomposition of M M^T.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(counts * counts.transpose());
  // Top eigenvector (largest eigenvalue) lives on the first block (5,2 > 4,1),
  // the second on the other block.
  const Eigen::VectorXd top = es.eigenvectors().col(3).cwiseAbs();
  const Eigen::VectorXd second = es.eigenvectors().col(2).cwiseAbs();
  for (int j = 0; j < 2; ++j) {
    CHECK(v.col(j).cwiseAbs().maxCoeff() > 0.5);
  }
  // Same one-block support structure as the oracle vectors.
  CHECK((v.col(0).cwiseAbs() - top).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((v.col(1).cwiseAbs() - second).cwiseAbs().maxCoeff() < 1e-9);

  const UserGrouping g = assign_user_groups(v);
  CHECK(g.assignment[0] == g.assignment[1]);
  CHECK(g.assignment[2] == g.assignment[3]);
  CHECK(g.assignment[0] != g.assignment[2]);
}

TEST_CASE("assign_user_groups argmax rules") {
  SUBCASE("one vector puts everyone in group zero") {
    Eigen::MatrixXd v(3, 1);
    v << 0.5, 0.7, 0.1;
    const UserGrouping g = assign_user_groups(v);
    for (int u = 0; u < 3; ++u) CHECK(g.assignment[static_cast<std::size_t>(u)] == 0);
  }
  SUBCASE("plain argmax with smallest-index ties") {
    Eigen::MatrixXd v(2, 2);
    v << 0.9, 0.1, 0.4, 0.4;
    const UserGrouping g = assign_user_groups(v);
    CHECK(g.assignment[0] == 0);
    CHECK(g.assignment[1] == 0);  // tie -> smaller j
  }
}

TEST_CASE("apply_grouping rewrites the users feature") {
  Eigen::MatrixXd counts(3, 2);
  counts << 2, 0, 3, 1, 0, 4;
  const Dataset ds = dataset_from_counts(counts);

  SUBCASE("identity grouping only relabels") {
    UserGrouping g;
    g.d = 3;
    g.assignment = {0, 1, 2};
    const Dataset out = apply_grouping(ds, g);
    CHECK(out.domains.at(kFeatureUsers).labels == std::vector<std::string>{"0", "1", "2"});
    CHECK(out.venues[0].counts[kFeatureUsers] == ds.venues[0].counts[kFeatureUsers]);
  }
  SUBCASE("users in the same group sum their counts") {
    UserGrouping g;
    g.d = 2;
    g.assignment = {0, 0, 1};
    const Dataset out = apply_grouping(ds, g);
    // venue v0: users 0 and 1 have counts 2 and 3 -> group 0 count 5
    REQUIRE(out.venues[0].counts[kFeatureUsers].size() == 1);
    CHECK(out.venues[0].counts[kFeatureUsers][0] == std::pair<int, double>{0, 5.0});
    // total mass conserved, per venue and globally
    double before = 0.0, after = 0.0;
    for (const auto& v : ds.venues) before += counts_total(v.counts[kFeatureUsers]);
    for (const auto& v : out.venues) after += counts_total(v.counts[kFeatureUsers]);
    CHECK(before == after);
    CHECK(out.user_grouping_d == 2);
  }
  SUBCASE("uncovered users are an error") {
    UserGrouping g;
    g.d = 2;
    g.assignment = {0, 1};  // only 2 of 3 users
    CHECK_THROWS_AS(apply_grouping(ds, g), DomainError);
  }
}

TEST_CASE("grouping ignores venue column order") {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 4);
  counts.block(0, 0, 2, 2) << 5, 2, 2, 5;
  counts.block(2, 2, 2, 2) << 4, 1, 1, 4;
  Eigen::MatrixXd permuted(4, 4);
  permuted << counts.col(2), counts.col(0), counts.col(3), counts.col(1);

  const auto g1 = assign_user_groups(top_right_singular_vectors({counts}, 2));
  const auto g2 = assign_user_groups(top_right_singular_vectors({permuted}, 2));
  CHECK(g1.assignment == g2.assignment);
}

TEST_CASE("reduce_users end to end conserves mass") {
  Rng rng(6);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(12, 8);
  for (int u = 0; u < 12; ++u) {
    for (int v = 0; v < 8; ++v) {
      if (rng.uniform() < 0.4) counts(u, v) = 1.0 + static_cast<double>(rng.uniform_int(5));
    }
  }
  const Dataset ds = dataset_from_counts(counts);
  const Dataset reduced = reduce_users(ds, 3);
  CHECK(reduced.domains.at(kFeatureUsers).size() == 3);
  double before = 0.0, after = 0.0;
  for (const auto& v : ds.venues) before += counts_total(v.counts[kFeatureUsers]);
  for (const auto& v : reduced.venues) after += counts_total(v.counts[kFeatureUsers]);
  CHECK(before == doctest::Approx(after).epsilon(1e-12));
  REQUIRE(reduced.user_grouping.has_value());
  CHECK(reduced.user_grouping->size() == 12);
}
