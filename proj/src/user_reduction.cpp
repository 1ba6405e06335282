// Apache License, Version 2.0, refer to LICENSE.txt

#include "geotopics/user_reduction.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

namespace geotopics {

UserVenueMatrix build_user_venue_matrix(const Dataset& ds) {
  const int n_users = ds.domains.at(kFeatureUsers).size();
  if (n_users == 0) throw DomainError("build_user_venue_matrix: no users feature values");
  UserVenueMatrix m;
  m.counts = Eigen::MatrixXd::Zero(n_users, ds.size());
  for (int v = 0; v < ds.size(); ++v) {
    for (const auto& [u, n] : ds.venues[static_cast<std::size_t>(v)].counts[kFeatureUsers]) {
      m.counts(u, v) = n;
    }
  }
  return m;
}

Eigen::MatrixXd top_right_singular_vectors(const UserVenueMatrix& m, int d) {
  const int n_users = m.n_users();
  if (d < 1 || d > n_users) {
    throw DomainError("top_right_singular_vectors: d must be in [1, n_users]");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m.counts, Eigen::ComputeThinU);
  const Eigen::MatrixXd& u = svd.matrixU();
  const Eigen::VectorXd& sv = svd.singularValues();
  const int available = static_cast<int>(u.cols());

  Eigen::MatrixXd vectors = Eigen::MatrixXd::Zero(n_users, d);
  const double rank_tol = sv.size() > 0 ? 1e-12 * std::max(1.0, sv[0]) : 0.0;
  int filled = 0;
  for (int j = 0; j < d && j < available; ++j) {
    if (sv[j] <= rank_tol) break;
    vectors.col(j) = u.col(j);
    ++filled;
  }
  if (filled < d) {
    std::fprintf(stderr,
                 "warning: requested %d singular vectors but rank is %d; "
                 "remaining vectors zero-filled\n",
                 d, filled);
  }
  // Sign convention: largest-magnitude component positive (smallest index on
  // magnitude ties).
  for (int j = 0; j < filled; ++j) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < n_users; ++i) {
      const double a = std::abs(vectors(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (vectors(arg, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }
  return vectors;
}

UserGrouping assign_user_groups(const Eigen::MatrixXd& vectors) {
  UserGrouping g;
  g.d = static_cast<int>(vectors.cols());
  g.singular_vectors = vectors;
  g.assignment.resize(static_cast<std::size_t>(vectors.rows()));
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    int arg = 0;
    double best = vectors(i, 0);
    for (Eigen::Index j = 1; j < vectors.cols(); ++j) {
      if (vectors(i, j) > best) {
        best = vectors(i, j);
        arg = static_cast<int>(j);
      }
    }
    g.assignment[static_cast<std::size_t>(i)] = arg;
  }
  return g;
}

Dataset apply_grouping(const Dataset& ds, const UserGrouping& grouping) {
  const int n_users = ds.domains.at(kFeatureUsers).size();
  if (static_cast<int>(grouping.assignment.size()) != n_users) {
    throw DomainError("apply_grouping: grouping does not cover the users domain");
  }
  for (int g : grouping.assignment) {
    if (g < 0 || g >= grouping.d) throw DomainError("apply_grouping: group index out of range");
  }

  Dataset out = ds;
  auto& users_domain = out.domains.features[kFeatureUsers];
  users_domain.labels.clear();
  for (int g = 0; g < grouping.d; ++g) users_domain.labels.push_back(std::to_string(g));

  for (auto& v : out.venues) {
    SparseCounts grouped;
    for (const auto& [u, n] : v.counts[kFeatureUsers]) {
      const int g = grouping.assignment[static_cast<std::size_t>(u)];
      auto it = std::lower_bound(grouped.begin(), grouped.end(), g,
                                 [](const auto& p, int j) { return p.first < j; });
      if (it != grouped.end() && it->first == g) {
        it->second += n;
      } else {
        grouped.insert(it, {g, n});
      }
    }
    v.counts[kFeatureUsers] = std::move(grouped);
  }
  out.user_grouping = grouping.assignment;
  out.user_grouping_d = grouping.d;
  return out;
}

Dataset reduce_users(const Dataset& ds, int d) {
  const UserVenueMatrix m = build_user_venue_matrix(ds);
  const int capped = std::min(d, m.n_users());
  const Eigen::MatrixXd vectors = top_right_singular_vectors(m, capped);
  return apply_grouping(ds, assign_user_groups(vectors));
}

}  // namespace geotopics
