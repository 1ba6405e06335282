// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef GEOTOPICS_USER_REDUCTION_HPP
#define GEOTOPICS_USER_REDUCTION_HPP

#include <Eigen/Dense>
#include <vector>

#include "geotopics/data.hpp"

namespace geotopics {

// Users-by-venues check-in count matrix. Rows follow the users domain order,
// columns the venue order of the dataset.
struct UserVenueMatrix {
  Eigen::MatrixXd counts;  // n_users x M
  int n_users() const { return static_cast<int>(counts.rows()); }
  int n_venues() const { return static_cast<int>(counts.cols()); }
};

struct UserGrouping {
  int d = 0;
  std::vector<int> assignment;           // user index -> group in {0..d-1}
  Eigen::MatrixXd singular_vectors;      // n_users x d, sign-normalized
};

UserVenueMatrix build_user_venue_matrix(const Dataset& ds);

// Top-d user-indexed singular vectors of the users-by-venues matrix, each
// sign-normalized so its largest-magnitude component is positive. Vectors
// beyond the numerical rank are zero-filled (with a warning on stderr).
Eigen::MatrixXd top_right_singular_vectors(const UserVenueMatrix& m, int d);

// User i goes to argmax_j v_j[i]; ties to the smallest j.
UserGrouping assign_user_groups(const Eigen::MatrixXd& vectors);

// Rewrites the users feature in terms of super-users {0..d-1}; per-venue user
// counts are summed within groups, every other feature is untouched.
Dataset apply_grouping(const Dataset& ds, const UserGrouping& grouping);

// Convenience: matrix, SVD, grouping, rewrite.
Dataset reduce_users(const Dataset& ds, int d);

}  // namespace geotopics

#endif  // GEOTOPICS_USER_REDUCTION_HPP
