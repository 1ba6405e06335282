// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef GEOTOPICS_GAUSSIAN_HPP
#define GEOTOPICS_GAUSSIAN_HPP

#include <Eigen/Dense>

#include "geotopics/rng.hpp"

namespace geotopics {

// Bivariate Gaussian over planar coordinates (degrees at city scale).
struct Gaussian2D {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

// Eigenvalue floor for covariance matrices (sigma_floor^2).
inline constexpr double kCovarianceFloor = 1e-8;
// An SPD check failing by more than this is an error, not a repair.
inline constexpr double kSpdRepairTolerance = 1e-10;

// Symmetrizes and clamps eigenvalues up to the floor. Eigenvalues below
// -kSpdRepairTolerance indicate a real defect and throw.
Eigen::Matrix2d ensure_spd(const Eigen::Matrix2d& cov);

bool is_spd(const Eigen::Matrix2d& cov);

double log_density(const Gaussian2D& g, const Eigen::Vector2d& point);

inline double density(const Gaussian2D& g, const Eigen::Vector2d& point) {
  return std::exp(log_density(g, point));
}

double squared_mahalanobis(const Gaussian2D& g, const Eigen::Vector2d& point);

Eigen::Vector2d sample(const Gaussian2D& g, Rng& rng);

}  // namespace geotopics

#endif  // GEOTOPICS_GAUSSIAN_HPP
