// Apache License, Version 2.0, refer to LICENSE.txt

#include "geotopics/gaussian.hpp"

#include <cmath>

#include "geotopics/common.hpp"

namespace geotopics {

Eigen::Matrix2d ensure_spd(const Eigen::Matrix2d& cov) {
  Eigen::Matrix2d sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
  Eigen::Vector2d ev = es.eigenvalues();
  if (ev.minCoeff() < -kSpdRepairTolerance) {
    throw DomainError("covariance is not positive definite");
  }
  if (ev.minCoeff() >= kCovarianceFloor) return sym;
  ev = ev.cwiseMax(kCovarianceFloor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

bool is_spd(const Eigen::Matrix2d& cov) {
  if (std::abs(cov(0, 1) - cov(1, 0)) > 1e-9 * (1.0 + cov.cwiseAbs().maxCoeff())) {
    return false;
  }
  return cov(0, 0) > 0.0 && cov.determinant() > 0.0;
}

double log_density(const Gaussian2D& g, const Eigen::Vector2d& point) {
  const double det = g.cov.determinant();
  if (!(det > 0.0) || !(g.cov(0, 0) > 0.0)) {
    throw DomainError("log_density: covariance is not SPD");
  }
  const Eigen::Vector2d d = point - g.mean;
  // 2x2 inverse, written out.
  const double quad = (g.cov(1, 1) * d[0] * d[0] - 2.0 * g.cov(0, 1) * d[0] * d[1] +
                       g.cov(0, 0) * d[1] * d[1]) /
                      det;
  return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
}

double squared_mahalanobis(const Gaussian2D& g, const Eigen::Vector2d& point) {
  const double det = g.cov.determinant();
  if (!(det > 0.0)) throw DomainError("squared_mahalanobis: singular covariance");
  const Eigen::Vector2d d = point - g.mean;
  return (g.cov(1, 1) * d[0] * d[0] - 2.0 * g.cov(0, 1) * d[0] * d[1] +
          g.cov(0, 0) * d[1] * d[1]) /
         det;
}

Eigen::Vector2d sample(const Gaussian2D& g, Rng& rng) {
  Eigen::LLT<Eigen::Matrix2d> llt(g.cov);
  if (llt.info() != Eigen::Success) {
    llt.compute(ensure_spd(g.cov));
    if (llt.info() != Eigen::Success) throw DomainError("sample: covariance is not SPD");
  }
  return g.mean + llt.matrixL() * rng.normal2();
}

}  // namespace geotopics
