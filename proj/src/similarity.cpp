// Apache License, Version 2.0, refer to LICENSE.txt

#include "geotopics/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>

namespace geotopics {

namespace {

// Columns selected and ordered by the shared label list. The gamma
// normalizer stays the full per-model p(l); only the cached columns shrink.
SimilarityContext::Side build_side(const ModelInstance& model, int feature, const GridSpec& grid,
                                   const std::vector<int>& columns, int threads) {
  SimilarityContext::Side side;
  side.grid = grid;
  side.cell_area = grid.cell_area();
  const int cells = grid.cell_count();
  const int m = model.domains.at(feature).size();

  side.cell_centers.resize(cells, 2);
  Eigen::MatrixXd topic_density(cells, model.k);  // N_z(l)
  parallel_for(static_cast<std::size_t>(cells), threads, [&](std::size_t idx) {
    const int ix = static_cast<int>(idx) % grid.nx;
    const int iy = static_cast<int>(idx) / grid.nx;
    const Eigen::Vector2d l = grid.cell_center(ix, iy);
    side.cell_centers.row(static_cast<Eigen::Index>(idx)) = l.transpose();
    for (int z = 0; z < model.k; ++z) {
      topic_density(static_cast<Eigen::Index>(idx), z) =
          density(model.topics[static_cast<std::size_t>(z)].location, l);
    }
  });

  // psi = N * diag(theta) * B with B the per-topic beta rows.
  Eigen::MatrixXd weighted_beta(model.k, m);
  for (int z = 0; z < model.k; ++z) {
    weighted_beta.row(z) =
        model.theta[z] *
        beta_from_deviation(model.mu[static_cast<std::size_t>(feature)],
                            model.topics[static_cast<std::size_t>(z)].eta[static_cast<std::size_t>(feature)])
            .transpose();
  }
  const Eigen::MatrixXd psi_full = topic_density * weighted_beta;
  const Eigen::VectorXd p_loc = psi_full.rowwise().sum();  // = sum_z theta_z N_z(l)

  side.psi.resize(cells, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    side.psi.col(static_cast<Eigen::Index>(c)) = psi_full.col(columns[c]);
  }
  side.gamma = side.psi.array().colwise() / p_loc.array().max(1e-300);
  return side;
}

}  // namespace

SimilarityContext::SimilarityContext(const ModelInstance& model_a, const ModelInstance& model_b,
                                     int feature, const GridSpec& grid_a, const GridSpec& grid_b,
                                     int threads)
    : feature_(feature) {
  const FeatureDomain& da = model_a.domains.at(feature);
  const FeatureDomain& db = model_b.domains.at(feature);
  if (da.name != db.name) {
    throw DomainError("SimilarityContext: the two models disagree on the feature name");
  }
  std::map<std::string, int> index_b;
  for (int j = 0; j < db.size(); ++j) index_b[db.labels[static_cast<std::size_t>(j)]] = j;
  std::vector<int> cols_a, cols_b;
  for (int j = 0; j < da.size(); ++j) {
    const auto it = index_b.find(da.labels[static_cast<std::size_t>(j)]);
    if (it != index_b.end()) {
      cols_a.push_back(j);
      cols_b.push_back(it->second);
    }
  }
  if (cols_a.empty()) {
    throw DomainError("SimilarityContext: the feature domains share no values");
  }
  for (int j : cols_a) shared_labels_.push_back(da.labels[static_cast<std::size_t>(j)]);
  a_ = build_side(model_a, feature, grid_a, cols_a, threads);
  b_ = build_side(model_b, feature, grid_b, cols_b, threads);
}

Eigen::VectorXd SimilarityContext::region_densities(int side_index, const Gaussian2D& g) const {
  const Side& s = side(side_index);
  Eigen::VectorXd densities(s.cell_centers.rows());
  for (Eigen::Index i = 0; i < densities.size(); ++i) {
    densities[i] = density(g, s.cell_centers.row(i).transpose());
  }
  return densities;
}

double joint_feature_location(const ModelInstance& model, int feature, int value,
                              const Eigen::Vector2d& l) {
  if (!l.allFinite()) throw DomainError("joint_feature_location: non-finite location");
  double psi = 0.0;
  for (int z = 0; z < model.k; ++z) {
    const auto& topic = model.topics[static_cast<std::size_t>(z)];
    const Eigen::VectorXd beta = beta_from_deviation(
        model.mu[static_cast<std::size_t>(feature)], topic.eta[static_cast<std::size_t>(feature)]);
    psi += model.theta[z] * density(topic.location, l) * beta[value];
  }
  return psi;
}

namespace {

// Per-region aggregates; the double sums over cell pairs factor through the
// feature dimension, so each side contributes one m-vector and the measure is
// their dot product.
Eigen::VectorXd condsim_side_vector(const SimilarityContext& ctx, int side_index,
                                    const Gaussian2D& g) {
  const auto& s = ctx.side(side_index);
  Eigen::VectorXd w = ctx.region_densities(side_index, g) * s.cell_area;
  const double mass = w.sum();
  if (mass < 0.5) throw DomainError("region outside grid");
  w /= mass;
  return s.gamma.transpose() * w;
}

Eigen::VectorXd jointsim_side_vector(const SimilarityContext& ctx, int side_index,
                                     const Gaussian2D& g) {
  const auto& s = ctx.side(side_index);
  const Eigen::VectorXd w = ctx.region_densities(side_index, g) * s.cell_area;
  if (w.sum() < 0.5) throw DomainError("region outside grid");
  return s.psi.transpose() * w;
}

}  // namespace

double condsim(const Gaussian2D& g1, const Gaussian2D& g2, const SimilarityContext& ctx) {
  const double value =
      condsim_side_vector(ctx, 0, g1).dot(condsim_side_vector(ctx, 1, g2));
  return std::clamp(value, 0.0, 1.0);
}

double jointsim(const Gaussian2D& g1, const Gaussian2D& g2, const SimilarityContext& ctx) {
  return jointsim_side_vector(ctx, 0, g1).dot(jointsim_side_vector(ctx, 1, g2));
}

Region gaussian_moment_merge(const Region& a, const Region& b) {
  if (!(a.weight > 0.0) || !(b.weight > 0.0)) {
    throw DomainError("gaussian_moment_merge: weights must be positive");
  }
  const double w = a.weight + b.weight;
  const double pa = a.weight / w;
  const double pb = b.weight / w;
  Region merged;
  merged.weight = w;
  merged.gaussian.mean = pa * a.gaussian.mean + pb * b.gaussian.mean;
  const Eigen::Vector2d da = a.gaussian.mean - merged.gaussian.mean;
  const Eigen::Vector2d db = b.gaussian.mean - merged.gaussian.mean;
  merged.gaussian.cov = ensure_spd(pa * (a.gaussian.cov + da * da.transpose()) +
                                   pb * (b.gaussian.cov + db * db.transpose()));
  return merged;
}

WeightedRegionSet model_base_regions(const ModelInstance& model) {
  WeightedRegionSet set;
  set.provenance = "model";
  for (int z = 0; z < model.k; ++z) {
    set.regions.push_back({model.topics[static_cast<std::size_t>(z)].location, model.theta[z]});
  }
  return set;
}

WeightedRegionSet grid_base_regions(const ModelInstance& model, double a) {
  if (!(a > 0.0)) throw DomainError("grid_base_regions: a must be positive");
  std::vector<double> sizes;
  for (const auto& topic : model.topics) {
    sizes.push_back(std::sqrt(topic.location.cov.determinant()));
  }
  std::sort(sizes.begin(), sizes.end());
  const std::size_t n = sizes.size();
  const double median =
      n % 2 == 1 ? sizes[n / 2] : 0.5 * (sizes[n / 2 - 1] + sizes[n / 2]);
  // 1-sigma ellipse area pi*sigma^2 = (1/a) * pi * median(sqrt det).
  const double sigma = std::sqrt(median / a);

  const GridSpec box = default_grid(model);
  WeightedRegionSet set;
  set.provenance = "grid-a";
  // Tiles stay inside the box (a tile centered on the boundary would put
  // half its mass off every integration grid built from the same box).
  const double width = box.max_x - box.min_x;
  const double height = box.max_y - box.min_y;
  const int count_x = std::max(1, static_cast<int>(std::floor(width / (2.0 * sigma))));
  const int count_y = std::max(1, static_cast<int>(std::floor(height / (2.0 * sigma))));
  const double off_x = 0.5 * (width - 2.0 * sigma * count_x);
  const double off_y = 0.5 * (height - 2.0 * sigma * count_y);
  for (int iy = 0; iy < count_y; ++iy) {
    for (int ix = 0; ix < count_x; ++ix) {
      Region r;
      r.gaussian.mean = {box.min_x + off_x + sigma * (2.0 * ix + 1.0),
                         box.min_y + off_y + sigma * (2.0 * iy + 1.0)};
      r.gaussian.cov = sigma * sigma * Eigen::Matrix2d::Identity();
      set.regions.push_back(r);
    }
  }
  for (auto& r : set.regions) r.weight = 1.0 / static_cast<double>(set.regions.size());
  return set;
}

// --- GeoExplore -----------------------------------------------------------------

namespace {

struct HeapEntry {
  double score;
  std::uint64_t seq;  // ties pop in insertion order
  int candidate;

  bool operator<(const HeapEntry& other) const {
    if (score != other.score) return score < other.score;
    return seq > other.seq;
  }
};

struct Candidate {
  Region g1, g2;
  std::vector<int> b1, b2;  // sorted base indices merged into each side
  Eigen::VectorXd v1, v2;   // jointsim side vectors
  double score = 0.0;
};

}  // namespace

ExploreResult geo_explore(const SimilarityContext& ctx, const WeightedRegionSet& bases1,
                          const WeightedRegionSet& bases2, int R, SimilarityMeasure measure) {
  if (bases1.regions.empty() || bases2.regions.empty()) {
    throw DomainError("geo_explore: base region sets must be non-empty");
  }
  auto side_vector = [&](int side_index, const Gaussian2D& g) {
    return measure == SimilarityMeasure::Jointsim ? jointsim_side_vector(ctx, side_index, g)
                                                  : condsim_side_vector(ctx, side_index, g);
  };

  // Side vectors for all base regions.
  std::vector<Eigen::VectorXd> base_v1, base_v2;
  for (const auto& r : bases1.regions) base_v1.push_back(side_vector(0, r.gaussian));
  for (const auto& r : bases2.regions) base_v2.push_back(side_vector(1, r.gaussian));

  std::vector<Candidate> candidates;
  std::priority_queue<HeapEntry> heap;
  std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
  std::uint64_t seq = 0;
  int best = -1;

  auto push_candidate = [&](Candidate cand) {
    const auto key = std::make_pair(cand.b1, cand.b2);
    if (!seen.insert(key).second) return;
    cand.score = cand.v1.dot(cand.v2);
    candidates.push_back(std::move(cand));
    const int idx = static_cast<int>(candidates.size()) - 1;
    heap.push({candidates[static_cast<std::size_t>(idx)].score, seq++, idx});
    if (best < 0 || candidates[static_cast<std::size_t>(idx)].score >
                        candidates[static_cast<std::size_t>(best)].score) {
      best = idx;
    }
  };

  // Phase 1: all base pairs (the expansion of the empty solution).
  for (std::size_t i = 0; i < bases1.regions.size(); ++i) {
    for (std::size_t j = 0; j < bases2.regions.size(); ++j) {
      Candidate cand;
      cand.g1 = bases1.regions[i];
      cand.g2 = bases2.regions[j];
      cand.b1 = {static_cast<int>(i)};
      cand.b2 = {static_cast<int>(j)};
      cand.v1 = base_v1[i];
      cand.v2 = base_v2[j];
      push_candidate(std::move(cand));
    }
  }

  ExploreResult result;
  int pops = 0;
  while (!heap.empty() && pops < R) {
    const HeapEntry top = heap.top();
    heap.pop();
    ++pops;
    const Candidate popped = candidates[static_cast<std::size_t>(top.candidate)];
    result.trace.push_back({popped.b1, popped.b2, popped.score});

    // Expand both sides.
    std::vector<std::tuple<Region, std::vector<int>, Eigen::VectorXd>> exp1, exp2;
    exp1.emplace_back(popped.g1, popped.b1, popped.v1);
    for (int j = 0; j < static_cast<int>(bases1.regions.size()); ++j) {
      if (std::binary_search(popped.b1.begin(), popped.b1.end(), j)) continue;
      Region m = gaussian_moment_merge(popped.g1, bases1.regions[static_cast<std::size_t>(j)]);
      std::vector<int> idx = popped.b1;
      idx.insert(std::lower_bound(idx.begin(), idx.end(), j), j);
      Eigen::VectorXd v = side_vector(0, m.gaussian);
      exp1.emplace_back(std::move(m), std::move(idx), std::move(v));
    }
    exp2.emplace_back(popped.g2, popped.b2, popped.v2);
    for (int j = 0; j < static_cast<int>(bases2.regions.size()); ++j) {
      if (std::binary_search(popped.b2.begin(), popped.b2.end(), j)) continue;
      Region m = gaussian_moment_merge(popped.g2, bases2.regions[static_cast<std::size_t>(j)]);
      std::vector<int> idx = popped.b2;
      idx.insert(std::lower_bound(idx.begin(), idx.end(), j), j);
      Eigen::VectorXd v = side_vector(1, m.gaussian);
      exp2.emplace_back(std::move(m), std::move(idx), std::move(v));
    }

    for (const auto& [g1, b1, v1] : exp1) {
      for (const auto& [g2, b2, v2] : exp2) {
        if (b1 == popped.b1 && b2 == popped.b2) continue;  // the popped pair itself
        Candidate cand;
        cand.g1 = g1;
        cand.g2 = g2;
        cand.b1 = b1;
        cand.b2 = b2;
        cand.v1 = v1;
        cand.v2 = v2;
        push_candidate(std::move(cand));
      }
    }
  }

  const Candidate& winner = candidates[static_cast<std::size_t>(best)];
  result.g1 = winner.g1;
  result.g2 = winner.g2;
  result.bases1 = winner.b1;
  result.bases2 = winner.b2;
  result.score = winner.score;
  return result;
}

BestPair all_pairs_condsim(const SimilarityContext& ctx, const WeightedRegionSet& bases1,
                           const WeightedRegionSet& bases2) {
  if (bases1.regions.empty() || bases2.regions.empty()) {
    throw DomainError("all_pairs_condsim: base region sets must be non-empty");
  }
  std::vector<Eigen::VectorXd> a1, a2;
  for (const auto& r : bases1.regions) a1.push_back(condsim_side_vector(ctx, 0, r.gaussian));
  for (const auto& r : bases2.regions) a2.push_back(condsim_side_vector(ctx, 1, r.gaussian));

  BestPair best;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    for (std::size_t j = 0; j < a2.size(); ++j) {
      const double s = std::clamp(a1[i].dot(a2[j]), 0.0, 1.0);
      if (best.i < 0 || s > best.score) {
        best = {static_cast<int>(i), static_cast<int>(j), s};
      }
    }
  }
  return best;
}

}  // namespace geotopics
