// Apache License, Version 2.0, refer to LICENSE.txt

#include "geotopics/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace geotopics {

Eigen::VectorXd compute_global_log_probs(const Dataset& ds, int feature, double eps) {
  if (feature < 0 || feature >= ds.domains.count()) {
    throw DomainError("compute_global_log_probs: unknown feature index");
  }
  const int m = ds.domains.at(feature).size();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(m);
  for (const auto& v : ds.venues) {
    for (const auto& [j, n] : v.counts[static_cast<std::size_t>(feature)]) counts[j] += n;
  }
  const double total = counts.sum();
  if (!(total > 0.0)) throw DomainError("compute_global_log_probs: zero total count");
  const double denom = total + eps * static_cast<double>(m);
  return ((counts.array() + eps) / denom).log();
}

// --- shared internals ---------------------------------------------------------

namespace {

constexpr std::size_t kReduceBlock = 256;

double log_sum_exp_row(const Eigen::VectorXd& v) {
  const double shift = v.maxCoeff();
  return shift + std::log((v.array() - shift).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  Eigen::VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

struct EStepResult {
  Eigen::MatrixXd q;               // M x k
  std::vector<double> venue_ll;    // per-venue log-likelihood
  double data_ll = 0.0;
};

// Topic scores per venue; location term comes either from per-topic Gaussians
// or from a shared per-venue value (location-ablated training).
EStepResult e_step_impl(const Dataset& ds, const Eigen::VectorXd& theta,
                        const std::vector<Gaussian2D>& gaussians,
                        const std::vector<Eigen::MatrixXd>& log_beta,
                        const std::vector<double>* shared_location_term, int threads) {
  const int k = static_cast<int>(theta.size());
  const std::size_t M = ds.venues.size();
  EStepResult out;
  out.q.resize(static_cast<Eigen::Index>(M), k);
  out.venue_ll.resize(M);

  const Eigen::VectorXd log_theta = theta.array().max(1e-300).log();

  parallel_for(M, threads, [&](std::size_t d) {
    const Venue& v = ds.venues[d];
    Eigen::VectorXd scores = log_theta;
    if (shared_location_term != nullptr) {
      scores.array() += (*shared_location_term)[d];
    } else {
      for (int z = 0; z < k; ++z) {
        scores[z] += log_density(gaussians[static_cast<std::size_t>(z)], v.location);
      }
    }
    for (std::size_t i = 0; i < v.counts.size(); ++i) {
      const Eigen::MatrixXd& table = log_beta[i];
      for (const auto& [j, n] : v.counts[i]) {
        if (j < 0 || j >= table.cols()) {
          throw DomainError("e_step: feature index outside model domain");
        }
        scores += n * table.col(j);
      }
    }
    const double lse = log_sum_exp_row(scores);
    out.venue_ll[d] = lse;
    out.q.row(static_cast<Eigen::Index>(d)) = (scores.array() - lse).exp().transpose();
  });
  out.data_ll = pairwise_sum(out.venue_ll);
  return out;
}

std::vector<Eigen::MatrixXd> build_log_beta(const std::vector<Eigen::VectorXd>& mu,
                                            const std::vector<std::vector<Eigen::VectorXd>>& eta,
                                            int k) {
  std::vector<Eigen::MatrixXd> tables(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    tables[i].resize(k, mu[i].size());
    for (int z = 0; z < k; ++z) {
      tables[i].row(z) =
          log_beta_from_deviation(mu[i], eta[i][static_cast<std::size_t>(z)]).transpose();
    }
  }
  return tables;
}

// Fixed-size blocks + pairwise combination: results do not depend on the
// thread count.
template <typename Partial, typename MakeBlock, typename Combine>
Partial blocked_reduce(std::size_t n, int threads, MakeBlock make_block, Combine combine,
                       Partial zero) {
  const std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  if (nblocks == 0) return zero;
  std::vector<Partial> partials(nblocks, zero);
  parallel_for(nblocks, threads, [&](std::size_t b) {
    const std::size_t lo = b * kReduceBlock;
    const std::size_t hi = std::min(n, lo + kReduceBlock);
    partials[b] = make_block(lo, hi);
  });
  // pairwise tree over blocks
  std::vector<Partial> level = std::move(partials);
  while (level.size() > 1) {
    std::vector<Partial> next;
    next.reserve((level.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      next.push_back(combine(level[i], level[i + 1]));
    }
    if (level.size() % 2 == 1) next.push_back(level.back());
    level = std::move(next);
  }
  return level.front();
}

Eigen::MatrixXd weighted_feature_counts(const Responsibilities& resp, const Dataset& ds,
                                        int feature, int threads) {
  const int k = static_cast<int>(resp.cols());
  const int m = ds.domains.at(feature).size();
  auto make_block = [&](std::size_t lo, std::size_t hi) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, m);
    for (std::size_t d = lo; d < hi; ++d) {
      for (const auto& [j, n] : ds.venues[d].counts[static_cast<std::size_t>(feature)]) {
        w.col(j) += n * resp.row(static_cast<Eigen::Index>(d)).transpose();
      }
    }
    return w;
  };
  auto combine = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return Eigen::MatrixXd(a + b);
  };
  return blocked_reduce<Eigen::MatrixXd>(ds.venues.size(), threads, make_block, combine,
                                         Eigen::MatrixXd::Zero(k, m));
}

}  // namespace

Responsibilities e_step(const ModelInstance& model, const Dataset& ds) {
  std::vector<std::vector<Eigen::VectorXd>> eta(model.mu.size());
  for (std::size_t i = 0; i < model.mu.size(); ++i) {
    for (const auto& topic : model.topics) eta[i].push_back(topic.eta[i]);
  }
  std::vector<Gaussian2D> gaussians;
  for (const auto& topic : model.topics) gaussians.push_back(topic.location);
  const auto tables = build_log_beta(model.mu, eta, model.k);
  return e_step_impl(ds, model.theta, gaussians, tables, nullptr, 1).q;
}

MixtureStats m_step_mixture(const Responsibilities& resp, const Dataset& ds) {
  const int k = static_cast<int>(resp.cols());
  const std::size_t M = ds.venues.size();
  if (resp.rows() != static_cast<Eigen::Index>(M)) {
    throw DomainError("m_step_mixture: responsibilities do not match dataset");
  }

  auto vec_combine = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return Eigen::VectorXd(a + b);
  };
  auto mat_combine = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return Eigen::MatrixXd(a + b);
  };

  const Eigen::VectorXd mass = blocked_reduce<Eigen::VectorXd>(
      M, 1,
      [&](std::size_t lo, std::size_t hi) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
        for (std::size_t d = lo; d < hi; ++d) s += resp.row(static_cast<Eigen::Index>(d));
        return s;
      },
      vec_combine, Eigen::VectorXd::Zero(k));

  MixtureStats out;
  out.theta = mass / mass.sum();

  const Eigen::MatrixXd moments = blocked_reduce<Eigen::MatrixXd>(
      M, 1,
      [&](std::size_t lo, std::size_t hi) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, 2);
        for (std::size_t d = lo; d < hi; ++d) {
          s += resp.row(static_cast<Eigen::Index>(d)).transpose() *
               ds.venues[d].location.transpose();
        }
        return s;
      },
      mat_combine, Eigen::MatrixXd::Zero(k, 2));

  out.centers.resize(static_cast<std::size_t>(k));
  for (int z = 0; z < k; ++z) {
    if (mass[z] < 1e-12) {
      out.empty_topics.push_back(z);
      out.centers[static_cast<std::size_t>(z)] = Eigen::Vector2d::Zero();
    } else {
      out.centers[static_cast<std::size_t>(z)] = moments.row(z).transpose() / mass[z];
    }
  }

  // Scatter around the fresh centers; flattened per-topic 2x2 blocks.
  const Eigen::MatrixXd scatter = blocked_reduce<Eigen::MatrixXd>(
      M, 1,
      [&](std::size_t lo, std::size_t hi) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, 4);
        for (std::size_t d = lo; d < hi; ++d) {
          for (int z = 0; z < k; ++z) {
            const Eigen::Vector2d diff =
                ds.venues[d].location - out.centers[static_cast<std::size_t>(z)];
            const double q = resp(static_cast<Eigen::Index>(d), z);
            s(z, 0) += q * diff[0] * diff[0];
            s(z, 1) += q * diff[0] * diff[1];
            s(z, 2) += q * diff[1] * diff[0];
            s(z, 3) += q * diff[1] * diff[1];
          }
        }
        return s;
      },
      mat_combine, Eigen::MatrixXd::Zero(k, 4));

  out.covariances.resize(static_cast<std::size_t>(k));
  for (int z = 0; z < k; ++z) {
    if (mass[z] < 1e-12) {
      out.covariances[static_cast<std::size_t>(z)] = Eigen::Matrix2d::Identity();
      continue;
    }
    Eigen::Matrix2d cov;
    // Jeffreys correction: "+4" in the denominator, kept verbatim.
    cov << scatter(z, 0), scatter(z, 1), scatter(z, 2), scatter(z, 3);
    cov /= mass[z] + 4.0;
    out.covariances[static_cast<std::size_t>(z)] = ensure_spd(cov);
  }
  return out;
}

// --- eta subproblem -----------------------------------------------------------

double eta_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& mu, double lambda,
                     const Eigen::VectorXd& eta) {
  const Eigen::VectorXd v = mu + eta;
  const double lse = log_sum_exp_row(v);
  return w.dot(v) - w.sum() * lse - lambda * eta.lpNorm<1>();
}

namespace {

double smooth_part(const Eigen::VectorXd& w, double wsum, const Eigen::VectorXd& mu,
                   const Eigen::VectorXd& eta) {
  const Eigen::VectorXd v = mu + eta;
  return w.dot(v) - wsum * log_sum_exp_row(v);
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double tau) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double a = std::abs(x[j]) - tau;
    out[j] = a > 0.0 ? (x[j] > 0.0 ? a : -a) : 0.0;
  }
  return out;
}

}  // namespace

Eigen::VectorXd solve_eta(const Eigen::VectorXd& w, const Eigen::VectorXd& mu, double lambda,
                          const Eigen::VectorXd& warm_start, const EtaSolverConfig& cfg) {
  if (w.size() != mu.size()) throw DomainError("solve_eta: dimension mismatch");
  if (lambda < 0.0) throw DomainError("solve_eta: lambda must be nonnegative");
  const double wsum = w.sum();
  if (!(wsum > 0.0)) return Eigen::VectorXd::Zero(mu.size());

  Eigen::VectorXd eta = warm_start.size() == mu.size() ? warm_start
                                                       : Eigen::VectorXd::Zero(mu.size());
  double g_cur = smooth_part(w, wsum, mu, eta);
  double f_cur = g_cur - lambda * eta.lpNorm<1>();
  if (!std::isfinite(f_cur)) throw DomainError("solve_eta: non-finite objective");

  double step = 2.0 / wsum;
  for (int it = 0; it < cfg.max_inner_iters; ++it) {
    const Eigen::VectorXd beta = softmax(mu + eta);
    const Eigen::VectorXd grad = w - wsum * beta;

    Eigen::VectorXd cand;
    double g_cand = 0.0;
    bool moved = false;
    while (true) {
      cand = soft_threshold(eta + step * grad, step * lambda);
      const Eigen::VectorXd diff = cand - eta;
      if (diff.squaredNorm() == 0.0) break;  // proximal fixed point
      g_cand = smooth_part(w, wsum, mu, cand);
      if (g_cand >= g_cur + grad.dot(diff) - diff.squaredNorm() / (2.0 * step)) {
        moved = true;
        break;
      }
      step *= 0.5;
      if (step < 1e-18) break;
    }
    if (!moved) break;

    const double f_new = g_cand - lambda * cand.lpNorm<1>();
    if (!std::isfinite(f_new)) throw DomainError("solve_eta: non-finite objective");
    eta = cand;
    g_cur = g_cand;
    const bool done = std::abs(f_new - f_cur) <= cfg.inner_rel_tol * (1.0 + std::abs(f_new));
    f_cur = f_new;
    if (done) break;
    step *= 1.5;
  }
  return eta;
}

std::vector<Eigen::VectorXd> m_step_eta(const Responsibilities& resp, const Dataset& ds,
                                        int feature, double lambda, const Eigen::VectorXd& mu,
                                        const std::vector<Eigen::VectorXd>& warm_start,
                                        const EtaSolverConfig& cfg) {
  const int k = static_cast<int>(resp.cols());
  const Eigen::MatrixXd w = weighted_feature_counts(resp, ds, feature, 1);
  std::vector<Eigen::VectorXd> eta(static_cast<std::size_t>(k));
  for (int z = 0; z < k; ++z) {
    const Eigen::VectorXd warm = warm_start.size() == static_cast<std::size_t>(k)
                                     ? warm_start[static_cast<std::size_t>(z)]
                                     : Eigen::VectorXd::Zero(mu.size());
    eta[static_cast<std::size_t>(z)] = solve_eta(w.row(z).transpose(), mu, lambda, warm, cfg);
  }
  return eta;
}

// --- EM ------------------------------------------------------------------------

namespace {

std::vector<Eigen::Vector2d> kmeanspp_centers(const Dataset& ds, int k, Rng& rng) {
  const std::size_t M = ds.venues.size();
  std::vector<Eigen::Vector2d> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(ds.venues[rng.uniform_int(M)].location);
  Eigen::VectorXd d2(static_cast<Eigen::Index>(M));
  for (std::size_t i = 0; i < M; ++i) {
    d2[static_cast<Eigen::Index>(i)] = (ds.venues[i].location - centers[0]).squaredNorm();
  }
  while (static_cast<int>(centers.size()) < k) {
    std::size_t pick;
    if (d2.sum() > 0.0) {
      pick = static_cast<std::size_t>(rng.categorical(d2));
    } else {
      pick = rng.uniform_int(M);  // all venues coincide with a chosen center
    }
    centers.push_back(ds.venues[pick].location);
    for (std::size_t i = 0; i < M; ++i) {
      d2[static_cast<Eigen::Index>(i)] =
          std::min(d2[static_cast<Eigen::Index>(i)],
                   (ds.venues[i].location - centers.back()).squaredNorm());
    }
  }
  return centers;
}

Eigen::Matrix2d global_location_covariance(const Dataset& ds) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& v : ds.venues) mean += v.location;
  mean /= static_cast<double>(ds.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& v : ds.venues) {
    const Eigen::Vector2d d = v.location - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(ds.size());
  return ensure_spd(cov);
}

}  // namespace

TrainResult run_em(const Dataset& ds, const TrainingConfig& cfg, const EmOptions& options) {
  if (cfg.k < 1) throw DomainError("run_em: k must be >= 1");
  if (ds.size() < cfg.k) throw DomainError("run_em: fewer venues than topics");
  if (cfg.lambda < 0.0) throw DomainError("run_em: lambda must be nonnegative");
  if (!(cfg.em_rel_tol > 0.0) || !(cfg.eta_solver.inner_rel_tol > 0.0)) {
    throw DomainError("run_em: tolerances must be positive");
  }
  if (cfg.init_scheme != "kmeans++") {
    throw DomainError("run_em: unknown init scheme " + cfg.init_scheme);
  }
  const int k = cfg.k;
  const int F = ds.domains.count();
  const std::size_t M = ds.venues.size();

  // mu computed once, up front, from the training data.
  std::vector<Eigen::VectorXd> mu(static_cast<std::size_t>(F));
  for (int i = 0; i < F; ++i) mu[static_cast<std::size_t>(i)] = compute_global_log_probs(ds, i);

  std::vector<bool> clamped(static_cast<std::size_t>(F), false);
  for (int i : options.clamp_eta_features) {
    if (i < 0 || i >= F) throw DomainError("run_em: bad clamp feature index");
    clamped[static_cast<std::size_t>(i)] = true;
  }

  const bool gaussians_frozen = options.frozen_gaussians.has_value();
  if (gaussians_frozen &&
      options.frozen_gaussians->size() != static_cast<std::size_t>(k)) {
    throw DomainError("run_em: frozen gaussians must match k");
  }
  if (options.shared_location_mixture &&
      (options.mixture_components.empty() ||
       options.mixture_weights.size() !=
           static_cast<Eigen::Index>(options.mixture_components.size()))) {
    throw DomainError("run_em: shared location mixture needs components and weights");
  }

  // Initialization: k-means++ centers, global covariance / k, uniform theta,
  // eta = 0.
  Rng rng(cfg.init_seed);
  const Eigen::Matrix2d global_cov = global_location_covariance(ds);
  const Eigen::Matrix2d init_cov = ensure_spd(global_cov / static_cast<double>(k));

  Eigen::VectorXd theta = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  std::vector<Gaussian2D> gaussians(static_cast<std::size_t>(k));
  if (gaussians_frozen) {
    gaussians = *options.frozen_gaussians;
    for (auto& g : gaussians) g.cov = ensure_spd(g.cov);
  } else {
    const auto centers = kmeanspp_centers(ds, k, rng);
    for (int z = 0; z < k; ++z) {
      gaussians[static_cast<std::size_t>(z)].mean = centers[static_cast<std::size_t>(z)];
      gaussians[static_cast<std::size_t>(z)].cov = init_cov;
    }
  }
  std::vector<std::vector<Eigen::VectorXd>> eta(static_cast<std::size_t>(F));
  for (int i = 0; i < F; ++i) {
    eta[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(k),
                                            Eigen::VectorXd::Zero(mu[static_cast<std::size_t>(i)].size()));
  }

  if (options.warm_start.has_value()) {
    const ModelInstance& ws = *options.warm_start;
    if (ws.k != k || ws.mu.size() != static_cast<std::size_t>(F)) {
      throw DomainError("run_em: warm start does not match k or feature arity");
    }
    theta = ws.theta;
    for (int i = 0; i < F; ++i) {
      if (clamped[static_cast<std::size_t>(i)]) continue;
      for (int z = 0; z < k; ++z) {
        if (ws.topics[static_cast<std::size_t>(z)].eta[static_cast<std::size_t>(i)].size() !=
            mu[static_cast<std::size_t>(i)].size()) {
          throw DomainError("run_em: warm start eta dimension mismatch");
        }
        eta[static_cast<std::size_t>(i)][static_cast<std::size_t>(z)] =
            ws.topics[static_cast<std::size_t>(z)].eta[static_cast<std::size_t>(i)];
      }
    }
    if (!gaussians_frozen && !options.shared_location_mixture) {
      for (int z = 0; z < k; ++z) {
        gaussians[static_cast<std::size_t>(z)] = ws.topics[static_cast<std::size_t>(z)].location;
      }
    }
  }

  // Location-ablated training: fixed per-venue mixture density, identical
  // across topics.
  std::vector<double> shared_loc;
  if (options.shared_location_mixture) {
    shared_loc.resize(M);
    const auto& comps = options.mixture_components;
    Eigen::VectorXd logw = options.mixture_weights.array().max(1e-300).log();
    parallel_for(M, cfg.threads, [&](std::size_t d) {
      Eigen::VectorXd s(static_cast<Eigen::Index>(comps.size()));
      for (std::size_t c = 0; c < comps.size(); ++c) {
        s[static_cast<Eigen::Index>(c)] =
            logw[static_cast<Eigen::Index>(c)] + log_density(comps[c], ds.venues[d].location);
      }
      shared_loc[d] = log_sum_exp_row(s);
    });
  }

  auto penalty_terms = [&]() {
    double pen = 0.0;
    for (int i = 0; i < F; ++i) {
      for (int z = 0; z < k; ++z) {
        pen -= cfg.lambda * eta[static_cast<std::size_t>(i)][static_cast<std::size_t>(z)].lpNorm<1>();
      }
    }
    if (options.shared_location_mixture) {
      for (const auto& g : options.mixture_components) {
        pen -= 2.0 * std::log(g.cov.determinant());
      }
    } else {
      for (const auto& g : gaussians) pen -= 2.0 * std::log(g.cov.determinant());
    }
    return pen;
  };

  EmTrace trace;
  double prev_obj = 0.0;
  int pending_reinits = 0;
  Eigen::MatrixXd q;

  for (int iter = 1; iter <= cfg.max_em_iters + 1; ++iter) {
    const auto tables = build_log_beta(mu, eta, k);
    EStepResult es =
        e_step_impl(ds, theta, gaussians, tables,
                    options.shared_location_mixture ? &shared_loc : nullptr, cfg.threads);
    const double obj = es.data_ll + penalty_terms();
    trace.iterations.push_back({iter, obj, es.data_ll, pending_reinits});
    pending_reinits = 0;

    if (iter >= 2 &&
        std::abs(obj - prev_obj) <= cfg.em_rel_tol * std::max(1.0, std::abs(prev_obj))) {
      trace.converged = true;
      break;
    }
    if (iter == cfg.max_em_iters + 1) break;
    prev_obj = obj;
    q = std::move(es.q);

    // M-step: mixture parameters.
    MixtureStats stats = m_step_mixture(q, ds);
    theta = stats.theta;
    if (!gaussians_frozen && !options.shared_location_mixture) {
      for (int z = 0; z < k; ++z) {
        gaussians[static_cast<std::size_t>(z)].mean = stats.centers[static_cast<std::size_t>(z)];
        gaussians[static_cast<std::size_t>(z)].cov =
            stats.covariances[static_cast<std::size_t>(z)];
      }
      if (!stats.empty_topics.empty()) {
        // Reinitialize dead topics at the worst-explained venues.
        std::vector<std::size_t> order(M);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return es.venue_ll[a] < es.venue_ll[b];
        });
        std::size_t next_worst = 0;
        for (int z : stats.empty_topics) {
          gaussians[static_cast<std::size_t>(z)].mean =
              ds.venues[order[next_worst % M]].location;
          gaussians[static_cast<std::size_t>(z)].cov = init_cov;
          for (int i = 0; i < F; ++i) {
            eta[static_cast<std::size_t>(i)][static_cast<std::size_t>(z)].setZero();
          }
          theta[z] = 1.0 / static_cast<double>(M);
          ++next_worst;
          ++pending_reinits;
        }
        theta /= theta.sum();
      }
    }

    // M-step: per-feature deviation vectors.
    for (int i = 0; i < F; ++i) {
      if (clamped[static_cast<std::size_t>(i)]) continue;
      const Eigen::MatrixXd w = weighted_feature_counts(q, ds, i, cfg.threads);
      auto& eta_i = eta[static_cast<std::size_t>(i)];
      parallel_for(static_cast<std::size_t>(k), cfg.threads, [&](std::size_t z) {
        eta_i[z] = solve_eta(w.row(static_cast<Eigen::Index>(z)).transpose(),
                             mu[static_cast<std::size_t>(i)], cfg.lambda, eta_i[z],
                             cfg.eta_solver);
      });
    }
  }

  TrainResult result;
  result.model.k = k;
  result.model.lambda = cfg.lambda;
  result.model.theta = theta;
  result.model.mu = mu;
  result.model.domains = ds.domains;
  result.model.topics.resize(static_cast<std::size_t>(k));
  for (int z = 0; z < k; ++z) {
    auto& topic = result.model.topics[static_cast<std::size_t>(z)];
    topic.location = gaussians[static_cast<std::size_t>(z)];
    for (int i = 0; i < F; ++i) {
      topic.eta.push_back(eta[static_cast<std::size_t>(i)][static_cast<std::size_t>(z)]);
    }
  }
  int reinit_total = 0;
  for (const auto& it : trace.iterations) reinit_total += it.reinitialized_topics;
  result.model.metadata = {{"seed", cfg.init_seed},
                           {"init_scheme", cfg.init_scheme},
                           {"em_iterations", trace.iterations.size()},
                           {"converged", trace.converged},
                           {"reinitialized_topics", reinit_total},
                           {"user_groups_d", ds.user_grouping_d}};
  if (!options.clamp_eta_features.empty()) {
    result.model.metadata["clamped_features"] = options.clamp_eta_features;
  }
  if (gaussians_frozen) result.model.metadata["frozen_gaussians"] = true;
  if (options.shared_location_mixture) result.model.metadata["location_ablated"] = true;
  result.trace = std::move(trace);
  return result;
}

GridSearchResult grid_search(const Dataset& ds, const std::vector<int>& ks,
                             const std::vector<double>& lambdas, const TrainingConfig& cfg) {
  if (ks.empty() || lambdas.empty()) throw DomainError("grid_search: empty grid");
  auto [train, test] = split_train_test(ds, 0.8, cfg.init_seed);

  GridSearchResult result;
  auto better = [](const GridSearchEntry& a, const GridSearchEntry& b) {
    if (a.test_mean_log_likelihood != b.test_mean_log_likelihood) {
      return a.test_mean_log_likelihood > b.test_mean_log_likelihood;
    }
    if (a.k != b.k) return a.k < b.k;
    return a.lambda < b.lambda;
  };

  for (int k : ks) {
    for (double lambda : lambdas) {
      TrainingConfig run_cfg = cfg;
      run_cfg.k = k;
      run_cfg.lambda = lambda;
      TrainResult tr = run_em(train, run_cfg);
      GridSearchEntry entry;
      entry.k = k;
      entry.lambda = lambda;
      entry.train_mean_log_likelihood = dataset_log_likelihood(tr.model, train).mean;
      entry.test_mean_log_likelihood = dataset_log_likelihood(tr.model, test).mean;
      result.report.entries.push_back(entry);
      const int idx = static_cast<int>(result.report.entries.size()) - 1;
      if (result.report.selected < 0 ||
          better(entry,
                 result.report.entries[static_cast<std::size_t>(result.report.selected)])) {
        result.report.selected = idx;
        result.best_model = std::move(tr.model);
        result.best_trace = std::move(tr.trace);
      }
    }
  }
  return result;
}

}  // namespace geotopics
