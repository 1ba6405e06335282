// Apache License, Version 2.0, refer to LICENSE.txt

#include "geotopics/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace geotopics {

using nlohmann::json;

Eigen::VectorXd log_beta_from_deviation(const Eigen::VectorXd& mu, const Eigen::VectorXd& eta) {
  if (mu.size() != eta.size()) {
    throw DomainError("beta_from_deviation: mu and eta length mismatch");
  }
  if (!mu.allFinite() || !eta.allFinite()) {
    throw DomainError("beta_from_deviation: non-finite entries");
  }
  Eigen::VectorXd v = mu + eta;
  const double shift = v.maxCoeff();
  const double lse = shift + std::log((v.array() - shift).exp().sum());
  return v.array() - lse;
}

Eigen::VectorXd beta_from_deviation(const Eigen::VectorXd& mu, const Eigen::VectorXd& eta) {
  Eigen::VectorXd beta = log_beta_from_deviation(mu, eta).array().exp();
  beta /= beta.sum();
  return beta;
}

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double shift = v.maxCoeff();
  if (!std::isfinite(shift)) return shift;
  return shift + std::log((v.array() - shift).exp().sum());
}

// Per-topic, per-feature log-beta rows for one model.
std::vector<Eigen::MatrixXd> log_beta_tables(const ModelInstance& model) {
  std::vector<Eigen::MatrixXd> tables(model.mu.size());
  for (std::size_t i = 0; i < model.mu.size(); ++i) {
    tables[i].resize(model.k, model.mu[i].size());
    for (int z = 0; z < model.k; ++z) {
      tables[i].row(z) =
          log_beta_from_deviation(model.mu[i], model.topics[static_cast<std::size_t>(z)].eta[i])
              .transpose();
    }
  }
  return tables;
}

double venue_log_likelihood_with_tables(const ModelInstance& model, const Venue& v,
                                        const std::vector<Eigen::MatrixXd>& log_beta) {
  Eigen::VectorXd scores(model.k);
  for (int z = 0; z < model.k; ++z) {
    const auto& topic = model.topics[static_cast<std::size_t>(z)];
    double s = std::log(model.theta[z]) + log_density(topic.location, v.location);
    for (std::size_t i = 0; i < v.counts.size(); ++i) {
      const auto& table = log_beta[i];
      for (const auto& [j, n] : v.counts[i]) {
        if (j < 0 || j >= table.cols()) {
          throw DomainError("venue_log_likelihood: feature index outside model domain");
        }
        s += n * table(z, j);
      }
    }
    scores[z] = s;
  }
  return log_sum_exp(scores);
}

}  // namespace

double venue_log_likelihood(const ModelInstance& model, const Venue& v) {
  return venue_log_likelihood_with_tables(model, v, log_beta_tables(model));
}

DatasetLogLikelihood dataset_log_likelihood(const ModelInstance& model, const Dataset& ds) {
  if (ds.size() == 0) throw DomainError("dataset_log_likelihood: empty dataset");
  const auto tables = log_beta_tables(model);
  std::vector<double> per_venue(ds.venues.size());
  for (std::size_t d = 0; d < ds.venues.size(); ++d) {
    per_venue[d] = venue_log_likelihood_with_tables(model, ds.venues[d], tables);
  }
  DatasetLogLikelihood out;
  out.total = pairwise_sum(per_venue);
  out.mean = out.total / static_cast<double>(ds.size());
  return out;
}

double penalized_objective(const ModelInstance& model, const Dataset& ds) {
  double obj = dataset_log_likelihood(model, ds).total;
  for (const auto& topic : model.topics) {
    for (const auto& eta : topic.eta) obj -= model.lambda * eta.lpNorm<1>();
    obj -= 2.0 * std::log(topic.location.cov.determinant());
  }
  return obj;
}

// --- sampling ---------------------------------------------------------------

namespace {

int draw_count(const CountRule& rule, Rng& rng) {
  switch (rule.kind) {
    case CountRule::Kind::Fixed:
      return std::max(1, static_cast<int>(std::llround(rule.value)));
    case CountRule::Kind::Geometric: {
      // N = 1 + Geometric; success probability 1/mean over support {1, 2, ...}.
      const double p = 1.0 / std::max(1.0, rule.value);
      int n = 1;
      while (rng.uniform() >= p && n < 100000) ++n;
      return n;
    }
  }
  throw DomainError("draw_count: bad rule");
}

}  // namespace

Dataset sample_dataset(const ModelInstance& model, int num_venues, const CountRule& rule,
                       std::uint64_t seed) {
  return sample_dataset(model, num_venues,
                        std::vector<CountRule>(model.mu.size(), rule), seed);
}

Dataset sample_dataset(const ModelInstance& model, int num_venues,
                       const std::vector<CountRule>& rules_per_feature, std::uint64_t seed) {
  if (num_venues < 1) throw DomainError("sample_dataset: need at least one venue");
  if (rules_per_feature.size() != model.mu.size()) {
    throw DomainError("sample_dataset: one count rule per feature required");
  }
  validate_model(model);

  Dataset ds;
  ds.domains = model.domains;
  ds.venues.reserve(static_cast<std::size_t>(num_venues));

  // Per-topic beta vectors.
  std::vector<std::vector<Eigen::VectorXd>> beta(static_cast<std::size_t>(model.k));
  for (int z = 0; z < model.k; ++z) {
    for (std::size_t i = 0; i < model.mu.size(); ++i) {
      beta[static_cast<std::size_t>(z)].push_back(
          beta_from_deviation(model.mu[i], model.topics[static_cast<std::size_t>(z)].eta[i]));
    }
  }

  Rng rng(seed);
  char id[24];
  for (int v = 0; v < num_venues; ++v) {
    const int z = rng.categorical(model.theta);
    Venue venue;
    std::snprintf(id, sizeof(id), "v%06d", v);
    venue.venue_id = id;
    venue.location = sample(model.topics[static_cast<std::size_t>(z)].location, rng);
    venue.counts.resize(model.mu.size());

    for (std::size_t i = 0; i < model.mu.size(); ++i) {
      const int n = (static_cast<int>(i) == kFeatureCategory)
                        ? 1
                        : draw_count(rules_per_feature[i], rng);
      SparseCounts& c = venue.counts[i];
      for (int t = 0; t < n; ++t) {
        const int j = rng.categorical(beta[static_cast<std::size_t>(z)][i]);
        auto it = std::lower_bound(c.begin(), c.end(), j,
                                   [](const auto& p, int jj) { return p.first < jj; });
        if (it != c.end() && it->first == j) {
          it->second += 1.0;
        } else {
          c.insert(it, {j, 1.0});
        }
      }
      if (static_cast<int>(i) == kFeatureCategory) venue.category_index = c.front().first;
      if (static_cast<int>(i) == kFeatureUsers) venue.total_checkins = static_cast<double>(n);
    }
    ds.venues.push_back(std::move(venue));
  }
  return ds;
}

// --- serialization ----------------------------------------------------------

void validate_model(const ModelInstance& model) {
  if (model.k < 1 || model.theta.size() != model.k ||
      model.topics.size() != static_cast<std::size_t>(model.k)) {
    throw FormatError("model: inconsistent topic count");
  }
  if (model.theta.minCoeff() < 0.0 || std::abs(model.theta.sum() - 1.0) > 1e-9) {
    throw FormatError("model: theta is not a probability vector");
  }
  if (model.mu.size() != static_cast<std::size_t>(model.domains.count())) {
    throw FormatError("model: mu arity does not match domains");
  }
  for (std::size_t i = 0; i < model.mu.size(); ++i) {
    if (model.mu[i].size() != model.domains.at(static_cast<int>(i)).size()) {
      throw FormatError("model: mu dimension mismatch for feature " +
                        model.domains.at(static_cast<int>(i)).name);
    }
    if (std::abs(model.mu[i].array().exp().sum() - 1.0) > 1e-9) {
      throw FormatError("model: exp(mu) does not sum to 1 for feature " +
                        model.domains.at(static_cast<int>(i)).name);
    }
  }
  for (const auto& topic : model.topics) {
    if (!is_spd(topic.location.cov)) throw FormatError("model: topic covariance is not SPD");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(topic.location.cov);
    if (es.eigenvalues().minCoeff() < kCovarianceFloor - 1e-12) {
      throw FormatError("model: topic covariance below eigenvalue floor");
    }
    if (topic.eta.size() != model.mu.size()) throw FormatError("model: eta arity mismatch");
    for (std::size_t i = 0; i < topic.eta.size(); ++i) {
      if (topic.eta[i].size() != model.mu[i].size() || !topic.eta[i].allFinite()) {
        throw FormatError("model: bad eta vector");
      }
      // derived beta must be a probability vector
      const Eigen::VectorXd beta = beta_from_deviation(model.mu[i], topic.eta[i]);
      if (std::abs(beta.sum() - 1.0) > 1e-9 || beta.minCoeff() < 0.0) {
        throw FormatError("model: derived beta is not a probability vector");
      }
    }
  }
  if (!(model.lambda >= 0.0)) throw FormatError("model: lambda must be nonnegative");
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  Eigen::Index i = 0;
  for (const auto& e : arr) v[i++] = e.get<double>();
  return v;
}

}  // namespace

void save_model(const ModelInstance& model, const std::string& path) {
  validate_model(model);
  json doc;
  doc["format"] = "geotopics-model";
  doc["version"] = 1;
  doc["k"] = model.k;
  doc["lambda"] = model.lambda;
  doc["theta"] = vector_to_json(model.theta);
  doc["features"] = json::array();
  for (const auto& f : model.domains.features) {
    doc["features"].push_back({{"name", f.name}, {"labels", f.labels}});
  }
  doc["mu"] = json::array();
  for (const auto& m : model.mu) doc["mu"].push_back(vector_to_json(m));
  doc["topics"] = json::array();
  for (const auto& topic : model.topics) {
    json jt;
    jt["center"] = {topic.location.mean[0], topic.location.mean[1]};
    jt["cov"] = {{topic.location.cov(0, 0), topic.location.cov(0, 1)},
                 {topic.location.cov(1, 0), topic.location.cov(1, 1)}};
    jt["eta"] = json::array();
    for (const auto& e : topic.eta) jt["eta"].push_back(vector_to_json(e));
    doc["topics"].push_back(std::move(jt));
  }
  doc["metadata"] = model.metadata.is_null() ? json::object() : model.metadata;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << doc.dump(1) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

ModelInstance load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError("model file is not valid JSON: " + path);
  try {
    if (doc.at("format").get<std::string>() != "geotopics-model") {
      throw FormatError("not a geotopics model file: " + path);
    }
    if (doc.at("version").get<int>() != 1) {
      throw FormatError("unsupported model version in " + path);
    }
    ModelInstance model;
    model.k = doc.at("k").get<int>();
    model.lambda = doc.at("lambda").get<double>();
    model.theta = vector_from_json(doc.at("theta"));
    for (const auto& f : doc.at("features")) {
      FeatureDomain fd;
      fd.name = f.at("name").get<std::string>();
      fd.labels = f.at("labels").get<std::vector<std::string>>();
      model.domains.features.push_back(std::move(fd));
    }
    for (const auto& m : doc.at("mu")) model.mu.push_back(vector_from_json(m));
    for (const auto& jt : doc.at("topics")) {
      TopicParams topic;
      topic.location.mean = {jt.at("center").at(0).get<double>(),
                             jt.at("center").at(1).get<double>()};
      const auto& cov = jt.at("cov");
      topic.location.cov << cov.at(0).at(0).get<double>(), cov.at(0).at(1).get<double>(),
          cov.at(1).at(0).get<double>(), cov.at(1).at(1).get<double>();
      for (const auto& e : jt.at("eta")) topic.eta.push_back(vector_from_json(e));
      model.topics.push_back(std::move(topic));
    }
    model.metadata = doc.value("metadata", json::object());
    validate_model(model);
    return model;
  } catch (const json::exception& e) {
    throw FormatError("model schema violation in " + path + ": " + e.what());
  }
}

}  // namespace geotopics
