// Apache License, Version 2.0, refer to LICENSE.txt
//
// Single executable binding the library behind subcommands. Every run is
// seeded and writes a manifest (resolved options + input digests) beside its
// outputs, so identical configurations reproduce byte-identical files.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "geotopics/data.hpp"
#include "geotopics/evaluation.hpp"
#include "geotopics/model.hpp"
#include "geotopics/query.hpp"
#include "geotopics/similarity.hpp"
#include "geotopics/trainer.hpp"
#include "geotopics/user_reduction.hpp"

using json = nlohmann::json;
using namespace geotopics;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// --- manifest ---------------------------------------------------------------

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[20];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void write_manifest(const std::string& out_path, const std::string& command,
                    const json& options, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json manifest;
  manifest["tool"] = "geotopics";
  manifest["version"] = kToolVersion;
  manifest["command"] = command;
  manifest["options"] = options;
  json digests = json::object();
  for (const auto& path : inputs) digests[path] = fnv1a64_file(path);
  manifest["inputs"] = digests;
  manifest["outputs"] = outputs;
  std::ofstream out(out_path + ".manifest.json");
  if (!out) throw IoError("cannot write manifest: " + out_path + ".manifest.json");
  out << manifest.dump(1) << "\n";
}

void write_json_file(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << doc.dump(1) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// --- JSON config files (flags override config values) ------------------------

class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_lnames().empty() && opt->get_configurable()) {
        if (!opt->results().empty()) {
          j[opt->get_lnames()[0]] = opt->results().front();
        } else if (default_also && !opt->get_default_str().empty()) {
          j[opt->get_lnames()[0]] = opt->get_default_str();
        }
      }
    }
    return j.dump(1);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j = json::parse(input, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw CLI::FileError("config file is not a JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    std::function<void(const json&, const std::vector<std::string>&)> walk =
        [&](const json& node, const std::vector<std::string>& parents) {
          for (const auto& [key, value] : node.items()) {
            if (value.is_object()) {
              auto deeper = parents;
              deeper.push_back(key);
              walk(value, deeper);
              continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
              for (const auto& e : value) {
                item.inputs.push_back(e.is_string() ? e.get<std::string>() : e.dump());
              }
            } else if (value.is_string()) {
              item.inputs.push_back(value.get<std::string>());
            } else {
              item.inputs.push_back(value.dump());
            }
            items.push_back(std::move(item));
          }
        };
    walk(j, {});
    return items;
  }
};

// --- shared loading ----------------------------------------------------------

Dataset ingest_jsonl(const std::string& path, int min_user_venues) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  const ParseResult parsed = parse_checkins(in);
  std::cerr << "parsed " << parsed.records.size() << " check-ins (" << parsed.malformed_lines
            << " malformed lines skipped)\n";
  const auto kept = filter_low_activity_users(parsed.records, min_user_venues);
  std::cerr << "kept " << kept.size() << " check-ins after the min-" << min_user_venues
            << "-venues user filter\n";
  return aggregate_venues(kept);
}

Dataset load_data_any(const std::string& path, int min_user_venues, int user_groups) {
  Dataset ds;
  if (path.size() > 6 && path.substr(path.size() - 6) == ".jsonl") {
    ds = ingest_jsonl(path, min_user_venues);
  } else {
    try {
      ds = load_dataset(path);
    } catch (const FormatError&) {
      ds = ingest_jsonl(path, min_user_venues);
    }
  }
  if (user_groups > 0 && !ds.user_grouping.has_value()) {
    ds = reduce_users(ds, user_groups);
    std::cerr << "reduced users feature to " << ds.user_grouping_d << " super-users\n";
  }
  return ds;
}

int feature_index_or_throw(const FeatureDomains& domains, const std::string& name) {
  return domains.feature_index(name);
}

json gaussian_to_json(const Gaussian2D& g, double weight) {
  return {{"mean", {g.mean[0], g.mean[1]}},
          {"cov", {{g.cov(0, 0), g.cov(0, 1)}, {g.cov(1, 0), g.cov(1, 1)}}},
          {"weight", weight}};
}

// --- subcommand actions --------------------------------------------------------

struct GlobalOptions {
  int threads = default_thread_count();
  std::uint64_t seed = 0;
};

void run_ingest(const std::string& input, const std::string& out, int min_user_venues,
                int user_groups) {
  Dataset ds = ingest_jsonl(input, min_user_venues);
  if (user_groups > 0) ds = reduce_users(ds, user_groups);
  save_dataset(ds, out);
  std::cerr << "wrote " << ds.size() << " venues to " << out << "\n";
  write_manifest(out, "ingest",
                 {{"input", input},
                  {"min_user_venues", min_user_venues},
                  {"user_groups", user_groups}},
                 {input}, {out});
}

void run_generate(const GlobalOptions& global, const std::string& model_path, int venues,
                  const std::string& out, int fixed_checkins, double geometric_mean) {
  const ModelInstance model = load_model(model_path);
  const double mean_checkins = geometric_mean > 0.0 ? geometric_mean : 0.0;

  std::ofstream os(out);
  if (!os) throw IoError("cannot open for writing: " + out);

  static const int kHourOfBin[6] = {7, 11, 15, 19, 23, 3};
  const std::int64_t monday = parse_rfc3339("2015-06-01T00:00:00Z");

  std::vector<Eigen::VectorXd> beta_cat, beta_users, beta_tod, beta_dow;
  for (int z = 0; z < model.k; ++z) {
    const auto& t = model.topics[static_cast<std::size_t>(z)];
    beta_cat.push_back(beta_from_deviation(model.mu[kFeatureCategory], t.eta[kFeatureCategory]));
    beta_users.push_back(beta_from_deviation(model.mu[kFeatureUsers], t.eta[kFeatureUsers]));
    beta_tod.push_back(beta_from_deviation(model.mu[kFeatureTimeOfDay], t.eta[kFeatureTimeOfDay]));
    beta_dow.push_back(beta_from_deviation(model.mu[kFeatureDayOfWeek], t.eta[kFeatureDayOfWeek]));
  }

  Rng rng(global.seed);
  char venue_id[24];
  for (int v = 0; v < venues; ++v) {
    const int z = rng.categorical(model.theta);
    std::snprintf(venue_id, sizeof(venue_id), "v%06d", v);
    const Eigen::Vector2d loc = sample(model.topics[static_cast<std::size_t>(z)].location, rng);
    const int category = rng.categorical(beta_cat[static_cast<std::size_t>(z)]);
    int n = fixed_checkins;
    if (mean_checkins > 0.0) {
      const double p = 1.0 / std::max(1.0, mean_checkins);
      n = 1;
      while (rng.uniform() >= p && n < 100000) ++n;
    }
    for (int c = 0; c < n; ++c) {
      const int user = rng.categorical(beta_users[static_cast<std::size_t>(z)]);
      const int tod = rng.categorical(beta_tod[static_cast<std::size_t>(z)]);
      const int dow = rng.categorical(beta_dow[static_cast<std::size_t>(z)]);
      json line;
      line["user"] = model.domains.at(kFeatureUsers).labels[static_cast<std::size_t>(user)];
      line["venue"] = venue_id;
      line["lat"] = loc[1];
      line["lon"] = loc[0];
      line["category"] =
          model.domains.at(kFeatureCategory).labels[static_cast<std::size_t>(category)];
      line["time"] = format_rfc3339(monday + dow * 86400 + kHourOfBin[tod] * 3600);
      line["utc_offset_min"] = 0;
      os << line.dump() << "\n";
    }
  }
  os.close();
  write_manifest(out, "generate",
                 {{"model", model_path},
                  {"venues", venues},
                  {"seed", global.seed},
                  {"checkins_per_venue", fixed_checkins},
                  {"checkins_geometric_mean", geometric_mean}},
                 {model_path}, {out});
  std::cerr << "wrote " << venues << " venues of check-ins to " << out << "\n";
}

json trace_to_json(const EmTrace& trace) {
  json iterations = json::array();
  for (const auto& it : trace.iterations) {
    iterations.push_back({{"iteration", it.iteration},
                          {"penalized_objective", it.penalized_objective},
                          {"data_log_likelihood", it.data_log_likelihood},
                          {"reinitialized_topics", it.reinitialized_topics}});
  }
  return {{"converged", trace.converged}, {"iterations", iterations}};
}

void run_train(const GlobalOptions& global, const std::string& data_path, const std::string& out,
               int k, double lambda, bool grid, std::vector<int> ks,
               std::vector<double> lambdas, int min_user_venues, int user_groups,
               int max_em_iters, double em_tol, int eta_iters, double eta_tol) {
  const Dataset ds = load_data_any(data_path, min_user_venues, user_groups);
  TrainingConfig cfg;
  cfg.k = k;
  cfg.lambda = lambda;
  cfg.init_seed = global.seed;
  cfg.threads = global.threads;
  cfg.max_em_iters = max_em_iters;
  cfg.em_rel_tol = em_tol;
  cfg.eta_solver.max_inner_iters = eta_iters;
  cfg.eta_solver.inner_rel_tol = eta_tol;

  std::vector<std::string> outputs = {out};
  json options = {{"data", data_path},        {"k", k},
                  {"lambda", lambda},         {"grid", grid},
                  {"seed", global.seed},      {"threads", global.threads},
                  {"user_groups", user_groups}, {"min_user_venues", min_user_venues},
                  {"max_em_iters", max_em_iters}, {"em_rel_tol", em_tol}};

  if (grid) {
    if (ks.empty()) ks = default_grid_ks();
    if (lambdas.empty()) lambdas = default_grid_lambdas();
    options["ks"] = ks;
    options["lambdas"] = lambdas;
    const GridSearchResult result = grid_search(ds, ks, lambdas, cfg);
    save_model(result.best_model, out);
    json report;
    report["entries"] = json::array();
    for (const auto& e : result.report.entries) {
      report["entries"].push_back({{"k", e.k},
                                   {"lambda", e.lambda},
                                   {"train_mean_log_likelihood", e.train_mean_log_likelihood},
                                   {"test_mean_log_likelihood", e.test_mean_log_likelihood}});
    }
    report["selected"] = result.report.selected;
    const std::string report_path = out + ".grid.json";
    write_json_file(report, report_path);
    outputs.push_back(report_path);
    const std::string trace_path = out + ".trace.json";
    write_json_file(trace_to_json(result.best_trace), trace_path);
    outputs.push_back(trace_path);
    const auto& sel = result.report.entries[static_cast<std::size_t>(result.report.selected)];
    std::cerr << "selected k=" << sel.k << " lambda=" << sel.lambda
              << " (test mean log-likelihood " << sel.test_mean_log_likelihood << ")\n";
  } else {
    if (k < 1) throw CLI::ValidationError("--k is required without --grid");
    const TrainResult result = run_em(ds, cfg);
    save_model(result.model, out);
    const std::string trace_path = out + ".trace.json";
    write_json_file(trace_to_json(result.trace), trace_path);
    outputs.push_back(trace_path);
    std::cerr << "trained k=" << k << " lambda=" << lambda << " in "
              << result.trace.iterations.size() << " iterations (converged: "
              << (result.trace.converged ? "yes" : "no") << ")\n";
  }
  write_manifest(out, "train", options, {data_path}, outputs);
}

void run_query(const GlobalOptions& global, const std::string& model_path,
               const std::string& feature, const std::vector<double>& at,
               const std::string& mode, const std::vector<int>& grid_dims,
               const std::string& out) {
  const ModelInstance model = load_model(model_path);
  const int feature_idx = feature_index_or_throw(model.domains, feature);

  if (!at.empty()) {
    if (at.size() != 2) throw CLI::ValidationError("--at expects x,y");
    const Eigen::Vector2d l{at[0], at[1]};
    const Eigen::VectorXd gamma = conditional_feature_distribution(model, feature_idx, l);
    json doc;
    doc["feature"] = feature;
    doc["at"] = {l[0], l[1]};
    json dist = json::object();
    for (int j = 0; j < gamma.size(); ++j) {
      dist[model.domains.at(feature_idx).labels[static_cast<std::size_t>(j)]] = gamma[j];
    }
    doc["distribution"] = dist;
    std::cout << doc.dump(1) << "\n";
    return;
  }

  if (out.empty()) throw CLI::ValidationError("--out is required for heatmap queries");
  GridSpec grid = default_grid(model);
  if (grid_dims.size() == 2) {
    grid = default_grid(model, grid_dims[0], grid_dims[1]);
  }
  const HeatmapMode hm = mode == "distinctive" ? HeatmapMode::Distinctive : HeatmapMode::Likely;
  const HeatmapLayer layer = render_heatmap(model, feature_idx, grid, hm, global.threads);
  std::ofstream os(out);
  if (!os) throw IoError("cannot open for writing: " + out);
  write_heatmap_csv(layer, model.domains, os);
  os.close();
  write_manifest(out, "query",
                 {{"model", model_path}, {"feature", feature}, {"mode", mode},
                  {"grid", {grid.nx, grid.ny}}},
                 {model_path}, {out});
}

void run_ablate(const GlobalOptions& global, const std::string& data_path, int k, double lambda,
                std::vector<std::uint64_t> seeds, const std::string& out, int min_user_venues,
                int user_groups) {
  const Dataset ds = load_data_any(data_path, min_user_venues, user_groups);
  TrainingConfig cfg;
  cfg.k = k;
  cfg.lambda = lambda;
  cfg.init_seed = global.seed;
  cfg.threads = global.threads;
  if (seeds.empty()) seeds = {global.seed};
  const ContributionsReport report = feature_contributions(ds, cfg, seeds);
  json doc;
  doc["k"] = k;
  doc["lambda"] = lambda;
  doc["seeds"] = seeds;
  doc["rows"] = json::array();
  for (const auto& r : report.rows) {
    doc["rows"].push_back({{"feature", r.feature},
                           {"seed", r.seed},
                           {"full_log_likelihood", r.full_log_likelihood},
                           {"ablated_log_likelihood", r.ablated_log_likelihood},
                           {"drop_total", r.drop_total},
                           {"drop_per_venue", r.drop_per_venue}});
  }
  doc["ranking"] = report.ranked;
  write_json_file(doc, out);
  write_manifest(out, "ablate",
                 {{"data", data_path}, {"k", k}, {"lambda", lambda}, {"seeds", seeds}},
                 {data_path}, {out});
  std::cerr << "most important feature: " << report.ranked.front() << "\n";
}

void run_similar(const GlobalOptions& global, const std::string& model_a_path,
                 const std::string& model_b_path, const std::string& feature,
                 const std::string& bases_spec, const std::string& measure, int R,
                 const std::vector<int>& grid_dims, const std::string& out) {
  const ModelInstance model_a = load_model(model_a_path);
  const ModelInstance model_b = load_model(model_b_path);
  const int feature_idx = feature_index_or_throw(model_a.domains, feature);

  const int nx = grid_dims.size() == 2 ? grid_dims[0] : 100;
  const int ny = grid_dims.size() == 2 ? grid_dims[1] : 100;
  SimilarityContext ctx(model_a, model_b, feature_idx, default_grid(model_a, nx, ny),
                        default_grid(model_b, nx, ny), global.threads);

  auto make_bases = [&](const ModelInstance& m) {
    if (bases_spec == "model") return model_base_regions(m);
    if (bases_spec.rfind("grid:", 0) == 0) {
      return grid_base_regions(m, std::stod(bases_spec.substr(5)));
    }
    throw CLI::ValidationError("--bases must be 'model' or 'grid:<a>'");
  };
  const WeightedRegionSet bases_a = make_bases(model_a);
  const WeightedRegionSet bases_b = make_bases(model_b);

  json doc;
  doc["feature"] = feature;
  doc["measure"] = measure;
  doc["bases"] = bases_spec;
  if (measure == "jointsim") {
    const ExploreResult result = geo_explore(ctx, bases_a, bases_b, R);
    doc["score"] = result.score;
    doc["region_a"] = gaussian_to_json(result.g1.gaussian, result.g1.weight);
    doc["region_a"]["bases"] = result.bases1;
    doc["region_b"] = gaussian_to_json(result.g2.gaussian, result.g2.weight);
    doc["region_b"]["bases"] = result.bases2;
    json trace = json::array();
    for (const auto& c : result.trace) {
      trace.push_back({{"bases_a", c.bases1}, {"bases_b", c.bases2}, {"score", c.score}});
    }
    doc["trace"] = trace;
    std::cerr << "best jointsim " << result.score << "\n";
  } else if (measure == "condsim") {
    const BestPair best = all_pairs_condsim(ctx, bases_a, bases_b);
    doc["score"] = best.score;
    const auto& ra = bases_a.regions[static_cast<std::size_t>(best.i)];
    const auto& rb = bases_b.regions[static_cast<std::size_t>(best.j)];
    doc["region_a"] = gaussian_to_json(ra.gaussian, ra.weight);
    doc["region_a"]["bases"] = {best.i};
    doc["region_b"] = gaussian_to_json(rb.gaussian, rb.weight);
    doc["region_b"]["bases"] = {best.j};
    std::cerr << "best condsim " << best.score << "\n";
  } else {
    throw CLI::ValidationError("--measure must be jointsim or condsim");
  }
  write_json_file(doc, out);
  write_manifest(out, "similar",
                 {{"model_a", model_a_path}, {"model_b", model_b_path}, {"feature", feature},
                  {"bases", bases_spec}, {"measure", measure}, {"R", R},
                  {"grid", {nx, ny}}},
                 {model_a_path, model_b_path}, {out});
}

json metrics_to_json(const MetricsReport& report) {
  json doc;
  doc["k"] = report.k;
  doc["lambda"] = report.lambda;
  doc["topic_averaging"] = "uniform";
  doc["heldout_mean_log_likelihood"] = report.heldout_mean_log_likelihood;
  doc["features"] = json::array();
  for (const auto& f : report.features) {
    doc["features"].push_back({{"feature", f.feature},
                               {"mean_entropy", f.mean_entropy},
                               {"mean_jsd_from_city", f.mean_jsd}});
  }
  return doc;
}

void run_metrics(const std::string& model_path, const std::string& data_path,
                 const std::string& out, int min_user_venues) {
  const ModelInstance model = load_model(model_path);
  const Dataset ds = load_data_any(data_path, min_user_venues, 0);
  write_json_file(metrics_to_json(model_metrics(model, ds)), out);
  write_manifest(out, "metrics", {{"model", model_path}, {"data", data_path}},
                 {model_path, data_path}, {out});
}

void run_compare(const GlobalOptions& global, const std::string& data_path,
                 const std::string& regions_path, double lambda, const std::string& out,
                 int min_user_venues) {
  const Dataset ds = load_data_any(data_path, min_user_venues, 0);
  std::ifstream in(regions_path);
  if (!in) throw IoError("cannot open: " + regions_path);
  json regions_doc = json::parse(in, nullptr, false);
  if (regions_doc.is_discarded() || !regions_doc.is_array()) {
    throw FormatError("regions file must be a JSON array of {name, polygon}");
  }
  WeightedRegionSet regions;
  regions.provenance = "merged";
  json fitted = json::array();
  for (const auto& entry : regions_doc) {
    std::vector<Eigen::Vector2d> points;
    for (const auto& p : entry.at("polygon")) {
      points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    Region r = fit_enclosing_gaussian(points);
    fitted.push_back({{"name", entry.value("name", "")},
                      {"gaussian", gaussian_to_json(r.gaussian, r.weight)}});
    regions.regions.push_back(std::move(r));
  }
  for (auto& r : regions.regions) r.weight = 1.0 / static_cast<double>(regions.regions.size());

  TrainingConfig cfg;
  cfg.k = static_cast<int>(regions.regions.size());
  cfg.lambda = lambda;
  cfg.init_seed = global.seed;
  cfg.threads = global.threads;
  json doc = metrics_to_json(compare_fixed_regions(ds, regions, cfg));
  doc["regions"] = fitted;
  write_json_file(doc, out);
  write_manifest(out, "compare",
                 {{"data", data_path}, {"regions", regions_path}, {"lambda", lambda},
                  {"seed", global.seed}},
                 {data_path, regions_path}, {out});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse geospatial topic models over venue check-in data"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; explicit flags override its values");

  GlobalOptions global;
  app.add_option("--threads", global.threads, "Worker threads (results do not depend on this)")
      ->capture_default_str();
  app.add_option("--seed", global.seed, "Root seed for all randomness")->capture_default_str();

  std::function<void()> action;

  // ingest
  {
    auto* sub = app.add_subcommand("ingest", "Parse check-ins into a dataset file");
    sub->configurable();
    sub->fallthrough();
    auto input = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto min_user_venues = std::make_shared<int>(5);
    auto user_groups = std::make_shared<int>(0);
    sub->add_option("--input", *input, "Line-delimited JSON check-ins")->required();
    sub->add_option("--out", *out, "Dataset file to write")->required();
    sub->add_option("--min-user-venues", *min_user_venues,
                    "Drop users seen at fewer distinct venues")
        ->capture_default_str();
    sub->add_option("--user-groups", *user_groups,
                    "Reduce users to this many super-users via SVD (0 disables)")
        ->capture_default_str();
    sub->callback([=, &action]() {
      action = [=]() { run_ingest(*input, *out, *min_user_venues, *user_groups); };
    });
  }

  // generate
  {
    auto* sub = app.add_subcommand("generate", "Sample synthetic check-ins from a model");
    sub->configurable();
    sub->fallthrough();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto venues = std::make_shared<int>(1000);
    auto fixed = std::make_shared<int>(3);
    auto geometric = std::make_shared<double>(0.0);
    sub->add_option("--model", *model, "Model file")->required();
    sub->add_option("--venues", *venues, "Number of venues to sample")->capture_default_str();
    sub->add_option("--out", *out, "JSONL output path")->required();
    sub->add_option("--checkins-per-venue", *fixed, "Fixed check-ins per venue")
        ->capture_default_str();
    sub->add_option("--checkins-geometric", *geometric,
                    "Geometric rule: mean check-ins per venue (overrides fixed)")
        ->capture_default_str();
    sub->callback([=, &action, &global]() {
      action = [=, &global]() { run_generate(global, *model, *venues, *out, *fixed, *geometric); };
    });
  }

  // train
  {
    auto* sub = app.add_subcommand("train", "Fit a model by EM, optionally over a (k, lambda) grid");
    sub->configurable();
    sub->fallthrough();
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto k = std::make_shared<int>(0);
    auto lambda = std::make_shared<double>(1.0);
    auto grid = std::make_shared<bool>(false);
    auto ks = std::make_shared<std::vector<int>>();
    auto lambdas = std::make_shared<std::vector<double>>();
    auto min_user_venues = std::make_shared<int>(5);
    auto user_groups = std::make_shared<int>(0);
    auto max_em_iters = std::make_shared<int>(200);
    auto em_tol = std::make_shared<double>(1e-6);
    auto eta_iters = std::make_shared<int>(200);
    auto eta_tol = std::make_shared<double>(1e-6);
    sub->add_option("--data", *data, "Check-in JSONL or dataset file")->required();
    sub->add_option("--out", *out, "Model file to write")->required();
    sub->add_option("--k", *k, "Topic count");
    sub->add_option("--lambda", *lambda, "L1 coefficient")->capture_default_str();
    sub->add_flag("--grid", *grid, "Grid-search (k, lambda) on an 80/20 split");
    sub->add_option("--ks", *ks, "Grid k values")->delimiter(',');
    sub->add_option("--lambdas", *lambdas, "Grid lambda values")->delimiter(',');
    sub->add_option("--min-user-venues", *min_user_venues)->capture_default_str();
    sub->add_option("--user-groups", *user_groups)->capture_default_str();
    sub->add_option("--max-em-iters", *max_em_iters)->capture_default_str();
    sub->add_option("--em-tol", *em_tol)->capture_default_str();
    sub->add_option("--eta-iters", *eta_iters)->capture_default_str();
    sub->add_option("--eta-tol", *eta_tol)->capture_default_str();
    sub->callback([=, &action, &global]() {
      action = [=, &global]() {
        run_train(global, *data, *out, *k, *lambda, *grid, *ks, *lambdas, *min_user_venues,
                  *user_groups, *max_em_iters, *em_tol, *eta_iters, *eta_tol);
      };
    });
  }

  // query
  {
    auto* sub = app.add_subcommand("query", "Location-conditional feature queries and heatmaps");
    sub->configurable();
    sub->fallthrough();
    auto model = std::make_shared<std::string>();
    auto feature = std::make_shared<std::string>("category");
    auto at = std::make_shared<std::vector<double>>();
    auto mode = std::make_shared<std::string>("likely");
    auto grid_dims = std::make_shared<std::vector<int>>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--model", *model, "Model file")->required();
    sub->add_option("--feature", *feature, "Feature name")->capture_default_str();
    sub->add_option("--at", *at, "x,y location: print the conditional distribution as JSON")
        ->delimiter(',');
    sub->add_option("--mode", *mode, "likely | distinctive")->capture_default_str();
    sub->add_option("--grid", *grid_dims, "nx,ny heatmap resolution")->delimiter(',');
    sub->add_option("--out", *out, "CSV output for heatmap queries");
    sub->callback([=, &action, &global]() {
      action = [=, &global]() {
        run_query(global, *model, *feature, *at, *mode, *grid_dims, *out);
      };
    });
  }

  // ablate
  {
    auto* sub = app.add_subcommand("ablate", "Feature importance by ablation retraining");
    sub->configurable();
    sub->fallthrough();
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto k = std::make_shared<int>(10);
    auto lambda = std::make_shared<double>(1.0);
    auto seeds = std::make_shared<std::vector<std::uint64_t>>();
    auto min_user_venues = std::make_shared<int>(5);
    auto user_groups = std::make_shared<int>(0);
    sub->add_option("--data", *data)->required();
    sub->add_option("--out", *out)->required();
    sub->add_option("--k", *k)->capture_default_str();
    sub->add_option("--lambda", *lambda)->capture_default_str();
    sub->add_option("--seeds", *seeds, "Repeat across these seeds")->delimiter(',');
    sub->add_option("--min-user-venues", *min_user_venues)->capture_default_str();
    sub->add_option("--user-groups", *user_groups)->capture_default_str();
    sub->callback([=, &action, &global]() {
      action = [=, &global]() {
        run_ablate(global, *data, *k, *lambda, *seeds, *out, *min_user_venues, *user_groups);
      };
    });
  }

  // similar
  {
    auto* sub = app.add_subcommand("similar", "Find maximally similar regions across two models");
    sub->configurable();
    sub->fallthrough();
    auto model_a = std::make_shared<std::string>();
    auto model_b = std::make_shared<std::string>();
    auto feature = std::make_shared<std::string>("category");
    auto bases = std::make_shared<std::string>("model");
    auto measure = std::make_shared<std::string>("jointsim");
    auto R = std::make_shared<int>(5);
    auto grid_dims = std::make_shared<std::vector<int>>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--model-a", *model_a)->required();
    sub->add_option("--model-b", *model_b)->required();
    sub->add_option("--feature", *feature)->capture_default_str();
    sub->add_option("--bases", *bases, "model | grid:<a>")->capture_default_str();
    sub->add_option("--measure", *measure, "jointsim | condsim")->capture_default_str();
    sub->add_option("--R", *R, "GeoExplore expansion budget")->capture_default_str();
    sub->add_option("--grid", *grid_dims, "nx,ny integration grids")->delimiter(',');
    sub->add_option("--out", *out)->required();
    sub->callback([=, &action, &global]() {
      action = [=, &global]() {
        run_similar(global, *model_a, *model_b, *feature, *bases, *measure, *R, *grid_dims, *out);
      };
    });
  }

  // metrics
  {
    auto* sub = app.add_subcommand("metrics", "Entropy/JSD/likelihood report for a model");
    sub->configurable();
    sub->fallthrough();
    auto model = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto min_user_venues = std::make_shared<int>(5);
    sub->add_option("--model", *model)->required();
    sub->add_option("--data", *data)->required();
    sub->add_option("--out", *out)->required();
    sub->add_option("--min-user-venues", *min_user_venues)->capture_default_str();
    sub->callback([=, &action]() {
      action = [=]() { run_metrics(*model, *data, *out, *min_user_venues); };
    });
  }

  // compare
  {
    auto* sub = app.add_subcommand("compare",
                                   "Train with fixed imported regions and report metrics");
    sub->configurable();
    sub->fallthrough();
    auto data = std::make_shared<std::string>();
    auto regions = std::make_shared<std::string>();
    auto lambda = std::make_shared<double>(1.0);
    auto out = std::make_shared<std::string>();
    auto min_user_venues = std::make_shared<int>(5);
    sub->add_option("--data", *data)->required();
    sub->add_option("--regions", *regions, "JSON array of {name, polygon: [[x, y], ...]}")
        ->required();
    sub->add_option("--lambda", *lambda)->capture_default_str();
    sub->add_option("--out", *out)->required();
    sub->add_option("--min-user-venues", *min_user_venues)->capture_default_str();
    sub->callback([=, &action, &global]() {
      action = [=, &global]() {
        run_compare(global, *data, *regions, *lambda, *out, *min_user_venues);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (action) action();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
