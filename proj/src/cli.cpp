#include "sda/cli.hpp"

#include <algorithm>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "sda/parallel.hpp"
#include "sda/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sda {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("cli", "bad boolean for " + key + ": '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("cli", "bad number for " + key + ": '" + v + "'");
  }
}

long parse_long(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("cli", "bad integer for " + key + ": '" + v + "'");
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cli", "cannot write '" + path + "'");
  out << content;
}

std::string timestamp_utc() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Simple comma-split CSV reader; the file formats here carry no quoting.
std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cli", "cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    rows.push_back(std::move(cells));
  }
  return rows;
}

struct LoadedInputs {
  Partition partition;
  std::optional<PopulationRaster> raster;
  DataVector data;
  std::vector<std::string> ids;
};

LoadedInputs load_inputs(const RunConfig& cfg, bool need_counts) {
  if (cfg.partition_path.empty()) throw ParseError("cli", "no partition file configured");
  if (!fs::exists(cfg.partition_path)) {
    throw ParseError("cli", "partition file not found: '" + cfg.partition_path + "'");
  }
  Partition partition = load_partition_file(cfg.partition_path);

  std::optional<PopulationRaster> raster;
  if (!cfg.raster_path.empty()) {
    if (!fs::exists(cfg.raster_path)) {
      throw ParseError("cli", "raster file not found: '" + cfg.raster_path + "'");
    }
    raster = read_esri_ascii(cfg.raster_path, cfg.raster_per_m2);
  } else if (cfg.weighting == Weighting::Population) {
    throw ParseError("cli", "weighting=population requires a raster file");
  }

  const std::size_t n = partition.size();
  std::vector<std::string> ids;
  ids.reserve(n);
  for (const Region& r : partition.regions()) ids.push_back(r.id());

  DataVector data;
  data.y = Eigen::VectorXd::Zero(n);
  data.m = Eigen::VectorXd::Zero(n);

  if (need_counts) {
    if (cfg.counts_path.empty()) throw ParseError("cli", "no counts file configured");
    if (!fs::exists(cfg.counts_path)) {
      throw ParseError("cli", "counts file not found: '" + cfg.counts_path + "'");
    }
    auto rows = read_csv(cfg.counts_path);
    if (rows.empty()) throw ParseError("cli", "counts file is empty");
    std::size_t start = 0;
    if (!rows[0].empty() && rows[0][0] == "region_id") start = 1;  // header
    std::vector<bool> seen(n, false);
    for (std::size_t r = start; r < rows.size(); ++r) {
      if (rows[r].size() < 2) throw ParseError("cli", "counts row has fewer than two columns");
      const std::size_t i = partition.index_of(rows[r][0]);
      data.y[i] = parse_double(rows[r][1], "count");
      seen[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!seen[i]) throw ParseError("cli", "no count for region '" + ids[i] + "'");
    }
  }

  // Offsets: population mass per region when a raster is available,
  // otherwise region area (a uniform unit density).
  for (std::size_t i = 0; i < n; ++i) {
    data.m[i] = raster ? raster->region_mass(partition.region(i)) : partition.region(i).area();
  }

  // Design: intercept plus any covariate columns, aligned by region id.
  if (!cfg.covariates_path.empty()) {
    if (!fs::exists(cfg.covariates_path)) {
      throw ParseError("cli", "covariates file not found: '" + cfg.covariates_path + "'");
    }
    auto rows = read_csv(cfg.covariates_path);
    if (rows.size() < 2 || rows[0].size() < 2 || rows[0][0] != "region_id") {
      throw ParseError("cli", "covariates file needs a 'region_id,<name>...' header");
    }
    const int p = static_cast<int>(rows[0].size() - 1);
    data.D = Eigen::MatrixXd::Zero(n, p + 1);
    data.D.col(0).setOnes();
    std::vector<bool> seen(n, false);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != rows[0].size()) {
        throw ParseError("cli", "covariates row width mismatch");
      }
      const std::size_t i = partition.index_of(rows[r][0]);
      for (int c = 0; c < p; ++c) {
        data.D(i, c + 1) = parse_double(rows[r][c + 1], rows[0][c + 1]);
      }
      seen[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!seen[i]) throw ParseError("cli", "no covariates for region '" + ids[i] + "'");
    }
  } else {
    data.D = Eigen::MatrixXd::Ones(n, 1);
  }

  return {std::move(partition), std::move(raster), std::move(data), std::move(ids)};
}

struct QuadratureOutput {
  std::vector<QuadratureSet> quads;
  CovarianceCache cache;
};

QuadratureOutput build_quadrature_and_cache(const RunConfig& cfg, const LoadedInputs& in,
                                            std::ostream& log) {
  const PhiGrid grid = cfg.phi_grid();
  const QuadratureConfig qcfg = resolve_delta(cfg.quad, in.partition);
  const PopulationRaster* raster =
      cfg.weighting == Weighting::Population ? &in.raster.value() : nullptr;

  std::vector<QuadratureSet> quads;
  if (qcfg.mode == QuadratureConfig::Mode::Adaptive) {
    quads = build_quadrature_adaptive(in.partition, raster, cfg.weighting, qcfg,
                                      grid.values.front(),
                                      derive_seed(cfg.seed, "quadrature-master"));
  } else {
    quads = build_quadrature(in.partition, raster, cfg.weighting, qcfg,
                             derive_seed(cfg.seed, "quadrature-master"));
  }

  const std::uint64_t key =
      cache_key(in.partition.content_hash(), derive_seed(cfg.seed, "quadrature-master"), grid);
  if (!cfg.cache_file.empty()) {
    if (auto cached = CovarianceCache::try_load(cfg.cache_file, key)) {
      log << "loaded covariance cache from " << cfg.cache_file << "\n";
      return {std::move(quads), std::move(*cached)};
    }
  }
  CovarianceCache cache = build_cache(quads, grid, cfg.threads, key);
  if (!cfg.cache_file.empty()) {
    cache.save(cfg.cache_file);
    log << "saved covariance cache to " << cfg.cache_file << "\n";
  }
  return {std::move(quads), std::move(cache)};
}

json provenance_json(const RunConfig& cfg) {
  json j;
  j["config_hash"] = hash_hex(cfg.config_hash());
  j["seed"] = cfg.seed;
  std::istringstream lines(cfg.canonical());
  json echo = json::object();
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) echo[line.substr(0, eq)] = line.substr(eq + 1);
  }
  j["config"] = echo;
  return j;
}

std::string provenance_comment(const RunConfig& cfg) {
  return "# config_hash=" + hash_hex(cfg.config_hash()) + " seed=" + std::to_string(cfg.seed) +
         "\n";
}

json fit_to_json(const FitResult& fit, const RunConfig& cfg) {
  json j;
  j["schema"] = "sdacox.fit/1";
  j["timestamp"] = timestamp_utc();
  j["provenance"] = provenance_json(cfg);
  json est;
  est["beta"] = std::vector<double>(fit.estimates.beta.data(),
                                    fit.estimates.beta.data() + fit.estimates.beta.size());
  est["sigma2"] = fit.estimates.sigma2;
  est["phi"] = fit.estimates.phi;
  j["estimates"] = est;
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      rows[r].assign(m.row(r).begin(), m.row(r).end());
    }
    return rows;
  };
  j["beta_cov"] = mat(fit.beta_cov);
  j["param_cov"] = mat(fit.param_cov);
  json profile = json::array();
  for (const ProfilePoint& p : fit.phi_profile) {
    profile.push_back({{"phi", p.phi}, {"loglik", p.loglik}});
  }
  j["phi_profile"] = profile;
  j["phi_ci_95"] = {fit.phi_ci_lo, fit.phi_ci_hi};
  j["converged"] = fit.converged;
  j["monte_carlo_N"] = fit.monte_carlo_N;
  j["diagnostics"] = {{"mala_acceptance", fit.mala_acceptance},
                      {"min_ess", fit.min_ess},
                      {"outer_iters_run", fit.outer_iters_run}};
  j["warnings"] = fit.warnings;
  return j;
}

void write_run_meta(const RunConfig& cfg, const std::string& command) {
  json meta;
  meta["schema"] = "sdacox.run/1";
  meta["command"] = command;
  meta["provenance"] = provenance_json(cfg);
  write_text((fs::path(cfg.out_dir) / "run_meta.json").string(), meta.dump(2) + "\n");
}

int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    log << "error: [" << e.module() << "] " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cli", "cannot open config file '" + path + "'");
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("cli", "config line " + std::to_string(lineno) + " is not key=value");
    }
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "partition") {
    partition_path = value;
  } else if (key == "counts") {
    counts_path = value;
  } else if (key == "covariates") {
    covariates_path = value;
  } else if (key == "raster") {
    raster_path = value;
  } else if (key == "raster_per_m2") {
    raster_per_m2 = parse_bool(value, key);
  } else if (key == "weighting") {
    if (value == "population") {
      weighting = Weighting::Population;
    } else if (value == "uniform") {
      weighting = Weighting::Uniform;
    } else {
      throw ParseError("cli", "weighting must be population or uniform");
    }
  } else if (key == "phi_grid") {
    const auto c1 = value.find(':');
    const auto c2 = value.rfind(':');
    if (c1 == std::string::npos || c2 == c1) {
      throw ParseError("cli", "phi_grid must be lo:hi:n");
    }
    phi_lo = parse_double(value.substr(0, c1), key);
    phi_hi = parse_double(value.substr(c1 + 1, c2 - c1 - 1), key);
    phi_n = static_cast<int>(parse_long(value.substr(c2 + 1), key));
  } else if (key == "out") {
    out_dir = value;
  } else if (key == "seed") {
    const long v = parse_long(value, key);
    if (v < 0) throw ParseError("cli", "seed must be non-negative");
    seed = static_cast<std::uint64_t>(v);
  } else if (key == "threads") {
    const long v = parse_long(value, key);
    if (v < 0) throw ParseError("cli", "threads must be non-negative");
    threads = static_cast<int>(v);
  } else if (key == "cache_file") {
    cache_file = value;
  } else if (key == "quad.delta") {
    quad.delta = parse_double(value, key);
  } else if (key == "quad.gamma") {
    quad.gamma = parse_double(value, key);
  } else if (key == "quad.mode") {
    if (value == "adaptive") {
      quad.mode = QuadratureConfig::Mode::Adaptive;
    } else if (value == "nonadaptive" || value == "non-adaptive") {
      quad.mode = QuadratureConfig::Mode::NonAdaptive;
    } else {
      throw ParseError("cli", "quad.mode must be nonadaptive or adaptive");
    }
  } else if (key == "quad.batch_k") {
    quad.batch_size_k = static_cast<int>(parse_long(value, key));
  } else if (key == "quad.eps") {
    quad.rel_tol_eps = parse_double(value, key);
  } else if (key == "quad.max_attempts") {
    quad.max_attempts_per_point = static_cast<int>(parse_long(value, key));
  } else if (key == "quad.max_rounds") {
    quad.max_adaptive_rounds = static_cast<int>(parse_long(value, key));
  } else if (key == "mcml.n_samples") {
    mcml.n_samples = static_cast<int>(parse_long(value, key));
  } else if (key == "mcml.outer_iters") {
    mcml.outer_iters = static_cast<int>(parse_long(value, key));
  } else if (key == "mcml.param_tol") {
    mcml.param_tol = parse_double(value, key);
  } else if (key == "mcml.burn_in") {
    mcml.burn_in = static_cast<int>(parse_long(value, key));
  } else if (key == "mcml.thin") {
    mcml.thin = static_cast<int>(parse_long(value, key));
  } else if (key == "mcml.step_size") {
    mcml.step_size = parse_double(value, key);
  } else if (key == "mcml.log_sigma2_lo") {
    mcml.log_sigma2_lo = parse_double(value, key);
  } else if (key == "mcml.log_sigma2_hi") {
    mcml.log_sigma2_hi = parse_double(value, key);
  } else if (key == "predict.spacing") {
    predict_spacing = parse_double(value, key);
  } else if (key == "predict.threshold") {
    predict_threshold = parse_double(value, key);
  } else if (key == "sim.sigma") {
    sim_sigma = parse_double(value, key);
  } else if (key == "sim.phi") {
    sim_phi = parse_double(value, key);
  } else if (key == "sim.replicates") {
    sim_replicates = static_cast<int>(parse_long(value, key));
  } else {
    throw ParseError("cli", "unknown config key '" + key + "'");
  }
}

std::string RunConfig::canonical() const {
  // The output directory is deliberately absent: the hash identifies the
  // computation, and reruns into different directories must match.
  std::map<std::string, std::string> kv;
  kv["partition"] = partition_path;
  kv["counts"] = counts_path;
  kv["covariates"] = covariates_path;
  kv["raster"] = raster_path;
  kv["raster_per_m2"] = raster_per_m2 ? "true" : "false";
  kv["weighting"] = weighting == Weighting::Population ? "population" : "uniform";
  kv["phi_grid"] = format_double(phi_lo) + ":" + format_double(phi_hi) + ":" +
                   std::to_string(phi_n);
  kv["seed"] = std::to_string(seed);
  kv["threads"] = std::to_string(threads);
  kv["cache_file"] = cache_file;
  kv["quad.delta"] = format_double(quad.delta);
  kv["quad.gamma"] = format_double(quad.gamma);
  kv["quad.mode"] = quad.mode == QuadratureConfig::Mode::Adaptive ? "adaptive" : "nonadaptive";
  kv["quad.batch_k"] = std::to_string(quad.batch_size_k);
  kv["quad.eps"] = format_double(quad.rel_tol_eps);
  kv["quad.max_attempts"] = std::to_string(quad.max_attempts_per_point);
  kv["quad.max_rounds"] = std::to_string(quad.max_adaptive_rounds);
  kv["mcml.n_samples"] = std::to_string(mcml.n_samples);
  kv["mcml.outer_iters"] = std::to_string(mcml.outer_iters);
  kv["mcml.param_tol"] = format_double(mcml.param_tol);
  kv["mcml.burn_in"] = std::to_string(mcml.burn_in);
  kv["mcml.thin"] = std::to_string(mcml.thin);
  kv["mcml.step_size"] = format_double(mcml.step_size);
  kv["mcml.log_sigma2_lo"] = format_double(mcml.log_sigma2_lo);
  kv["mcml.log_sigma2_hi"] = format_double(mcml.log_sigma2_hi);
  kv["predict.spacing"] = format_double(predict_spacing);
  kv["predict.threshold"] = format_double(predict_threshold);
  kv["sim.sigma"] = format_double(sim_sigma);
  kv["sim.phi"] = format_double(sim_phi);
  kv["sim.replicates"] = std::to_string(sim_replicates);
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  return out.str();
}

std::uint64_t RunConfig::config_hash() const { return fnv1a(canonical()); }

int run_fit(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&]() -> int {
    fs::create_directories(config.out_dir);
    LoadedInputs in = load_inputs(config, /*need_counts=*/true);
    log << "loaded " << in.partition.size() << " regions\n";

    QuadratureOutput q = build_quadrature_and_cache(config, in, log);
    log << "covariance cache built over " << q.cache.entries().size() << " phi values\n";

    McmlConfig mcfg = config.mcml;
    mcfg.threads = config.threads;
    LatentSample sample;
    const FitResult fit = fit_with_sample(in.data, q.cache, config.phi_grid(), mcfg,
                                          derive_seed(config.seed, "fit"), &sample);
    log << "fit: beta0=" << fit.estimates.beta[0] << " sigma2=" << fit.estimates.sigma2
        << " phi=" << fit.estimates.phi << " converged=" << (fit.converged ? "yes" : "no")
        << "\n";

    write_text((fs::path(config.out_dir) / "fit.json").string(),
               fit_to_json(fit, config).dump(2) + "\n");

    std::ostringstream profile;
    profile << provenance_comment(config);
    profile.precision(17);
    profile << "phi,loglik\n";
    for (const ProfilePoint& p : fit.phi_profile) profile << p.phi << ',' << p.loglik << '\n';
    write_text((fs::path(config.out_dir) / "profile.csv").string(), profile.str());

    write_text((fs::path(config.out_dir) / "trace.csv").string(),
               provenance_comment(config) + trace_csv(sample));
    write_text((fs::path(config.out_dir) / "quadrature.csv").string(),
               provenance_comment(config) + quadrature_csv(q.quads));
    write_run_meta(config, "fit");

    return fit.warnings.empty() ? 0 : 1;
  });
}

int run_predict(const RunConfig& config, const std::string& fit_json_path, std::ostream& log) {
  return guarded(log, [&]() -> int {
    if (!fs::exists(fit_json_path)) {
      throw ParseError("cli", "fit file not found: '" + fit_json_path + "'");
    }
    fs::create_directories(config.out_dir);
    LoadedInputs in = load_inputs(config, /*need_counts=*/true);

    json fit_doc;
    {
      std::ifstream f(fit_json_path);
      f >> fit_doc;
    }
    ModelParams params;
    const auto& est = fit_doc.at("estimates");
    const auto betas = est.at("beta").get<std::vector<double>>();
    params.beta = Eigen::Map<const Eigen::VectorXd>(betas.data(), betas.size());
    params.sigma2 = est.at("sigma2").get<double>();
    params.phi = est.at("phi").get<double>();
    if (params.beta.size() != in.data.D.cols()) {
      throw ShapeError("cli", "fit.json beta length does not match the covariate design");
    }
    if (fit_doc.contains("provenance") &&
        fit_doc["provenance"].value("config_hash", "") != hash_hex(config.config_hash())) {
      log << "warning: config hash differs from the one recorded in " << fit_json_path
          << "; quadrature and cache may not match the fit\n";
    }

    QuadratureOutput q = build_quadrature_and_cache(config, in, log);
    const CacheEntry& entry = q.cache.at_phi(params.phi);

    McmlConfig mcfg = config.mcml;
    LatentSample sample = run_mala(in.data, params, entry, mcfg.chain(),
                                   derive_seed(config.seed, "predict-mala"));
    log << "drew " << sample.draws.rows() << " conditional samples (acceptance "
        << sample.acceptance_rate << ")\n";

    PredictionGrid grid =
        make_prediction_grid(in.partition, config.predict_spacing, config.predict_threshold);
    predict_surface(sample.draws, params, entry, in.data.D, q.quads, grid,
                    derive_seed(config.seed, "predict-surface"), config.threads);
    write_esri_ascii(surface_to_raster(grid, grid.mean),
                     (fs::path(config.out_dir) / "mean.asc").string());
    write_esri_ascii(surface_to_raster(grid, grid.sd),
                     (fs::path(config.out_dir) / "sd.asc").string());
    write_esri_ascii(surface_to_raster(grid, grid.exceed),
                     (fs::path(config.out_dir) / "exceed.asc").string());

    const RegionPrediction regions = predict_regions(sample.draws, in.data, in.ids);
    write_text((fs::path(config.out_dir) / "regions.csv").string(),
               provenance_comment(config) + region_prediction_csv(regions));
    write_run_meta(config, "predict");
    log << "surface written over " << grid.centers.size() << " cells\n";
    return sample.acceptance_warning ? 1 : 0;
  });
}

int run_simulate(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&]() -> int {
    fs::create_directories(config.out_dir);
    fs::create_directories(fs::path(config.out_dir) / "counts");
    LoadedInputs in = load_inputs(config, /*need_counts=*/false);
    if (!in.raster) throw ParseError("cli", "simulate requires a raster file");

    SimScenario scenario;
    scenario.sigma = config.sim_sigma;
    scenario.phi = config.sim_phi;
    scenario.grid_spacing = config.predict_spacing;
    scenario.replicates = config.sim_replicates;
    scenario.master_seed = derive_seed(config.seed, "simulate");
    scenario.weighting = config.weighting;
    scenario.quad = config.quad;
    scenario.phi_grid = config.phi_grid();
    scenario.mcml = config.mcml;
    scenario.risk_threshold = config.predict_threshold;

    const ScenarioResult result = run_scenario(scenario, in.partition, *in.raster,
                                               config.threads);

    std::ostringstream mcsv;
    mcsv << provenance_comment(config);
    mcsv.precision(17);
    mcsv << "target,bias,rmse,wpi,cp\n";
    for (const MetricReport* m : {&result.region_metrics, &result.risk_metrics}) {
      mcsv << m->target << ',' << m->bias << ',' << m->rmse << ',' << m->wpi << ',' << m->cp
           << '\n';
    }
    write_text((fs::path(config.out_dir) / "metrics.csv").string(), mcsv.str());

    json mj;
    mj["provenance"] = provenance_json(config);
    for (const MetricReport* m : {&result.region_metrics, &result.risk_metrics}) {
      mj["metrics"].push_back({{"target", m->target},
                               {"bias", m->bias},
                               {"rmse", m->rmse},
                               {"wpi", m->wpi},
                               {"cp", m->cp}});
    }
    write_text((fs::path(config.out_dir) / "metrics.json").string(), mj.dump(2) + "\n");

    std::ostringstream rcsv;
    rcsv << provenance_comment(config);
    rcsv.precision(17);
    rcsv << "replicate,seed,total_count,beta0_hat,sigma2_hat,phi_hat,converged\n";
    for (const ReplicateSummary& r : result.replicates) {
      rcsv << r.replicate << ',' << r.seed << ',' << r.total_count << ',' << r.beta0_hat << ','
           << r.sigma2_hat << ',' << r.phi_hat << ',' << (r.converged ? 1 : 0) << '\n';
    }
    write_text((fs::path(config.out_dir) / "replicates.csv").string(), rcsv.str());

    for (std::size_t b = 0; b < result.counts.size(); ++b) {
      std::ostringstream ccsv;
      ccsv << provenance_comment(config);
      ccsv << "region_id,count\n";
      for (std::size_t i = 0; i < in.ids.size(); ++i) {
        ccsv << in.ids[i] << ',' << result.counts[b][i] << '\n';
      }
      char name[32];
      std::snprintf(name, sizeof(name), "%04zu.csv", b);
      write_text((fs::path(config.out_dir) / "counts" / name).string(), ccsv.str());
    }
    write_run_meta(config, "simulate");

    log << "region-incidence: bias=" << result.region_metrics.bias
        << " rmse=" << result.region_metrics.rmse << " wpi=" << result.region_metrics.wpi
        << " cp=" << result.region_metrics.cp << "\n";
    log << "continuous-risk:  bias=" << result.risk_metrics.bias
        << " rmse=" << result.risk_metrics.rmse << " wpi=" << result.risk_metrics.wpi
        << " cp=" << result.risk_metrics.cp << "\n";

    bool warned = false;
    for (const ReplicateSummary& r : result.replicates) {
      if (!r.converged) warned = true;
    }
    return warned ? 1 : 0;
  });
}

int run_report(const std::string& out_dir, std::ostream& log) {
  return guarded(log, [&]() -> int {
    bool found = false;
    const fs::path fit_path = fs::path(out_dir) / "fit.json";
    if (fs::exists(fit_path)) {
      found = true;
      json j;
      std::ifstream f(fit_path);
      f >> j;
      log << "fit (" << fit_path.string() << ")\n";
      const auto& est = j.at("estimates");
      log << "  beta:";
      for (double b : est.at("beta").get<std::vector<double>>()) log << ' ' << b;
      log << "\n  sigma2: " << est.at("sigma2").get<double>() << "\n";
      log << "  phi: " << est.at("phi").get<double>() << "  CI95: ["
          << j.at("phi_ci_95")[0].get<double>() << ", " << j.at("phi_ci_95")[1].get<double>()
          << "]\n";
      log << "  converged: " << (j.at("converged").get<bool>() ? "yes" : "no") << "\n";
      for (const auto& w : j.at("warnings")) log << "  warning: " << w.get<std::string>() << "\n";
    }
    const fs::path metrics_path = fs::path(out_dir) / "metrics.json";
    if (fs::exists(metrics_path)) {
      found = true;
      json j;
      std::ifstream f(metrics_path);
      f >> j;
      log << "simulation metrics (" << metrics_path.string() << ")\n";
      for (const auto& m : j.at("metrics")) {
        log << "  " << m.at("target").get<std::string>() << ": bias="
            << m.at("bias").get<double>() << " rmse=" << m.at("rmse").get<double>()
            << " wpi=" << m.at("wpi").get<double>() << " cp=" << m.at("cp").get<double>() << "\n";
      }
    }
    if (!found) {
      throw ParseError("cli", "no fit.json or metrics.json under '" + out_dir + "'");
    }
    return 0;
  });
}

}  // namespace sda
