#include "ipdma/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipdma/posterior.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ipdma {

const char* kVersion = "0.1.0";

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    const std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')
      out.push_back(c);
    else if (out.empty() || out.back() != '-')
      out.push_back('-');
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

// Staged file write: content lands under a temporary name and is renamed into
// place, so an interrupted run never leaves a partial output.
void write_file_staged(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".stage";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_text(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + " is not 'key = value'");
    cfg.entries_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stod(get(key));
  } catch (...) {
    throw UsageError("config key '" + key + "' is not a number");
  }
}

long KeyValueConfig::get_long(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stol(get(key));
  } catch (...) {
    throw UsageError("config key '" + key + "' is not an integer");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config key '" + key + "' is not a boolean");
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

namespace {

PriorMethod method_from_prior_keys(const KeyValueConfig& cfg) {
  const std::string tag = cfg.get("prior.tag", "Flat");
  if (tag == "HG") return PriorMethod::hg(cfg.get_double("prior.a", 4.0));
  if (tag == "HGN") return PriorMethod::hgn(cfg.get_double("prior.a", 4.0));
  if (tag == "SSVS")
    return PriorMethod::ssvs(cfg.get_double("prior.ssvs_c", 5.0),
                             cfg.get_double("prior.ssvs_h", 100.0));
  if (tag == "CMG") {
    const std::string level = cfg.get("prior.shrink_level", "S2");
    const std::string tun = cfg.get("prior.tuning", "n");
    ShrinkLevel s;
    if (level == "S1") s = ShrinkLevel::S1;
    else if (level == "S2") s = ShrinkLevel::S2;
    else if (level == "S3") s = ShrinkLevel::S3;
    else throw UsageError("prior.shrink_level must be S1|S2|S3");
    TuningKind f;
    if (tun == "n") f = TuningKind::N;
    else if (tun == "log") f = TuningKind::Log;
    else if (tun == "pow") f = TuningKind::Pow;
    else throw UsageError("prior.tuning must be n|log|pow");
    return PriorMethod::cmg(s, f);
  }
  return PriorMethod::parse(tag);
}

}  // namespace

RunConfig RunConfig::from_config(const KeyValueConfig& cfg) {
  RunConfig rc;
  rc.data_path = cfg.get("data.path");
  rc.columns.trial_id = cfg.get("data.col.trial_id", "trial_id");
  rc.columns.y = cfg.get("data.col.y", "y");
  rc.columns.t = cfg.get("data.col.t", "t");
  if (cfg.has("data.col.x")) rc.columns.covariates = split(cfg.get("data.col.x"), ',');

  const std::string centering = cfg.get("data.centering", "pooled");
  if (centering == "pooled") rc.centering = Centering::Pooled;
  else if (centering == "within_trial") rc.centering = Centering::WithinTrial;
  else throw UsageError("data.centering must be pooled|within_trial");

  if (cfg.has("model.moderators") && cfg.get("model.moderators") != "all") {
    for (const auto& tok : split(cfg.get("model.moderators"), ','))
      rc.moderators.push_back(std::stoi(tok) - 1);  // config uses 1-based indices
  }
  rc.moderator_random_effects = cfg.get_bool("model.moderator_random_effects", true);
  rc.compare_random_effects = cfg.get_bool("model.compare_random_effects", false);

  if (cfg.has("run.methods"))
    for (const auto& name : split(cfg.get("run.methods"), ','))
      rc.methods.push_back(PriorMethod::parse(name));
  else if (cfg.has("prior.tag"))
    rc.methods.push_back(method_from_prior_keys(cfg));

  rc.chain.n_chains = static_cast<int>(cfg.get_long("chain.n_chains", 2));
  rc.chain.n_iter = static_cast<int>(cfg.get_long("chain.n_iter", 20000));
  rc.chain.burn_in = static_cast<int>(cfg.get_long("chain.burn_in", 10000));
  rc.chain.thin = static_cast<int>(cfg.get_long("chain.thin", 10));
  rc.chain.seed = static_cast<std::uint64_t>(cfg.get_long("chain.seed", 0));

  rc.scenario_path = cfg.get("sim.scenarios");
  rc.full_grid = cfg.get_bool("sim.full_grid", false);
  rc.replicates = static_cast<int>(cfg.get_long("sim.replicates", 0));
  rc.draws_path = cfg.get("report.draws");

  rc.out_dir = cfg.get("run.out", "out");
  const std::string variant = cfg.get("run.metric_variant", "literal");
  if (variant == "literal") rc.metric_variant = MetricVariant::Literal;
  else if (variant == "conventional") rc.metric_variant = MetricVariant::Conventional;
  else throw UsageError("run.metric_variant must be literal|conventional");
  rc.threshold = cfg.get_double("run.threshold", 0.5);
  rc.workers = static_cast<int>(cfg.get_long("run.workers", 0));
  rc.save_estimates = cfg.get_bool("run.save_estimates", false);
  return rc;
}

namespace {

// resolved configuration as flat keys; written into the manifest so a run can
// be reproduced from it alone
std::map<std::string, std::string> resolved_keys(const RunConfig& rc) {
  std::map<std::string, std::string> kv;
  kv["subcommand"] = rc.subcommand;
  if (!rc.data_path.empty()) kv["data.path"] = rc.data_path;
  kv["data.col.trial_id"] = rc.columns.trial_id;
  kv["data.col.y"] = rc.columns.y;
  kv["data.col.t"] = rc.columns.t;
  if (!rc.columns.covariates.empty()) {
    std::string joined;
    for (const auto& c : rc.columns.covariates) joined += (joined.empty() ? "" : ",") + c;
    kv["data.col.x"] = joined;
  }
  kv["data.centering"] = rc.centering == Centering::Pooled ? "pooled" : "within_trial";
  if (!rc.moderators.empty()) {
    std::string joined;
    for (int m : rc.moderators)
      joined += (joined.empty() ? "" : ",") + std::to_string(m + 1);
    kv["model.moderators"] = joined;
  }
  kv["model.moderator_random_effects"] = rc.moderator_random_effects ? "true" : "false";
  kv["model.compare_random_effects"] = rc.compare_random_effects ? "true" : "false";
  if (!rc.methods.empty()) {
    std::string joined;
    for (const auto& m : rc.methods) joined += (joined.empty() ? "" : ",") + m.name();
    kv["run.methods"] = joined;
  }
  kv["chain.n_chains"] = std::to_string(rc.chain.n_chains);
  kv["chain.n_iter"] = std::to_string(rc.chain.n_iter);
  kv["chain.burn_in"] = std::to_string(rc.chain.burn_in);
  kv["chain.thin"] = std::to_string(rc.chain.thin);
  kv["chain.seed"] = std::to_string(rc.chain.seed);
  if (!rc.scenario_path.empty()) kv["sim.scenarios"] = rc.scenario_path;
  kv["sim.full_grid"] = rc.full_grid ? "true" : "false";
  if (rc.replicates > 0) kv["sim.replicates"] = std::to_string(rc.replicates);
  if (!rc.draws_path.empty()) kv["report.draws"] = rc.draws_path;
  kv["run.out"] = rc.out_dir;
  kv["run.metric_variant"] =
      rc.metric_variant == MetricVariant::Literal ? "literal" : "conventional";
  kv["run.threshold"] = format_double(rc.threshold);
  kv["run.workers"] = std::to_string(rc.workers);
  kv["run.save_estimates"] = rc.save_estimates ? "true" : "false";
  return kv;
}

// The manifest is itself a loadable flat config; it goes in before any output.
void write_manifest(const RunConfig& rc) {
  fs::create_directories(rc.out_dir);
  std::ostringstream os;
  os << "# ipdma manifest v" << kVersion << "\n";
  for (const auto& [k, v] : resolved_keys(rc)) os << k << " = " << v << "\n";
  // the manifest itself is not staged: it must exist before computation starts
  std::ofstream out(fs::path(rc.out_dir) / "manifest.txt", std::ios::binary);
  if (!out) throw DataError("cannot write manifest in '" + rc.out_dir + "'");
  out << os.str();
}

json summary_to_json(const PosteriorSummary& summary, double threshold) {
  json doc;
  doc["method"] = summary.method;
  doc["dic"] = summary.dic;
  json params = json::object();
  for (const auto& ps : summary.params) {
    params[ps.name] = {{"mean", ps.mean}, {"sd", ps.sd}, {"ci_low", ps.ci_low},
                       {"ci_high", ps.ci_high}};
  }
  doc["parameters"] = params;
  json pg = json::object();
  for (size_t k = 0; k < summary.p_gamma.size(); ++k)
    pg[summary.gamma_names[k]] = summary.p_gamma[k];
  doc["p_gamma"] = pg;
  const ModeratorFlags flags = flag_moderators(summary, threshold);
  doc["flagged_scaled_neighborhood"] = json::array();
  for (int k : flags.scaled_neighborhood)
    doc["flagged_scaled_neighborhood"].push_back(summary.gamma_names[k]);
  doc["flagged_ci_excludes_zero"] = json::array();
  for (int k : flags.ci_excludes_zero)
    doc["flagged_ci_excludes_zero"].push_back(summary.gamma_names[k]);
  doc["threshold"] = threshold;
  return doc;
}

std::string density_csv(const DensityTable& t) {
  std::ostringstream os;
  os << "x,density\n";
  for (int j = 0; j < t.x.size(); ++j)
    os << format_double(t.x[j]) << "," << format_double(t.density[j]) << "\n";
  return os.str();
}

IpdDataset load_dataset(const RunConfig& rc) {
  if (rc.data_path.empty()) throw UsageError("data.path is required");
  IpdDataset raw = ingest_csv(rc.data_path, rc.columns);
  if (!rc.moderators.empty()) raw.moderator_indices = rc.moderators;
  raw.validate();
  return center_covariates(raw, rc.centering);
}

}  // namespace

int cmd_fit(const RunConfig& rc) {
  if (rc.methods.empty())
    throw UsageError("no methods requested; set run.methods or prior.tag");
  write_manifest(rc);
  const IpdDataset data = load_dataset(rc);

  // p_gamma comparison table across methods (moderators x methods)
  std::vector<PosteriorSummary> summaries;

  for (const auto& method : rc.methods) {
    ModelSpec spec;
    spec.prior = method;
    spec.moderator_random_effects = rc.moderator_random_effects;
    ChainConfig cc = rc.chain;
    cc.workers = rc.workers;

    const PosteriorDraws draws = run_mcmc(data, spec, cc);
    PosteriorSummary summary = summarize(draws);
    summary.dic = dic(draws, data, spec);

    const std::string tagname = sanitize_filename(method.name());
    {
      // draws go through the same staging discipline as everything else
      const fs::path path = fs::path(rc.out_dir) / ("draws_" + tagname + ".csv");
      const fs::path tmp = path.string() + ".stage";
      write_draws_csv(tmp.string(), draws);
      fs::rename(tmp, path);
    }

    json doc = summary_to_json(summary, rc.threshold);
    if (rc.compare_random_effects) {
      ModelSpec other = spec;
      other.moderator_random_effects = !spec.moderator_random_effects;
      ChainConfig oc = cc;
      oc.seed = mix_seed(cc.seed, 0xD1D);
      const PosteriorDraws other_draws = run_mcmc(data, other, oc);
      doc["dic_alternative"] = dic(other_draws, data, other);
      doc["dic_alternative_moderator_random_effects"] = other.moderator_random_effects;
    }
    write_file_staged(fs::path(rc.out_dir) / ("summary_" + tagname + ".json"), doc.dump(2) + "\n");

    for (size_t k = 0; k < summary.gamma_names.size(); ++k) {
      const DensityTable table = density_export(draws.pooled(summary.gamma_names[k]));
      const std::string fname = "density_" + tagname + "_gamma" + std::to_string(k + 1) + ".csv";
      write_file_staged(fs::path(rc.out_dir) / fname, density_csv(table));
    }
    summaries.push_back(std::move(summary));
    std::cout << "fit " << method.name() << ": dic=" << summaries.back().dic << "\n";
  }

  // Table-3-style probability table
  std::ostringstream pg;
  pg << "moderator";
  for (const auto& s : summaries) pg << "," << s.method;
  pg << "\n";
  if (!summaries.empty()) {
    for (size_t k = 0; k < summaries[0].gamma_names.size(); ++k) {
      pg << summaries[0].gamma_names[k];
      for (const auto& s : summaries) pg << "," << format_double(s.p_gamma[k]);
      pg << "\n";
    }
  }
  write_file_staged(fs::path(rc.out_dir) / "pgamma.csv", pg.str());
  return 0;
}

int cmd_simulate(const RunConfig& rc) {
  if (rc.methods.empty())
    throw UsageError("no methods requested; set run.methods");
  std::vector<ScenarioSpec> grid;
  if (rc.full_grid) {
    grid = full_grid(rc.replicates > 0 ? rc.replicates : 500);
  } else if (!rc.scenario_path.empty()) {
    std::ifstream in(rc.scenario_path);
    if (!in) throw UsageError("cannot open scenario file '" + rc.scenario_path + "'");
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      grid.push_back(ScenarioSpec::parse(t));
    }
    if (rc.replicates > 0)
      for (auto& s : grid) s.replicates = rc.replicates;
  } else {
    throw UsageError("simulate needs sim.scenarios or sim.full_grid");
  }
  if (grid.empty()) throw UsageError("scenario grid is empty");
  for (const auto& s : grid)
    if (s.replicates < 1) throw UsageError("replicates must be >= 1");

  write_manifest(rc);

  StudyConfig sc;
  sc.chain = rc.chain;
  sc.variant = rc.metric_variant;
  sc.workers = rc.workers;
  sc.moderator_random_effects = rc.moderator_random_effects;
  sc.centering = rc.centering;
  if (rc.save_estimates) {
    sc.estimates_dir = (fs::path(rc.out_dir) / "estimates").string();
    fs::create_directories(sc.estimates_dir);
  }

  {
    // rough wall-clock estimate from one pilot fit
    long total_fits = 0;
    for (const auto& s : grid) total_fits += static_cast<long>(s.replicates) * rc.methods.size();
    const auto t0 = std::chrono::steady_clock::now();
    auto [raw, truth] = generate_dataset(grid[0], mix_seed(rc.chain.seed, 0xFEED));
    const IpdDataset pilot = center_covariates(raw, rc.centering);
    ModelSpec spec;
    spec.prior = rc.methods[0];
    spec.moderator_random_effects = rc.moderator_random_effects;
    ChainConfig cc = rc.chain;
    cc.workers = 1;
    run_mcmc(pilot, spec, cc);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const int workers = sc.workers > 0 ? sc.workers
                                       : std::max(1u, std::thread::hardware_concurrency());
    std::cout << "planned fits: " << total_fits << ", estimated wall clock: "
              << secs * total_fits / workers << " s on " << workers << " workers\n";
  }

  const MetricsReport report = run_study(grid, rc.methods, sc, rc.chain.seed);
  write_file_staged(fs::path(rc.out_dir) / "metrics.csv", report.to_csv());
  write_file_staged(fs::path(rc.out_dir) / "ranking.csv", report.ranking_csv());

  int failures = 0;
  for (const auto& sr : report.scenarios)
    for (const auto& mm : sr.methods) failures += mm.replicates_failed;
  if (failures > 0)
    std::cerr << "warning: " << failures << " replicate fits failed and were excluded\n";
  std::cout << report.ranking_csv();
  return failures > 0 ? 3 : 0;
}

int cmd_report(const RunConfig& rc) {
  if (rc.draws_path.empty()) throw UsageError("report needs report.draws (a draws CSV)");
  write_manifest(rc);
  const PosteriorDraws draws = read_draws_csv(rc.draws_path);
  PosteriorSummary summary = summarize(draws);
  const std::string tagname = sanitize_filename(summary.method.empty() ? "draws" : summary.method);
  write_file_staged(fs::path(rc.out_dir) / ("summary_" + tagname + ".json"),
                    summary_to_json(summary, rc.threshold).dump(2) + "\n");
  for (size_t k = 0; k < summary.gamma_names.size(); ++k) {
    const DensityTable table = density_export(draws.pooled(summary.gamma_names[k]));
    const std::string fname = "density_" + tagname + "_gamma" + std::to_string(k + 1) + ".csv";
    write_file_staged(fs::path(rc.out_dir) / fname, density_csv(table));
  }
  return 0;
}

int cmd_prior_curves(const RunConfig& rc) {
  std::vector<PriorMethod> methods = rc.methods;
  if (methods.empty())
    for (const auto& name : method_roster()) methods.push_back(PriorMethod::parse(name));
  write_manifest(rc);
  const double N = 625;  // five trials of 125 participants

  for (const auto& m : methods) {
    if (!m.has_proper_g_hyperprior()) {
      std::cerr << "skipping " << m.name() << ": no proper hyperprior on g\n";
      continue;
    }
    const std::string tagname = sanitize_filename(m.name());
    write_file_staged(fs::path(rc.out_dir) / ("prior_g_" + tagname + ".csv"),
                      density_csv(prior_g_density(m, N, 1e-3, 100.0, 600)));
    write_file_staged(fs::path(rc.out_dir) / ("prior_shrinkage_" + tagname + ".csv"),
                      density_csv(prior_shrinkage_density(m, N, 512)));
    if (m.samples_b())
      write_file_staged(fs::path(rc.out_dir) / ("prior_shrinkage_b1.2_" + tagname + ".csv"),
                        density_csv(prior_shrinkage_density_given_b(m, 1.2, N, 512)));
  }

  // growth of the three tuning functions at p = 0.5
  std::ostringstream os;
  os << "n,f_n,f_log,f_pow\n";
  for (int n = 10; n <= 1000; ++n) {
    os << n << "," << format_double(tuning_f(TuningKind::N, n, 0.5)) << ","
       << format_double(tuning_f(TuningKind::Log, n, 0.5)) << ","
       << format_double(tuning_f(TuningKind::Pow, n, 0.5)) << "\n";
  }
  write_file_staged(fs::path(rc.out_dir) / "tuning_curves.csv", os.str());
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Bayesian IPD meta-analysis of treatment effect moderation"};
  app.set_version_flag("--version", std::string("ipdma ") + kVersion);
  app.require_subcommand(1);

  std::string config_path, methods_csv, out_dir, data_path, scenario_path, draws_path,
      metric_variant;
  long seed = -1;
  double threshold = -1.0;
  int workers = -1, replicates = -1;
  bool full = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--methods", methods_csv, "comma-separated method names");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--metric-variant", metric_variant, "literal|conventional");
    sub->add_option("--threshold", threshold, "scaled-neighborhood flag threshold");
    sub->add_option("--workers", workers, "concurrent workers");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit methods to a dataset");
  add_common(fit);
  fit->add_option("--data", data_path, "input CSV");

  CLI::App* simulate = app.add_subcommand("simulate", "run the simulation study");
  add_common(simulate);
  simulate->add_option("--scenarios", scenario_path, "scenario grid file");
  simulate->add_option("--replicates", replicates, "replicates per scenario");
  simulate->add_flag("--full-grid", full, "all 36 factorial cells");

  CLI::App* report = app.add_subcommand("report", "summaries from persisted draws");
  add_common(report);
  report->add_option("--draws", draws_path, "draws CSV produced by fit");

  CLI::App* curves = app.add_subcommand("prior-curves", "export prior density curves");
  add_common(curves);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    KeyValueConfig cfg =
        config_path.empty() ? KeyValueConfig() : KeyValueConfig::from_file(config_path);
    // flags override file values
    if (seed >= 0) cfg.set("chain.seed", std::to_string(seed));
    if (!methods_csv.empty()) cfg.set("run.methods", methods_csv);
    if (!out_dir.empty()) cfg.set("run.out", out_dir);
    if (!metric_variant.empty()) cfg.set("run.metric_variant", metric_variant);
    if (threshold >= 0.0) cfg.set("run.threshold", format_double(threshold));
    if (workers >= 0) cfg.set("run.workers", std::to_string(workers));
    if (!data_path.empty()) cfg.set("data.path", data_path);
    if (!scenario_path.empty()) cfg.set("sim.scenarios", scenario_path);
    if (replicates >= 0) cfg.set("sim.replicates", std::to_string(replicates));
    if (full) cfg.set("sim.full_grid", "true");
    if (!draws_path.empty()) cfg.set("report.draws", draws_path);

    RunConfig rc = RunConfig::from_config(cfg);
    if (fit->parsed()) {
      rc.subcommand = "fit";
      return cmd_fit(rc);
    }
    if (simulate->parsed()) {
      rc.subcommand = "simulate";
      return cmd_simulate(rc);
    }
    if (report->parsed()) {
      rc.subcommand = "report";
      return cmd_report(rc);
    }
    rc.subcommand = "prior-curves";
    return cmd_prior_curves(rc);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ipdma
