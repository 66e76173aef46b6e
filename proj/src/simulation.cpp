#include "ipdma/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "ipdma/posterior.hpp"

namespace ipdma {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

const char* to_str(Variability v) {
  switch (v) {
    case Variability::High: return "high";
    case Variability::Medium: return "medium";
    default: return "none";
  }
}
const char* to_str(Sparsity s) {
  switch (s) {
    case Sparsity::High: return "high";
    case Sparsity::Medium: return "medium";
    default: return "low";
  }
}
const char* to_str(Magnitude m) { return m == Magnitude::Strong ? "strong" : "weak"; }
const char* to_str(CovCorrelation c) { return c == CovCorrelation::High ? "high" : "none"; }

}  // namespace

std::string ScenarioSpec::label() const {
  std::ostringstream os;
  os << "var=" << to_str(variability) << ",sparsity=" << to_str(sparsity)
     << ",magnitude=" << to_str(magnitude) << ",corr=" << to_str(correlation);
  return os.str();
}

ScenarioSpec ScenarioSpec::parse(const std::string& line) {
  ScenarioSpec spec;
  std::istringstream is(line);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw UsageError("scenario entry '" + tok + "' is not key=value");
    const std::string key = lower(tok.substr(0, eq));
    const std::string val = lower(tok.substr(eq + 1));
    if (key == "var" || key == "variability") {
      if (val == "high") spec.variability = Variability::High;
      else if (val == "medium") spec.variability = Variability::Medium;
      else if (val == "none") spec.variability = Variability::None;
      else throw UsageError("variability must be high|medium|none");
    } else if (key == "sparsity") {
      if (val == "high") spec.sparsity = Sparsity::High;
      else if (val == "medium") spec.sparsity = Sparsity::Medium;
      else if (val == "low") spec.sparsity = Sparsity::Low;
      else throw UsageError("sparsity must be high|medium|low");
    } else if (key == "magnitude") {
      if (val == "strong") spec.magnitude = Magnitude::Strong;
      else if (val == "weak") spec.magnitude = Magnitude::Weak;
      else throw UsageError("magnitude must be strong|weak");
    } else if (key == "corr" || key == "correlation") {
      if (val == "high") spec.correlation = CovCorrelation::High;
      else if (val == "none") spec.correlation = CovCorrelation::None;
      else throw UsageError("correlation must be high|none");
    } else if (key == "replicates") {
      spec.replicates = std::stoi(val);
      if (spec.replicates < 1) throw UsageError("replicates must be >= 1");
    } else {
      throw UsageError("unknown scenario key '" + key + "'");
    }
  }
  return spec;
}

std::vector<ScenarioSpec> full_grid(int replicates) {
  std::vector<ScenarioSpec> grid;
  for (Variability v : {Variability::High, Variability::Medium, Variability::None})
    for (Sparsity s : {Sparsity::High, Sparsity::Medium, Sparsity::Low})
      for (Magnitude m : {Magnitude::Strong, Magnitude::Weak})
        for (CovCorrelation c : {CovCorrelation::High, CovCorrelation::None})
          grid.push_back({v, s, m, c, replicates});
  return grid;
}

namespace {

// nearest positive-definite correlation matrix by alternating eigenvalue
// clipping and unit-diagonal restoration
Eigen::MatrixXd nearest_correlation(Eigen::MatrixXd R) {
  const int p = static_cast<int>(R.rows());
  for (int it = 0; it < 100; ++it) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
    if (eig.eigenvalues().minCoeff() > 1e-6) {
      bool unit = true;
      for (int j = 0; j < p; ++j)
        if (std::abs(R(j, j) - 1.0) > 1e-12) unit = false;
      if (unit) break;
    }
    Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(1e-6);
    R = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
    for (int j = 0; j < p; ++j) R(j, j) = 1.0;
    R = 0.5 * (R + R.transpose());
  }
  return R;
}

Eigen::MatrixXd scenario_correlation(CovCorrelation corr, int p, Rng& rng) {
  if (corr == CovCorrelation::None) return Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(p, p);
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b) R(a, b) = R(b, a) = rng.uniform(0.5, 0.9);
  return nearest_correlation(R);
}

}  // namespace

std::pair<IpdDataset, TruthRecord> generate_dataset(const ScenarioSpec& scenario,
                                                    std::uint64_t truth_seed) {
  constexpr int I = 5, p = 8;
  Rng rng(truth_seed);

  TruthRecord truth;
  truth.beta = (Eigen::VectorXd(p) << 1.8, 2.7, 2.3, 1.5, 1.7, 2.2, 1.3, 2.6).finished();
  truth.sigma = (Eigen::VectorXd(I) << 3.5, 2.5, 2.1, 2.8, 3.0).finished();

  const double mag = scenario.magnitude == Magnitude::Strong ? 1.5 : 0.75;
  int nonzero = 2;
  if (scenario.sparsity == Sparsity::Medium) nonzero = 4;
  if (scenario.sparsity == Sparsity::Low) nonzero = 6;
  truth.gamma = Eigen::VectorXd::Zero(p);
  truth.gamma.head(nonzero).setConstant(mag);

  truth.tau_k = Eigen::VectorXd::Zero(p);
  if (scenario.variability != Variability::None) {
    const double lo = scenario.variability == Variability::High ? 1.5 : 0.5;
    for (int k = 0; k < p; ++k) truth.tau_k[k] = rng.uniform(lo, lo + 1.0);
  }

  IpdDataset data;
  data.p = p;
  data.moderator_indices.resize(p);
  std::iota(data.moderator_indices.begin(), data.moderator_indices.end(), 0);

  for (int i = 0; i < I; ++i) {
    const int n = 100 + static_cast<int>(rng.below(51));
    truth.trial_sizes.push_back(n);

    const Eigen::MatrixXd R = scenario_correlation(scenario.correlation, p, rng);
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(R).matrixL();

    TrialBlock tr;
    tr.trial_id = "trial" + std::to_string(i + 1);
    tr.X.resize(n, p);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd z(p);
      for (int k = 0; k < p; ++k) z[k] = rng.normal();
      tr.X.row(j) = (L * z).transpose();
    }

    // 1:1 assignment by permutation
    tr.t = Eigen::VectorXd::Zero(n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int j = n - 1; j > 0; --j)
      std::swap(order[j], order[rng.below(static_cast<std::uint64_t>(j) + 1)]);
    for (int j = 0; j < n / 2; ++j) tr.t[order[j]] = 1.0;

    const double u_mu = rng.normal(0.0, truth.tau_mu);
    const double u_alpha = rng.normal(0.0, truth.tau_alpha);
    Eigen::VectorXd u_k(p);
    for (int k = 0; k < p; ++k)
      u_k[k] = truth.tau_k[k] > 0.0 ? rng.normal(0.0, truth.tau_k[k]) : 0.0;

    tr.y.resize(n);
    for (int j = 0; j < n; ++j) {
      double mean = truth.mu + u_mu + tr.t[j] * (truth.alpha + u_alpha);
      mean += tr.X.row(j).dot(truth.beta);
      for (int k = 0; k < p; ++k) mean += tr.t[j] * tr.X(j, k) * (truth.gamma[k] + u_k[k]);
      tr.y[j] = mean + rng.normal(0.0, truth.sigma[i]);
    }
    data.trials.push_back(std::move(tr));
  }
  data.validate();
  return {std::move(data), std::move(truth)};
}

namespace {

double truth_denominator(const Eigen::VectorXd& truth) {
  const double denom = truth.cwiseAbs().sum();
  if (denom <= 0.0)
    throw DomainError("risk metrics undefined: truth gamma has no nonzero entry");
  return denom;
}

void check_shapes(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth) {
  if (estimates.rows() < 1) throw DomainError("risk metrics need at least one replicate");
  if (estimates.cols() != truth.size())
    throw DomainError("estimate matrix width does not match truth length");
}

}  // namespace

double arrmse(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth,
              MetricVariant variant) {
  check_shapes(estimates, truth);
  const double denom = truth_denominator(truth);
  const double R = static_cast<double>(estimates.rows());
  const double d = static_cast<double>(truth.size());
  const double sq = (estimates.rowwise() - truth.transpose()).squaredNorm();
  if (variant == MetricVariant::Literal) return std::sqrt(sq) / (R * d * denom);
  return std::sqrt(sq / (R * d)) / (denom / d);
}

double aarbias(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth,
               MetricVariant variant) {
  check_shapes(estimates, truth);
  const double denom = truth_denominator(truth);
  const double R = static_cast<double>(estimates.rows());
  const double d = static_cast<double>(truth.size());
  const double abs_sum = (estimates.rowwise() - truth.transpose()).cwiseAbs().sum();
  if (variant == MetricVariant::Literal) return std::sqrt(abs_sum) / (R * d * denom);
  return abs_sum / (R * d) / (denom / d);
}

double arsd(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth,
            MetricVariant variant) {
  check_shapes(estimates, truth);
  const double denom = truth_denominator(truth);
  const double R = static_cast<double>(estimates.rows());
  const double d = static_cast<double>(truth.size());
  const Eigen::RowVectorXd means = estimates.colwise().mean();
  const double sq = (estimates.rowwise() - means).squaredNorm();
  if (variant == MetricVariant::Literal) return std::sqrt(sq) / (R * d * denom);
  return std::sqrt(sq / (R * d)) / (denom / d);
}

double psrmse(double alpha_hat, const Eigen::VectorXd& gamma_hat, double alpha_true,
              const Eigen::VectorXd& gamma_true, const IpdDataset& data, bool em_only,
              MetricVariant variant) {
  const int d = data.d();
  if (gamma_hat.size() != d || gamma_true.size() != d)
    throw DomainError("psrmse: gamma length does not match the dataset's moderators");
  const double N = static_cast<double>(data.n_total());
  double sq = 0.0;
  for (const auto& tr : data.trials) {
    Eigen::VectorXd diff = Eigen::VectorXd::Zero(tr.n());
    if (!em_only) diff += (alpha_true - alpha_hat) * tr.t;
    for (int k = 0; k < d; ++k)
      diff += (gamma_true[k] - gamma_hat[k]) *
              tr.t.cwiseProduct(tr.X.col(data.moderator_indices[k]));
    sq += diff.squaredNorm();
  }
  const double norm = std::sqrt(sq);  // Euclidean norm of the stacked difference
  if (variant == MetricVariant::Literal) return std::sqrt(norm / N);
  return std::sqrt(sq / N);
}

namespace {

struct ReplicateOutcome {
  bool ok = false;
  Eigen::VectorXd gamma_hat;  // d
  double alpha_hat = 0.0;
  double psrmse_value = 0.0;
  double psrmse_em_value = 0.0;
};

}  // namespace

MetricsReport run_study(const std::vector<ScenarioSpec>& grid,
                        const std::vector<PriorMethod>& methods, const StudyConfig& config,
                        std::uint64_t master_seed) {
  if (grid.empty()) throw UsageError("empty scenario grid");
  if (methods.empty()) throw UsageError("empty method list");

  struct Item {
    int scenario, replicate;
  };
  std::vector<Item> items;
  for (int s = 0; s < static_cast<int>(grid.size()); ++s)
    for (int r = 0; r < grid[s].replicates; ++r) items.push_back({s, r});

  // results[scenario][method][replicate]
  std::vector<std::vector<std::vector<ReplicateOutcome>>> results(grid.size());
  std::vector<Eigen::VectorXd> truths(grid.size());
  for (size_t s = 0; s < grid.size(); ++s) {
    results[s].assign(methods.size(),
                      std::vector<ReplicateOutcome>(grid[s].replicates));
    // gamma pattern is a scenario constant (only tau_k varies per replicate)
    const double mag = grid[s].magnitude == Magnitude::Strong ? 1.5 : 0.75;
    int nonzero = 2;
    if (grid[s].sparsity == Sparsity::Medium) nonzero = 4;
    if (grid[s].sparsity == Sparsity::Low) nonzero = 6;
    truths[s] = Eigen::VectorXd::Zero(8);
    truths[s].head(nonzero).setConstant(mag);
  }

  auto run_item = [&](const Item& item) {
    const ScenarioSpec& scen = grid[item.scenario];
    const std::uint64_t rep_seed =
        mix_seed(mix_seed(master_seed, 0xA0 + item.scenario), 0xB000 + item.replicate);
    auto [raw, truth] = generate_dataset(scen, rep_seed);
    const IpdDataset data = center_covariates(raw, config.centering);

    // true alpha in the centered parametrization absorbs sum_k mean_k gamma_k
    double alpha_eff = truth.alpha;
    for (int k = 0; k < data.d(); ++k)
      alpha_eff += data.column_means.size() > 0
                       ? data.column_means[data.moderator_indices[k]] * truth.gamma[k]
                       : 0.0;

    for (size_t m = 0; m < methods.size(); ++m) {
      ReplicateOutcome& out = results[item.scenario][m][item.replicate];
      try {
        ModelSpec spec;
        spec.prior = methods[m];
        spec.moderator_random_effects = config.moderator_random_effects;
        ChainConfig cc = config.chain;
        cc.seed = mix_seed(rep_seed, 0xC00 + m);
        cc.workers = 1;  // parallelism lives at the replicate level
        const PosteriorDraws draws = run_mcmc(data, spec, cc);
        const Eigen::MatrixXd pooled = draws.pooled_all();
        const Eigen::VectorXd mean = pooled.colwise().mean().transpose();
        out.gamma_hat.resize(data.d());
        for (int k = 0; k < data.d(); ++k)
          out.gamma_hat[k] = mean[draws.index_of("gamma[" + std::to_string(k + 1) + "]")];
        const int alpha_idx = draws.index_of("alpha");
        out.alpha_hat = alpha_idx >= 0 ? mean[alpha_idx] : 0.0;
        out.psrmse_value = psrmse(out.alpha_hat, out.gamma_hat, alpha_eff, truth.gamma, data,
                                  false, config.variant);
        out.psrmse_em_value = psrmse(out.alpha_hat, out.gamma_hat, alpha_eff, truth.gamma, data,
                                     true, config.variant);
        out.ok = true;
      } catch (const std::exception&) {
        out.ok = false;
      }
    }
  };

  const int workers = config.workers > 0
                          ? config.workers
                          : std::max(1u, std::thread::hardware_concurrency());
  if (workers <= 1 || items.size() <= 1) {
    for (const auto& item : items) run_item(item);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const int n_threads = std::min<size_t>(workers, items.size());
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (size_t j = next.fetch_add(1); j < items.size(); j = next.fetch_add(1))
          run_item(items[j]);
      });
    for (auto& th : pool) th.join();
  }

  MetricsReport report;
  report.variant = config.variant;
  for (size_t s = 0; s < grid.size(); ++s) {
    ScenarioResult sr;
    sr.scenario = grid[s];
    for (size_t m = 0; m < methods.size(); ++m) {
      const auto& reps = results[s][m];
      MethodMetrics mm;
      mm.method = methods[m].name();
      std::vector<const ReplicateOutcome*> ok;
      for (const auto& r : reps)
        if (r.ok) ok.push_back(&r);
      mm.replicates_ok = static_cast<int>(ok.size());
      mm.replicates_failed = static_cast<int>(reps.size() - ok.size());
      if (!ok.empty()) {
        Eigen::MatrixXd est(ok.size(), truths[s].size());
        double ps = 0.0, ps_em = 0.0;
        for (size_t r = 0; r < ok.size(); ++r) {
          est.row(r) = ok[r]->gamma_hat.transpose();
          ps += ok[r]->psrmse_value;
          ps_em += ok[r]->psrmse_em_value;
        }
        mm.arrmse = arrmse(est, truths[s], config.variant);
        mm.aarbias = aarbias(est, truths[s], config.variant);
        mm.arsd = arsd(est, truths[s], config.variant);
        mm.psrmse = ps / ok.size();
        mm.psrmse_em = ps_em / ok.size();

        if (!config.estimates_dir.empty()) {
          const std::string path = config.estimates_dir + "/estimates_s" + std::to_string(s) +
                                   "_" + mm.method + ".csv";
          std::ofstream f(path);
          f << "replicate";
          for (int k = 0; k < est.cols(); ++k) f << ",gamma" << (k + 1);
          f << "\n";
          for (int r = 0; r < est.rows(); ++r) {
            f << (r + 1);
            for (int k = 0; k < est.cols(); ++k) f << "," << est(r, k);
            f << "\n";
          }
        }
      }
      sr.methods.push_back(mm);
    }
    sr.ranking.resize(methods.size());
    std::iota(sr.ranking.begin(), sr.ranking.end(), 0);
    std::stable_sort(sr.ranking.begin(), sr.ranking.end(), [&](int a, int b) {
      return sr.methods[a].arrmse < sr.methods[b].arrmse;
    });
    report.scenarios.push_back(std::move(sr));
  }
  return report;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "scenario,method,metric,value\n";
  char buf[40];
  auto row = [&](const std::string& scen, const std::string& method, const char* metric,
                 double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    os << scen << "," << method << "," << metric << "," << buf << "\n";
  };
  for (const auto& sr : scenarios) {
    const std::string scen = sr.scenario.label();
    for (const auto& mm : sr.methods) {
      row(scen, mm.method, "arrmse", mm.arrmse);
      row(scen, mm.method, "aarbias", mm.aarbias);
      row(scen, mm.method, "arsd", mm.arsd);
      row(scen, mm.method, "psrmse", mm.psrmse);
      row(scen, mm.method, "psrmse_em", mm.psrmse_em);
      row(scen, mm.method, "replicates_ok", mm.replicates_ok);
      row(scen, mm.method, "replicates_failed", mm.replicates_failed);
    }
  }
  return os.str();
}

std::string MetricsReport::ranking_csv() const {
  std::ostringstream os;
  os << "scenario,rank,method,arrmse\n";
  char buf[40];
  for (const auto& sr : scenarios) {
    const std::string scen = sr.scenario.label();
    for (size_t r = 0; r < sr.ranking.size(); ++r) {
      const auto& mm = sr.methods[sr.ranking[r]];
      std::snprintf(buf, sizeof buf, "%.12g", mm.arrmse);
      os << scen << "," << (r + 1) << "," << mm.method << "," << buf << "\n";
    }
  }
  return os.str();
}

}  // namespace ipdma
