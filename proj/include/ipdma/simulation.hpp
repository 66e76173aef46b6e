#ifndef IPDMA_SIMULATION_HPP
#define IPDMA_SIMULATION_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ipdma/data_model.hpp"
#include "ipdma/sampler.hpp"

namespace ipdma {

enum class Variability { High, Medium, None };  // tau_k in (1.5,2.5), (0.5,1.5), = 0
enum class Sparsity { High, Medium, Low };      // 2, 4, 6 of 8 moderators nonzero
enum class Magnitude { Strong, Weak };          // gamma_k = 1.5 or 0.75
enum class CovCorrelation { High, None };       // off-diagonals in (0.5,0.9) or 0

// One cell of the 3 x 3 x 2 x 2 factorial design.
struct ScenarioSpec {
  Variability variability = Variability::High;
  Sparsity sparsity = Sparsity::High;
  Magnitude magnitude = Magnitude::Strong;
  CovCorrelation correlation = CovCorrelation::None;
  int replicates = 500;

  std::string label() const;  // e.g. "var=high,sparsity=high,magnitude=strong,corr=none"
  static ScenarioSpec parse(const std::string& line);  // "key=value" pairs, comma separated
};

// the full 36-cell grid, replicates applied to every cell
std::vector<ScenarioSpec> full_grid(int replicates);

// Generating parameter values of one replicate.
struct TruthRecord {
  double mu = 2.0;
  double alpha = 3.0;
  Eigen::VectorXd beta;    // 8 fixed values
  Eigen::VectorXd gamma;   // 8, leading entries nonzero per sparsity
  Eigen::VectorXd sigma;   // 5 noise SDs
  double tau_mu = 1.5;
  double tau_alpha = 1.5;
  Eigen::VectorXd tau_k;   // 8, drawn from the scenario interval (0 for None)
  std::vector<int> trial_sizes;
};

// Synthetic IPD under the mixed model: 5 trials, n_i ~ U{100..150}, 8 MVN
// covariates with the scenario's correlation, 1:1 treatment assignment by
// permutation. Covariates are returned uncentered. Reproducible from the seed.
std::pair<IpdDataset, TruthRecord> generate_dataset(const ScenarioSpec& scenario,
                                                    std::uint64_t truth_seed);

// Eqs. as typeset use a square root over the whole (unsquared, for bias) sum
// with denominator R d sum|gamma|; Conventional uses the standard estimators
// sqrt(mean squared error)/mean|gamma| etc. Orderings agree between the two.
enum class MetricVariant { Literal, Conventional };

// estimates: R x d posterior means across replicates; truth: length d with at
// least one nonzero entry (DomainError otherwise).
double arrmse(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth,
              MetricVariant variant = MetricVariant::Literal);
double aarbias(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth,
               MetricVariant variant = MetricVariant::Literal);
double arsd(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth,
            MetricVariant variant = MetricVariant::Literal);

// Participant-level risk of the treatment-plus-moderation predictor
// (em_only drops the alpha terms). data supplies t and the moderator columns.
double psrmse(double alpha_hat, const Eigen::VectorXd& gamma_hat, double alpha_true,
              const Eigen::VectorXd& gamma_true, const IpdDataset& data, bool em_only,
              MetricVariant variant = MetricVariant::Literal);

struct MethodMetrics {
  std::string method;
  double arrmse = 0.0;
  double aarbias = 0.0;
  double arsd = 0.0;
  double psrmse = 0.0;     // mean over replicates
  double psrmse_em = 0.0;  // mean over replicates
  int replicates_ok = 0;
  int replicates_failed = 0;
};

struct ScenarioResult {
  ScenarioSpec scenario;
  std::vector<MethodMetrics> methods;
  std::vector<int> ranking;  // method indices ordered by ascending ARRMSE
};

struct MetricsReport {
  std::vector<ScenarioResult> scenarios;
  MetricVariant variant = MetricVariant::Literal;

  // "scenario,method,metric,value" rows
  std::string to_csv() const;
  // "scenario,rank,method,arrmse" rows
  std::string ranking_csv() const;
};

struct StudyConfig {
  ChainConfig chain;                       // per-fit settings (chains, iterations, ...)
  MetricVariant variant = MetricVariant::Literal;
  int workers = 0;                         // concurrent replicate items; 0 = hardware
  bool moderator_random_effects = true;
  Centering centering = Centering::Pooled;
  std::string estimates_dir;               // when set, per-replicate estimates are written
};

// For each (scenario, replicate): generate one dataset (seed derived from
// master_seed, scenario and replicate indices), fit every method on it, take
// posterior means, and aggregate the risk metrics. Failed replicate fits are
// excluded and counted.
MetricsReport run_study(const std::vector<ScenarioSpec>& grid,
                        const std::vector<PriorMethod>& methods, const StudyConfig& config,
                        std::uint64_t master_seed);

}  // namespace ipdma

#endif
