#ifndef IPDMA_DATA_MODEL_HPP
#define IPDMA_DATA_MODEL_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ipdma/errors.hpp"
#include "ipdma/priors_method.hpp"

namespace ipdma {

// All participant records of one trial, in file order.
struct TrialBlock {
  std::string trial_id;
  Eigen::VectorXd y;  // continuous outcomes, length n_i
  Eigen::VectorXd t;  // 0/1 treatment indicators, length n_i
  Eigen::MatrixXd X;  // n_i x p baseline covariates

  int n() const { return static_cast<int>(y.size()); }
};

enum class Centering { None, Pooled, WithinTrial };

// Trial-indexed participant data shared (immutably) by priors, sampler and
// simulation harness. Covariates are centered explicitly via center_covariates;
// the original column means are kept so the transform can be undone.
struct IpdDataset {
  std::vector<TrialBlock> trials;
  int p = 0;                            // covariate count, identical across trials
  std::vector<int> moderator_indices;   // 0-based covariate indices, size d

  Centering centering = Centering::None;
  Eigen::VectorXd column_means;   // p, pooled means removed (Pooled mode)
  Eigen::MatrixXd trial_means;    // I x p, per-trial means removed (WithinTrial mode)

  int n_trials() const { return static_cast<int>(trials.size()); }
  int d() const { return static_cast<int>(moderator_indices.size()); }
  int n_total() const {
    int n = 0;
    for (const auto& tr : trials) n += tr.n();
    return n;
  }
  std::vector<int> trial_sizes() const {
    std::vector<int> ns;
    ns.reserve(trials.size());
    for (const auto& tr : trials) ns.push_back(tr.n());
    return ns;
  }

  // stacked treatment indicators across trials, length N
  Eigen::VectorXd stacked_t() const;
  // stacked outcomes, length N
  Eigen::VectorXd stacked_y() const;

  // throws ValidationError if any structural invariant fails
  void validate() const;
};

struct ColumnMap {
  std::string trial_id = "trial_id";
  std::string y = "y";
  std::string t = "t";
  std::vector<std::string> covariates;  // empty -> autodetect x1..xp
};

// Parses a UTF-8 comma-separated file with a header row. One TrialBlock per
// distinct trial_id, first-appearance order, rows kept in file order.
// Covariates are NOT centered. Rejects missing/non-numeric cells (IngestError,
// message names the file row) and single-arm or undersized trials
// (ValidationError). Missing required columns raise SchemaError.
IpdDataset ingest_csv(const std::string& path, const ColumnMap& schema = ColumnMap());

// Same parser over an in-memory buffer (used by tests and round-trips).
IpdDataset ingest_csv_text(const std::string& text, const ColumnMap& schema = ColumnMap(),
                           const std::string& origin = "<memory>");

// Removes covariate column means, pooled across trials (default) or per trial.
// Returns a new dataset; means are retained for back-transformation.
IpdDataset center_covariates(const IpdDataset& data, Centering mode = Centering::Pooled);

// Restores the original covariates from the centering metadata.
IpdDataset uncenter_covariates(const IpdDataset& data);

// Stacked interaction column t o x_[k] for covariate index k (0-based).
// k must be one of data.moderator_indices.
Eigen::VectorXd moderator_column(const IpdDataset& data, int k);

// Which terms of the mixed model are active for a fit. The default matches
// the full model: intercept and treatment main effects with trial-level
// random effects, fixed baseline effects, and moderator random effects.
struct ModelSpec {
  PriorMethod prior;
  std::vector<int> moderator_indices;        // empty -> take the dataset's
  bool moderator_random_effects = true;      // u_i and tau_k^2
  bool trial_random_effects = true;          // u_mu, u_alpha, tau_mu^2, tau_alpha^2
  bool intercept = true;                     // mu
  bool treatment_effect = true;              // alpha
  bool baseline_effects = true;              // beta
};

// One point of the parameter space visited by the sampler. Vectors are sized
// by the active ModelSpec; latents not used by the prior method stay empty.
struct ParameterState {
  double mu = 0.0;
  double alpha = 0.0;
  Eigen::VectorXd beta;      // p
  Eigen::VectorXd gamma;     // d
  Eigen::VectorXd sigma2;    // I, all > 0
  double tau_mu2 = 1.0;
  double tau_alpha2 = 1.0;
  Eigen::VectorXd tau_k2;    // d (empty when moderator random effects excluded)
  Eigen::VectorXd u_mu;      // I
  Eigen::VectorXd u_alpha;   // I
  Eigen::MatrixXd u;         // I x d (empty when excluded)

  // prior latents, populated per method
  Eigen::VectorXd g;         // d: g_k of the mixtures-of-g methods
  Eigen::VectorXd b;         // d: Beta-shape latents of the S1/S3 hyperpriors
  Eigen::VectorXd p_trial;   // I: sample-size tuning fractions p_i
  Eigen::VectorXd lambda2;   // d: horseshoe local variances
  double tau_hs2 = 1.0;      // horseshoe global variance
  Eigen::VectorXi inclusion; // d: SSVS indicators, 0/1
  double eta = 1.0;          // SSVS spike scale

  // auxiliary inverse-gamma mixing variables (half-Cauchy representation);
  // part of the Markov state, not reported
  double aux_tau_mu = 1.0;
  double aux_tau_alpha = 1.0;
  Eigen::VectorXd aux_tau_k;   // d
  Eigen::VectorXd aux_lambda;  // d
  double aux_tau_hs = 1.0;
};

}  // namespace ipdma

#endif
