#ifndef IPDMA_SAMPLER_HPP
#define IPDMA_SAMPLER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ipdma/data_model.hpp"
#include "ipdma/priors.hpp"
#include "ipdma/rng.hpp"

namespace ipdma {

struct ChainConfig {
  int n_chains = 2;
  int n_iter = 20000;
  int burn_in = 10000;
  int thin = 10;
  std::uint64_t seed = 0;
  int workers = 0;  // max chains run concurrently; 0 = one thread per chain

  // test/diagnostic switches
  bool prior_only = false;          // drop the likelihood term from every update
  Eigen::VectorXd sigma2_fixed;     // size I holds sigma_i^2 fixed; empty = sample

  int retained_per_chain() const { return (n_iter - burn_in) / thin; }
  void validate() const;
};

// Thinned post-burn-in parameter snapshots for all chains.
struct PosteriorDraws {
  std::vector<std::string> names;         // parameter registry, column order
  std::vector<Eigen::MatrixXd> chains;    // each retained x names.size()
  ChainConfig config;
  std::string method;

  int n_params() const { return static_cast<int>(names.size()); }
  int n_chains() const { return static_cast<int>(chains.size()); }
  int retained_per_chain() const { return chains.empty() ? 0 : static_cast<int>(chains[0].rows()); }
  int n_retained_total() const { return n_chains() * retained_per_chain(); }

  // column index of a parameter name; -1 if absent
  int index_of(const std::string& name) const;
  bool has(const std::string& name) const { return index_of(name) >= 0; }

  // all chains stacked, for one parameter / for everything
  Eigen::VectorXd pooled(const std::string& name) const;
  Eigen::VectorXd pooled_column(int idx) const;
  Eigen::MatrixXd pooled_all() const;
};

// counts of per-iteration updates, keyed by parameter-group label
using UpdateAudit = std::map<std::string, long>;

// Metropolis-within-Gibbs engine for the linear IPD-MA model under any
// PriorMethod. One instance per (data, spec); sweep() advances a state.
//
// Update order per sweep:
//   1. (mu, alpha, beta, gamma) joint Gaussian given variances and latents
//   2. per-trial random effects (u_mu_i, u_alpha_i, u_i), joint per trial
//   3. location re-draw of mu / alpha / gamma_k given trial-level sums
//      (exact conditional; decorrelates locations from their random effects)
//   4. sigma_i^2 ~ IG(n_i/2, SSR_i/2)
//   5. tau^2 variance components via the half-Cauchy auxiliary mixture
//   6. prior latents: g_k (conjugate IG or slice on the logit shrinkage),
//      b_k and p_i (slice on bounded support), horseshoe and SSVS latents
class GibbsSampler {
 public:
  GibbsSampler(const IpdDataset& data, const ModelSpec& spec, const ChainConfig& cfg);

  ParameterState initial_state() const;
  void sweep(ParameterState& s, Rng& rng);

  // individual steps, exposed so the update laws can be tested directly
  void update_coefficients(ParameterState& s, Rng& rng);
  void update_random_effects(ParameterState& s, Rng& rng);
  void update_locations_given_sums(ParameterState& s, Rng& rng);
  void update_sigma2(ParameterState& s, Rng& rng);
  void update_variance_components(ParameterState& s, Rng& rng);
  void update_prior_latents(ParameterState& s, Rng& rng);

  const std::vector<std::string>& parameter_names() const { return names_; }
  Eigen::VectorXd flatten(const ParameterState& s) const;
  ParameterState unflatten(const Eigen::VectorXd& v) const;

  const UpdateAudit& audit() const { return audit_; }
  void reset_audit() { audit_.clear(); }
  long iteration() const { return iter_; }

  // current prior precision of each gamma_k given the state's latents
  Eigen::VectorXd gamma_prior_precisions(const ParameterState& s) const;

 private:
  void build_design();
  void register_parameters();
  Eigen::VectorXd linear_predictor(const ParameterState& s) const;
  double slice_sample(double x0, double lo, double hi,
                      const std::function<double(double)>& logf, Rng& rng) const;
  double slice_unbounded_(double z0, const std::function<double(double)>& logf, Rng& rng) const;
  Eigen::VectorXd re_values_(const ParameterState& s, int i) const;
  Eigen::VectorXd fixed_values_(const ParameterState& s) const;
  ParameterState initial_state_skeleton_() const;

  const IpdDataset& data_;
  ModelSpec spec_;
  ChainConfig cfg_;

  int I_ = 0, N_ = 0, p_ = 0, d_ = 0;
  int q_ = 0;                      // active fixed-effect count
  int gamma_offset_ = 0;           // first gamma position among the active fixed effects
  std::vector<int> fix_cols_;      // active fixed-effect columns of the full design
  std::vector<int> re_cols_;       // random-effect columns of the full design
  std::vector<Eigen::MatrixXd> W_; // per-trial fixed-effect design blocks
  std::vector<Eigen::MatrixXd> G_; // per-trial Gram matrices W_i' W_i
  std::vector<Eigen::VectorXd> h_; // per-trial W_i' y_i
  Eigen::MatrixXd S_;              // I x d: per-trial sums of (t x_k)^2
  std::vector<int> n_;             // trial sizes

  std::vector<std::string> names_;
  UpdateAudit audit_;
  long iter_ = 0;

  friend class SamplerProbe;
};

// Runs cfg.n_chains independent chains (concurrently when workers allow) and
// merges the retained draws. Identical (data, spec, cfg) give bit-identical
// results.
PosteriorDraws run_mcmc(const IpdDataset& data, const ModelSpec& spec, const ChainConfig& cfg);

// log likelihood of the outcomes given the state, conditional on the random
// effects: sum of N(y_ij; linear predictor, sigma_i^2) log densities.
double log_likelihood(const ParameterState& s, const IpdDataset& data, const ModelSpec& spec);

// Split-chain potential scale reduction factor. Requires >= 2 chains with
// >= 10 retained draws each; DomainError on constant chains.
double gelman_rubin(const PosteriorDraws& draws, const std::string& param);

// Deviance information criterion: Dbar + pD with D = -2 log likelihood
// conditional on random effects and pD = Dbar - D(posterior means).
double dic(const PosteriorDraws& draws, const IpdDataset& data, const ModelSpec& spec);

// Long-format persistence: "chain,iteration,parameter,value" rows preceded by
// '#' provenance comments (seed, config, method, version).
void write_draws_csv(const std::string& path, const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(const std::string& path);

}  // namespace ipdma

#endif
