#ifndef IPDMA_PRIORS_HPP
#define IPDMA_PRIORS_HPP

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "ipdma/data_model.hpp"
#include "ipdma/priors_method.hpp"
#include "ipdma/rng.hpp"

namespace ipdma {

// Support of the tuning fraction p_i. The log kind is restricted to
// (e/n_i, 1) so that f = log(n_i p_i) >= 1; see README (priors section).
std::pair<double, double> tuning_support(TuningKind kind, int n_i);

// f(n_i | p_i): n_i p_i, log(n_i p_i) or n_i^{p_i}. DomainError outside the
// declared support.
double tuning_f(TuningKind kind, int n_i, double p_i);

// Per-trial f(n_i) values for a method under the current tuning fractions.
// NMG methods (and Flat/HS/SSVS) give f == 1; CUIP gives f == sqrt(N).
Eigen::VectorXd tuning_values(const PriorMethod& method, const std::vector<int>& trial_sizes,
                              const Eigen::VectorXd& p_trial);

// Diagonal of Lambda*: observation j of trial i weighs 1/(sigma_i^2 f(n_i)).
// f_vals == 1 reproduces the uncalibrated Lambda.
Eigen::VectorXd lambda_star(const Eigen::VectorXd& sigma2, const Eigen::VectorXd& f_vals,
                            const std::vector<int>& trial_sizes);

// Scalar prior precision of gamma_k: (1/g_k) sum_obs w (t o x_[k])^2.
// Degenerate (all-zero) moderator columns raise ValidationError.
double gamma_prior_precision(int k, double g_k, const Eigen::VectorXd& weights,
                             const IpdDataset& data);

// log pi(g_k) under the method's hyperprior (conditional on b for S1/S3).
// nullopt marks the degenerate cases (Flat, UIP, CUIP, FixedG) where g is
// fixed or absent.
std::optional<double> log_hyperprior_g(const PriorMethod& method, double g_k,
                                       std::optional<double> b_k, double N);

// One draw of the shrinkage factor g/(1+g) from the method's hyperprior,
// drawing b_k ~ Uniform(0,2) internally where the method requires it.
// DomainError for methods without a proper hyperprior.
double sample_prior_shrinkage(const PriorMethod& method, double N, Rng& rng);

// log prior density of gamma_k for the non-g methods.
// HS: N(0, lambda2 tau_hs2); SSVS: N(0, eta^2) or N(0, h eta^2); Flat: 0.
double log_prior_gamma_nong(const PriorMethod& method, double gamma_k, double lambda2,
                            double tau_hs2, int inclusion, double eta);

// Conditional density helpers shared by the sampler and the density exports.

// log Beta(r,s) pdf at x in (0,1)
double log_beta_pdf(double x, double r, double s);

// log IG(shape, scale) pdf at x > 0
double log_inv_gamma_pdf(double x, double shape, double scale);

// Beta parameters (r, s) of the shrinkage-factor prior for methods whose g
// hyperprior is a Beta law on a shrinkage scale (HG, HGN, CMG-S*).
// For HGN the factor is g/(g+N); for the others g/(1+g).
std::pair<double, double> shrinkage_beta_params(const PriorMethod& method, double b_k);

}  // namespace ipdma

#endif
