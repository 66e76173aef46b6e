#ifndef IPDMA_POSTERIOR_HPP
#define IPDMA_POSTERIOR_HPP

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "ipdma/priors.hpp"
#include "ipdma/sampler.hpp"

namespace ipdma {

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;   // 2.5% quantile
  double ci_high = 0.0;  // 97.5% quantile
};

// Pooled-chain summaries plus the scaled-neighborhood probabilities of the
// moderation effects. dic is filled by the caller (needs data and spec).
struct PosteriorSummary {
  std::string method;
  std::vector<ParamSummary> params;
  std::vector<std::string> gamma_names;  // "gamma[k]" entries present in the draws
  std::vector<double> p_gamma;           // one per moderator
  double dic = std::numeric_limits<double>::quiet_NaN();

  const ParamSummary& at(const std::string& name) const;
  bool has(const std::string& name) const;
};

// empirical quantile with linear interpolation (type 7)
double quantile(Eigen::VectorXd draws, double prob);

// Pooled mean, sample SD (divisor m-1) and equal-tailed 95% CI per parameter;
// requires >= 100 pooled draws.
PosteriorSummary summarize(const PosteriorDraws& draws);

// P(|gamma_k| < posterior SD of gamma_k), the scaled neighborhood probability.
// Needs >= 2 draws with nonzero variance.
double scaled_neighborhood_prob(const Eigen::VectorXd& gamma_draws);

struct ModeratorFlags {
  std::vector<int> scaled_neighborhood;  // p_gamma_k < threshold (strict)
  std::vector<int> ci_excludes_zero;     // 95% CI does not contain 0
};

// Indices (0-based positions in p_gamma) of moderators flagged as important.
ModeratorFlags flag_moderators(const PosteriorSummary& summary, double threshold = 0.5);

struct DensityTable {
  Eigen::VectorXd x;
  Eigen::VectorXd density;
};

// Gaussian-kernel density estimate on an equispaced grid, Silverman bandwidth.
// Needs >= 100 draws.
DensityTable density_export(const Eigen::VectorXd& draws, double lo, double hi, int points);

// KDE over an automatic +-6 SD grid around the draws.
DensityTable density_export(const Eigen::VectorXd& draws, int points = 512);

// Exact prior density of g_k on a grid (S1/S3 marginalized over b ~ U(0,2)).
// DomainError for methods without a proper g hyperprior.
DensityTable prior_g_density(const PriorMethod& method, double N, double lo, double hi,
                             int points);

// Exact prior density of the shrinkage factor g/(1+g) on (0,1).
DensityTable prior_shrinkage_density(const PriorMethod& method, double N, int points);

// Conditional shrinkage-factor density at a fixed b (S1/S3 only elsewhere
// identical to the marginal curve).
DensityTable prior_shrinkage_density_given_b(const PriorMethod& method, double b, double N,
                                             int points);

// Growth of f(n | p) over n at a fixed tuning fraction.
DensityTable tuning_growth_curve(TuningKind kind, double p, int n_lo, int n_hi);

}  // namespace ipdma

#endif
