#include "ipdma/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "ipdma/cli.hpp"  // kVersion for draw provenance

namespace ipdma {

void ChainConfig::validate() const {
  if (n_chains < 1) throw UsageError("n_chains must be >= 1");
  if (n_iter < 1) throw UsageError("n_iter must be >= 1");
  if (burn_in < 0 || burn_in >= n_iter) throw UsageError("burn_in must lie in [0, n_iter)");
  if (thin < 1) throw UsageError("thin must be >= 1");
  if (retained_per_chain() < 1) throw UsageError("no retained draws under this configuration");
}

int PosteriorDraws::index_of(const std::string& name) const {
  for (int i = 0; i < static_cast<int>(names.size()); ++i)
    if (names[i] == name) return i;
  return -1;
}

Eigen::VectorXd PosteriorDraws::pooled_column(int idx) const {
  if (idx < 0 || idx >= n_params()) throw DomainError("parameter index out of range");
  Eigen::VectorXd out(n_retained_total());
  int at = 0;
  for (const auto& c : chains) {
    out.segment(at, c.rows()) = c.col(idx);
    at += static_cast<int>(c.rows());
  }
  return out;
}

Eigen::VectorXd PosteriorDraws::pooled(const std::string& name) const {
  const int idx = index_of(name);
  if (idx < 0) throw DomainError("unknown parameter '" + name + "'");
  return pooled_column(idx);
}

Eigen::MatrixXd PosteriorDraws::pooled_all() const {
  Eigen::MatrixXd out(n_retained_total(), n_params());
  int at = 0;
  for (const auto& c : chains) {
    out.middleRows(at, c.rows()) = c;
    at += static_cast<int>(c.rows());
  }
  return out;
}

namespace {

// log(1 + e^x) without overflow
double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

constexpr double kTinySq = 1e-300;  // keeps conditionals integrable when gamma == 0

std::vector<int> effective_moderators(const IpdDataset& data, const ModelSpec& spec) {
  std::vector<int> mods = spec.moderator_indices.empty() ? data.moderator_indices
                                                         : spec.moderator_indices;
  std::sort(mods.begin(), mods.end());
  if (std::adjacent_find(mods.begin(), mods.end()) != mods.end())
    throw ValidationError("duplicate moderator indices in model spec");
  for (int k : mods)
    if (k < 0 || k >= data.p) throw ValidationError("moderator index out of range");
  return mods;
}

}  // namespace

GibbsSampler::GibbsSampler(const IpdDataset& data, const ModelSpec& spec, const ChainConfig& cfg)
    : data_(data), spec_(spec), cfg_(cfg) {
  cfg_.validate();
  data_.validate();
  spec_.moderator_indices = effective_moderators(data, spec);
  I_ = data_.n_trials();
  N_ = data_.n_total();
  p_ = data_.p;
  d_ = static_cast<int>(spec_.moderator_indices.size());
  n_ = data_.trial_sizes();
  if (cfg_.sigma2_fixed.size() != 0 && cfg_.sigma2_fixed.size() != I_)
    throw UsageError("sigma2_fixed must have one entry per trial");
  if (spec_.prior.tag == PriorTag::HG || spec_.prior.tag == PriorTag::HGN) {
    if (spec_.prior.a <= 2.0) throw DomainError("hyper-g methods require a > 2");
  }
  build_design();
  register_parameters();
}

void GibbsSampler::build_design() {
  // full per-trial design: [1, t, X, t o x_[k] ...]
  const int full = 2 + p_ + d_;
  W_.resize(I_);
  G_.resize(I_);
  h_.resize(I_);
  S_.resize(I_, d_);
  for (int i = 0; i < I_; ++i) {
    const TrialBlock& tr = data_.trials[i];
    Eigen::MatrixXd F(tr.n(), full);
    F.col(0).setOnes();
    F.col(1) = tr.t;
    F.middleCols(2, p_) = tr.X;
    for (int k = 0; k < d_; ++k)
      F.col(2 + p_ + k) = tr.t.cwiseProduct(tr.X.col(spec_.moderator_indices[k]));
    W_[i] = std::move(F);
    G_[i] = W_[i].transpose() * W_[i];
    h_[i] = W_[i].transpose() * tr.y;
    for (int k = 0; k < d_; ++k) S_(i, k) = G_[i](2 + p_ + k, 2 + p_ + k);
  }
  if (spec_.prior.is_g_method()) {
    for (int k = 0; k < d_; ++k)
      if (S_.col(k).sum() <= 0.0)
        throw ValidationError("moderator column " + std::to_string(spec_.moderator_indices[k]) +
                              " is identically zero under treatment");
  }

  // active fixed-effect columns of the full design
  std::vector<int> fix;
  if (spec_.intercept) fix.push_back(0);
  if (spec_.treatment_effect) fix.push_back(1);
  if (spec_.baseline_effects)
    for (int j = 0; j < p_; ++j) fix.push_back(2 + j);
  gamma_offset_ = static_cast<int>(fix.size());
  for (int k = 0; k < d_; ++k) fix.push_back(2 + p_ + k);
  fix_cols_ = std::move(fix);
  q_ = static_cast<int>(fix_cols_.size());

  re_cols_.clear();
  if (spec_.trial_random_effects) {
    re_cols_.push_back(0);
    re_cols_.push_back(1);
  }
  if (spec_.moderator_random_effects)
    for (int k = 0; k < d_; ++k) re_cols_.push_back(2 + p_ + k);
}

void GibbsSampler::register_parameters() {
  names_.clear();
  auto idx1 = [](const char* base, int j) {
    return std::string(base) + "[" + std::to_string(j + 1) + "]";
  };
  if (spec_.intercept) names_.push_back("mu");
  if (spec_.treatment_effect) names_.push_back("alpha");
  if (spec_.baseline_effects)
    for (int j = 0; j < p_; ++j) names_.push_back(idx1("beta", j));
  for (int k = 0; k < d_; ++k) names_.push_back(idx1("gamma", k));
  for (int i = 0; i < I_; ++i) names_.push_back(idx1("sigma2", i));
  if (spec_.trial_random_effects) {
    names_.push_back("tau_mu2");
    names_.push_back("tau_alpha2");
    for (int i = 0; i < I_; ++i) names_.push_back(idx1("u_mu", i));
    for (int i = 0; i < I_; ++i) names_.push_back(idx1("u_alpha", i));
  }
  if (spec_.moderator_random_effects && d_ > 0) {
    for (int k = 0; k < d_; ++k) names_.push_back(idx1("tau_k2", k));
    for (int i = 0; i < I_; ++i)
      for (int k = 0; k < d_; ++k)
        names_.push_back("u[" + std::to_string(i + 1) + "," + std::to_string(k + 1) + "]");
  }
  const PriorMethod& m = spec_.prior;
  if (m.is_g_method())
    for (int k = 0; k < d_; ++k) names_.push_back(idx1("g", k));
  if (m.samples_b())
    for (int k = 0; k < d_; ++k) names_.push_back(idx1("b", k));
  if (m.samples_p())
    for (int i = 0; i < I_; ++i) names_.push_back(idx1("p", i));
  if (m.tag == PriorTag::HS) {
    for (int k = 0; k < d_; ++k) names_.push_back(idx1("lambda2", k));
    names_.push_back("tau_hs2");
  }
  if (m.tag == PriorTag::SSVS) {
    for (int k = 0; k < d_; ++k) names_.push_back(idx1("I", k));
    names_.push_back("eta");
  }
}

ParameterState GibbsSampler::initial_state() const {
  ParameterState s;
  s.beta = Eigen::VectorXd::Zero(p_);
  s.gamma = Eigen::VectorXd::Zero(d_);
  s.sigma2 = Eigen::VectorXd::Ones(I_);
  s.u_mu = Eigen::VectorXd::Zero(I_);
  s.u_alpha = Eigen::VectorXd::Zero(I_);
  if (spec_.moderator_random_effects && d_ > 0) {
    s.u = Eigen::MatrixXd::Zero(I_, d_);
    s.tau_k2 = Eigen::VectorXd::Ones(d_);
    s.aux_tau_k = Eigen::VectorXd::Ones(d_);
  }

  const PriorMethod& m = spec_.prior;
  if (m.is_g_method()) {
    double g0 = 1.0;
    if (m.tag == PriorTag::UIP) g0 = static_cast<double>(N_);
    if (m.tag == PriorTag::FixedG) g0 = m.fixed_g;
    s.g = Eigen::VectorXd::Constant(d_, g0);
  }
  if (m.samples_b()) s.b = Eigen::VectorXd::Ones(d_);
  if (m.samples_p()) {
    s.p_trial.resize(I_);
    for (int i = 0; i < I_; ++i) {
      const auto [lo, hi] = tuning_support(m.tuning_kind(), n_[i]);
      s.p_trial[i] = (lo < 0.5 && 0.5 < hi) ? 0.5 : 0.5 * (lo + hi);
    }
  }
  if (m.tag == PriorTag::HS) {
    s.lambda2 = Eigen::VectorXd::Ones(d_);
    s.aux_lambda = Eigen::VectorXd::Ones(d_);
  }
  if (m.tag == PriorTag::SSVS) {
    s.inclusion = Eigen::VectorXi::Ones(d_);
    s.eta = std::min(1.0, 0.5 * m.ssvs_c);
  }

  if (cfg_.sigma2_fixed.size() == I_) s.sigma2 = cfg_.sigma2_fixed;
  if (cfg_.prior_only) return s;

  // ridge-stabilized least squares start for the coefficients
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q_, q_);
  Eigen::VectorXd bvec = Eigen::VectorXd::Zero(q_);
  for (int i = 0; i < I_; ++i) {
    for (int r = 0; r < q_; ++r) {
      bvec[r] += h_[i][fix_cols_[r]];
      for (int c = 0; c < q_; ++c) A(r, c) += G_[i](fix_cols_[r], fix_cols_[c]);
    }
  }
  A.diagonal().array() += 1e-8 * (A.trace() / q_ + 1.0);
  Eigen::VectorXd theta = A.ldlt().solve(bvec);
  int at = 0;
  if (spec_.intercept) s.mu = theta[at++];
  if (spec_.treatment_effect) s.alpha = theta[at++];
  if (spec_.baseline_effects)
    for (int j = 0; j < p_; ++j) s.beta[j] = theta[at++];
  for (int k = 0; k < d_; ++k) s.gamma[k] = theta[at++];

  if (cfg_.sigma2_fixed.size() != I_) {
    const Eigen::VectorXd lp = linear_predictor(s);
    int row = 0;
    for (int i = 0; i < I_; ++i) {
      const double ssr = (data_.trials[i].y - lp.segment(row, n_[i])).squaredNorm();
      s.sigma2[i] = std::max(ssr / n_[i], 1e-4);
      row += n_[i];
    }
  }
  return s;
}

Eigen::VectorXd GibbsSampler::linear_predictor(const ParameterState& s) const {
  Eigen::VectorXd lp(N_);
  int row = 0;
  for (int i = 0; i < I_; ++i) {
    Eigen::VectorXd li = Eigen::VectorXd::Zero(n_[i]);
    if (spec_.intercept) li.array() += s.mu;
    if (spec_.treatment_effect) li += s.alpha * data_.trials[i].t;
    if (spec_.baseline_effects) li += W_[i].middleCols(2, p_) * s.beta;
    if (d_ > 0) li += W_[i].middleCols(2 + p_, d_) * s.gamma;
    if (spec_.trial_random_effects) {
      li.array() += s.u_mu[i];
      li += s.u_alpha[i] * data_.trials[i].t;
    }
    if (spec_.moderator_random_effects && d_ > 0)
      li += W_[i].middleCols(2 + p_, d_) * s.u.row(i).transpose();
    lp.segment(row, n_[i]) = li;
    row += n_[i];
  }
  return lp;
}

Eigen::VectorXd GibbsSampler::gamma_prior_precisions(const ParameterState& s) const {
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(d_);
  const PriorMethod& m = spec_.prior;
  switch (m.tag) {
    case PriorTag::Flat: break;
    case PriorTag::HS:
      for (int k = 0; k < d_; ++k) rho[k] = 1.0 / (s.lambda2[k] * s.tau_hs2);
      break;
    case PriorTag::SSVS: {
      const double e2 = s.eta * s.eta;
      for (int k = 0; k < d_; ++k)
        rho[k] = 1.0 / ((s.inclusion[k] ? m.ssvs_h : 1.0) * e2);
      break;
    }
    default: {
      const Eigen::VectorXd f = tuning_values(m, n_, s.p_trial);
      for (int k = 0; k < d_; ++k) {
        double c = 0.0;
        for (int i = 0; i < I_; ++i) c += S_(i, k) / (s.sigma2[i] * f[i]);
        rho[k] = c / s.g[k];
      }
      break;
    }
  }
  return rho;
}

void GibbsSampler::update_coefficients(ParameterState& s, Rng& rng) {
  const Eigen::VectorXd rho = d_ > 0 ? gamma_prior_precisions(s) : Eigen::VectorXd();
  audit_["coefficients"] += 1;

  if (cfg_.prior_only) {
    // likelihood disabled: gamma_k from its conditional prior, flat terms held
    for (int k = 0; k < d_; ++k)
      if (rho[k] > 0.0) s.gamma[k] = rng.normal(0.0, 1.0 / std::sqrt(rho[k]));
    return;
  }
  if (q_ == 0) return;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q_, q_);
  Eigen::VectorXd bvec = Eigen::VectorXd::Zero(q_);
  const int n_re = static_cast<int>(re_cols_.size());
  for (int i = 0; i < I_; ++i) {
    const double w = 1.0 / s.sigma2[i];
    Eigen::VectorXd hi(q_);
    for (int r = 0; r < q_; ++r) hi[r] = h_[i][fix_cols_[r]];
    if (n_re > 0) {
      const Eigen::VectorXd z = re_values_(s, i);
      for (int r = 0; r < q_; ++r)
        for (int c = 0; c < n_re; ++c) hi[r] -= G_[i](fix_cols_[r], re_cols_[c]) * z[c];
    }
    bvec += w * hi;
    for (int r = 0; r < q_; ++r)
      for (int c = 0; c < q_; ++c) A(r, c) += w * G_[i](fix_cols_[r], fix_cols_[c]);
  }
  for (int k = 0; k < d_; ++k) A(gamma_offset_ + k, gamma_offset_ + k) += rho[k];

  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    A.diagonal().array() += 1e-10 * (A.trace() / q_ + 1.0);
    llt.compute(A);
    if (llt.info() != Eigen::Success)
      throw NumericalError("coefficient block factorization failed at iteration " +
                           std::to_string(iter_));
  }
  Eigen::VectorXd mean = llt.solve(bvec);
  Eigen::VectorXd zdraw(q_);
  for (int r = 0; r < q_; ++r) zdraw[r] = rng.normal();
  Eigen::VectorXd theta = mean + llt.matrixU().solve(zdraw);

  int at = 0;
  if (spec_.intercept) s.mu = theta[at++];
  if (spec_.treatment_effect) s.alpha = theta[at++];
  if (spec_.baseline_effects)
    for (int j = 0; j < p_; ++j) s.beta[j] = theta[at++];
  for (int k = 0; k < d_; ++k) s.gamma[k] = theta[at++];
}

void GibbsSampler::update_random_effects(ParameterState& s, Rng& rng) {
  const int n_re = static_cast<int>(re_cols_.size());
  if (n_re == 0) return;
  audit_["random_effects"] += 1;

  // prior precision diagonal in re_cols_ order
  Eigen::VectorXd prior_prec(n_re);
  int at = 0;
  if (spec_.trial_random_effects) {
    prior_prec[at++] = 1.0 / s.tau_mu2;
    prior_prec[at++] = 1.0 / s.tau_alpha2;
  }
  if (spec_.moderator_random_effects)
    for (int k = 0; k < d_; ++k) prior_prec[at++] = 1.0 / s.tau_k2[k];

  Eigen::VectorXd theta;  // active fixed effects, needed for the residual projection
  if (!cfg_.prior_only) theta = fixed_values_(s);

  for (int i = 0; i < I_; ++i) {
    Eigen::MatrixXd P = prior_prec.asDiagonal();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_re);
    if (!cfg_.prior_only) {
      const double w = 1.0 / s.sigma2[i];
      for (int r = 0; r < n_re; ++r) {
        double v = h_[i][re_cols_[r]];
        for (int c = 0; c < q_; ++c) v -= G_[i](re_cols_[r], fix_cols_[c]) * theta[c];
        rhs[r] = w * v;
        for (int c = 0; c < n_re; ++c) P(r, c) += w * G_[i](re_cols_[r], re_cols_[c]);
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success)
      throw NumericalError("random-effect block factorization failed at iteration " +
                           std::to_string(iter_));
    Eigen::VectorXd zdraw(n_re);
    for (int r = 0; r < n_re; ++r) zdraw[r] = rng.normal();
    const Eigen::VectorXd z = llt.solve(rhs) + llt.matrixU().solve(zdraw);
    at = 0;
    if (spec_.trial_random_effects) {
      s.u_mu[i] = z[at++];
      s.u_alpha[i] = z[at++];
    }
    if (spec_.moderator_random_effects)
      for (int k = 0; k < d_; ++k) s.u(i, k) = z[at++];
  }
}

void GibbsSampler::update_locations_given_sums(ParameterState& s, Rng& rng) {
  if (cfg_.prior_only) return;
  audit_["locations"] += 1;

  // Re-draw a location from its conditional given the trial-level sums
  // location + u_i; the sums (and the likelihood) stay untouched, only the
  // split between the location and its random effects moves.
  if (spec_.trial_random_effects) {
    if (spec_.intercept) {
      const Eigen::VectorXd v = s.u_mu.array() + s.mu;
      const double mu_new = rng.normal(v.mean(), std::sqrt(s.tau_mu2 / I_));
      s.mu = mu_new;
      s.u_mu = v.array() - mu_new;
    }
    if (spec_.treatment_effect) {
      const Eigen::VectorXd v = s.u_alpha.array() + s.alpha;
      const double a_new = rng.normal(v.mean(), std::sqrt(s.tau_alpha2 / I_));
      s.alpha = a_new;
      s.u_alpha = v.array() - a_new;
    }
  }
  if (spec_.moderator_random_effects && d_ > 0) {
    const Eigen::VectorXd rho = gamma_prior_precisions(s);
    for (int k = 0; k < d_; ++k) {
      const Eigen::VectorXd v = s.u.col(k).array() + s.gamma[k];
      const double prec = I_ / s.tau_k2[k] + rho[k];
      const double mean = (v.sum() / s.tau_k2[k]) / prec;
      const double g_new = rng.normal(mean, std::sqrt(1.0 / prec));
      s.gamma[k] = g_new;
      s.u.col(k) = v.array() - g_new;
    }
  }
}

void GibbsSampler::update_sigma2(ParameterState& s, Rng& rng) {
  if (cfg_.prior_only || cfg_.sigma2_fixed.size() == I_) return;
  audit_["sigma2"] += 1;
  const Eigen::VectorXd lp = linear_predictor(s);
  int row = 0;
  for (int i = 0; i < I_; ++i) {
    const double ssr = (data_.trials[i].y - lp.segment(row, n_[i])).squaredNorm();
    if (!std::isfinite(ssr))
      throw NumericalError("non-finite residual sum of squares at iteration " +
                           std::to_string(iter_));
    // full conditional under pi(sigma_i^2) ~ 1/sigma_i^2
    s.sigma2[i] = rng.inv_gamma(0.5 * n_[i], 0.5 * std::max(ssr, 1e-300));
    row += n_[i];
  }
}

void GibbsSampler::update_variance_components(ParameterState& s, Rng& rng) {
  // half-Cauchy C+(0,1) via tau^2 | aux ~ IG(1/2, 1/aux), aux ~ IG(1/2, 1)
  if (spec_.trial_random_effects) {
    audit_["tau2"] += 1;
    s.tau_mu2 = rng.inv_gamma(0.5 * (I_ + 1), 1.0 / s.aux_tau_mu + 0.5 * s.u_mu.squaredNorm());
    s.aux_tau_mu = rng.inv_gamma(1.0, 1.0 + 1.0 / s.tau_mu2);
    s.tau_alpha2 =
        rng.inv_gamma(0.5 * (I_ + 1), 1.0 / s.aux_tau_alpha + 0.5 * s.u_alpha.squaredNorm());
    s.aux_tau_alpha = rng.inv_gamma(1.0, 1.0 + 1.0 / s.tau_alpha2);
  }
  if (spec_.moderator_random_effects && d_ > 0) {
    audit_["tau_k2"] += d_;
    for (int k = 0; k < d_; ++k) {
      s.tau_k2[k] =
          rng.inv_gamma(0.5 * (I_ + 1), 1.0 / s.aux_tau_k[k] + 0.5 * s.u.col(k).squaredNorm());
      s.aux_tau_k[k] = rng.inv_gamma(1.0, 1.0 + 1.0 / s.tau_k2[k]);
    }
  }
}

double GibbsSampler::slice_sample(double x0, double lo, double hi,
                                  const std::function<double(double)>& logf, Rng& rng) const {
  const double ly = logf(x0) + std::log(rng.uniform());
  double L = lo, R = hi;
  for (int it = 0; it < 2000; ++it) {
    const double x = rng.uniform(L, R);
    if (logf(x) >= ly) return x;
    if (x < x0) L = x;
    else R = x;
  }
  throw NumericalError("slice sampler failed to accept at iteration " + std::to_string(iter_));
}

void GibbsSampler::update_prior_latents(ParameterState& s, Rng& rng) {
  const PriorMethod& m = spec_.prior;
  switch (m.tag) {
    case PriorTag::Flat:
    case PriorTag::UIP:
    case PriorTag::CUIP:
    case PriorTag::FixedG: return;  // nothing latent to sample
    case PriorTag::HS: {
      audit_["hs"] += 1;
      for (int k = 0; k < d_; ++k) {
        const double g2 = s.gamma[k] * s.gamma[k];
        s.lambda2[k] = rng.inv_gamma(1.0, 1.0 / s.aux_lambda[k] + 0.5 * g2 / s.tau_hs2);
        s.aux_lambda[k] = rng.inv_gamma(1.0, 1.0 + 1.0 / s.lambda2[k]);
      }
      double quad = 0.0;
      for (int k = 0; k < d_; ++k) quad += s.gamma[k] * s.gamma[k] / s.lambda2[k];
      s.tau_hs2 = rng.inv_gamma(0.5 * (d_ + 1), 1.0 / s.aux_tau_hs + 0.5 * quad);
      s.aux_tau_hs = rng.inv_gamma(1.0, 1.0 + 1.0 / s.tau_hs2);
      return;
    }
    case PriorTag::SSVS: {
      audit_["ssvs"] += 1;
      const double e2 = s.eta * s.eta;
      for (int k = 0; k < d_; ++k) {
        const double g2 = s.gamma[k] * s.gamma[k];
        // Ber(1/2) prior: odds = N(gamma; 0, h eta^2) / N(gamma; 0, eta^2)
        const double log_odds =
            -0.5 * std::log(m.ssvs_h) - 0.5 * g2 / (m.ssvs_h * e2) + 0.5 * g2 / e2;
        const double p1 = 1.0 / (1.0 + std::exp(-log_odds));
        s.inclusion[k] = rng.bernoulli(p1) ? 1 : 0;
      }
      double quad = 0.0;
      for (int k = 0; k < d_; ++k)
        quad += s.gamma[k] * s.gamma[k] / (s.inclusion[k] ? m.ssvs_h : 1.0);
      quad = std::max(quad, kTinySq);
      const int dd = d_;
      auto log_eta = [quad, dd](double e) {
        return -dd * std::log(e) - 0.5 * quad / (e * e);
      };
      s.eta = slice_sample(s.eta, 1e-12, m.ssvs_c, log_eta, rng);
      return;
    }
    default: break;
  }

  // mixtures-of-g families with sampled latents
  const Eigen::VectorXd f = tuning_values(m, n_, s.p_trial);
  Eigen::VectorXd c(d_);
  for (int k = 0; k < d_; ++k) {
    double ck = 0.0;
    for (int i = 0; i < I_; ++i) ck += S_(i, k) / (s.sigma2[i] * f[i]);
    c[k] = ck;
  }

  if (m.tag == PriorTag::ZS || m.tag == PriorTag::CZS) {
    audit_["g"] += d_;
    const double b0 = m.tag == PriorTag::ZS ? 0.5 * N_ : 0.5;
    for (int k = 0; k < d_; ++k)
      s.g[k] = rng.inv_gamma(1.0, b0 + 0.5 * c[k] * s.gamma[k] * s.gamma[k]);
  } else {
    // HG / HGN / CMG: slice on the logit of the shrinkage factor
    audit_["g"] += d_;
    const double scale = m.tag == PriorTag::HGN ? static_cast<double>(N_) : 1.0;
    for (int k = 0; k < d_; ++k) {
      const auto [r, sb] =
          shrinkage_beta_params(m, m.samples_b() ? s.b[k] : 1.0);
      const double cg2 = std::max(c[k] * s.gamma[k] * s.gamma[k], kTinySq) / scale;
      auto target = [r, sb, cg2](double z) {
        return -r * softplus(-z) - sb * softplus(z) - 0.5 * z - 0.5 * cg2 * std::exp(-z);
      };
      const double z0 = std::log(s.g[k] / scale);
      const double z1 = slice_unbounded_(z0, target, rng);
      s.g[k] = scale * std::exp(z1);
    }
  }

  if (m.samples_b()) {
    audit_["b"] += d_;
    const bool s1 = m.shrink == ShrinkLevel::S1;
    for (int k = 0; k < d_; ++k) {
      const double u = s.g[k] / (1.0 + s.g[k]);
      const double log_u = std::log(u), log_1mu = std::log1p(-u);
      auto target = [s1, log_u, log_1mu](double b) {
        const double lbeta = std::lgamma(2.0) + std::lgamma(b) - std::lgamma(2.0 + b);
        return (b - 1.0) * (s1 ? log_1mu : log_u) - lbeta;
      };
      s.b[k] = slice_sample(s.b[k], 1e-10, 2.0, target, rng);
    }
  }

  if (m.samples_p()) {
    audit_["p"] += I_;
    const TuningKind kind = m.tuning_kind();
    for (int i = 0; i < I_; ++i) {
      // c_k with trial i's contribution removed
      Eigen::VectorXd base(d_);
      for (int k = 0; k < d_; ++k) base[k] = c[k] - S_(i, k) / (s.sigma2[i] * f[i]);
      const auto [lo, hi] = tuning_support(kind, n_[i]);
      const int ni = n_[i];
      const double si2 = s.sigma2[i];
      auto target = [&](double p) {
        const double fi = tuning_f(kind, ni, p);
        double acc = 0.0;
        for (int k = 0; k < d_; ++k) {
          const double ck = base[k] + S_(i, k) / (si2 * fi);
          acc += 0.5 * std::log(ck) - 0.5 * ck * s.gamma[k] * s.gamma[k] / s.g[k];
        }
        return acc;
      };
      const double eps = 1e-9 * (hi - lo);
      s.p_trial[i] = slice_sample(s.p_trial[i], lo + eps, hi - eps, target, rng);
      // refresh cached quantities for subsequent trials
      const double fi_new = tuning_f(kind, ni, s.p_trial[i]);
      for (int k = 0; k < d_; ++k) c[k] = base[k] + S_(i, k) / (si2 * fi_new);
    }
  }
}

void GibbsSampler::sweep(ParameterState& s, Rng& rng) {
  ++iter_;
  update_coefficients(s, rng);
  update_random_effects(s, rng);
  update_locations_given_sums(s, rng);
  update_sigma2(s, rng);
  update_variance_components(s, rng);
  update_prior_latents(s, rng);
}

Eigen::VectorXd GibbsSampler::flatten(const ParameterState& s) const {
  Eigen::VectorXd v(names_.size());
  int at = 0;
  if (spec_.intercept) v[at++] = s.mu;
  if (spec_.treatment_effect) v[at++] = s.alpha;
  if (spec_.baseline_effects)
    for (int j = 0; j < p_; ++j) v[at++] = s.beta[j];
  for (int k = 0; k < d_; ++k) v[at++] = s.gamma[k];
  for (int i = 0; i < I_; ++i) v[at++] = s.sigma2[i];
  if (spec_.trial_random_effects) {
    v[at++] = s.tau_mu2;
    v[at++] = s.tau_alpha2;
    for (int i = 0; i < I_; ++i) v[at++] = s.u_mu[i];
    for (int i = 0; i < I_; ++i) v[at++] = s.u_alpha[i];
  }
  if (spec_.moderator_random_effects && d_ > 0) {
    for (int k = 0; k < d_; ++k) v[at++] = s.tau_k2[k];
    for (int i = 0; i < I_; ++i)
      for (int k = 0; k < d_; ++k) v[at++] = s.u(i, k);
  }
  const PriorMethod& m = spec_.prior;
  if (m.is_g_method())
    for (int k = 0; k < d_; ++k) v[at++] = s.g[k];
  if (m.samples_b())
    for (int k = 0; k < d_; ++k) v[at++] = s.b[k];
  if (m.samples_p())
    for (int i = 0; i < I_; ++i) v[at++] = s.p_trial[i];
  if (m.tag == PriorTag::HS) {
    for (int k = 0; k < d_; ++k) v[at++] = s.lambda2[k];
    v[at++] = s.tau_hs2;
  }
  if (m.tag == PriorTag::SSVS) {
    for (int k = 0; k < d_; ++k) v[at++] = s.inclusion[k];
    v[at++] = s.eta;
  }
  assert(at == static_cast<int>(names_.size()));
  return v;
}

ParameterState GibbsSampler::unflatten(const Eigen::VectorXd& v) const {
  if (v.size() != static_cast<Eigen::Index>(names_.size()))
    throw DomainError("draw vector length does not match parameter registry");
  ParameterState s = initial_state_skeleton_();
  int at = 0;
  if (spec_.intercept) s.mu = v[at++];
  if (spec_.treatment_effect) s.alpha = v[at++];
  if (spec_.baseline_effects)
    for (int j = 0; j < p_; ++j) s.beta[j] = v[at++];
  for (int k = 0; k < d_; ++k) s.gamma[k] = v[at++];
  for (int i = 0; i < I_; ++i) s.sigma2[i] = v[at++];
  if (spec_.trial_random_effects) {
    s.tau_mu2 = v[at++];
    s.tau_alpha2 = v[at++];
    for (int i = 0; i < I_; ++i) s.u_mu[i] = v[at++];
    for (int i = 0; i < I_; ++i) s.u_alpha[i] = v[at++];
  }
  if (spec_.moderator_random_effects && d_ > 0) {
    for (int k = 0; k < d_; ++k) s.tau_k2[k] = v[at++];
    for (int i = 0; i < I_; ++i)
      for (int k = 0; k < d_; ++k) s.u(i, k) = v[at++];
  }
  const PriorMethod& m = spec_.prior;
  if (m.is_g_method())
    for (int k = 0; k < d_; ++k) s.g[k] = v[at++];
  if (m.samples_b())
    for (int k = 0; k < d_; ++k) s.b[k] = v[at++];
  if (m.samples_p())
    for (int i = 0; i < I_; ++i) s.p_trial[i] = v[at++];
  if (m.tag == PriorTag::HS) {
    for (int k = 0; k < d_; ++k) s.lambda2[k] = v[at++];
    s.tau_hs2 = v[at++];
  }
  if (m.tag == PriorTag::SSVS) {
    for (int k = 0; k < d_; ++k) s.inclusion[k] = static_cast<int>(v[at++]);
    s.eta = v[at++];
  }
  return s;
}

Eigen::VectorXd GibbsSampler::re_values_(const ParameterState& s, int i) const {
  Eigen::VectorXd z(re_cols_.size());
  int at = 0;
  if (spec_.trial_random_effects) {
    z[at++] = s.u_mu[i];
    z[at++] = s.u_alpha[i];
  }
  if (spec_.moderator_random_effects)
    for (int k = 0; k < d_; ++k) z[at++] = s.u(i, k);
  return z;
}

Eigen::VectorXd GibbsSampler::fixed_values_(const ParameterState& s) const {
  Eigen::VectorXd v(q_);
  int at = 0;
  if (spec_.intercept) v[at++] = s.mu;
  if (spec_.treatment_effect) v[at++] = s.alpha;
  if (spec_.baseline_effects)
    for (int j = 0; j < p_; ++j) v[at++] = s.beta[j];
  for (int k = 0; k < d_; ++k) v[at++] = s.gamma[k];
  return v;
}

ParameterState GibbsSampler::initial_state_skeleton_() const {
  ParameterState s;
  s.beta = Eigen::VectorXd::Zero(p_);
  s.gamma = Eigen::VectorXd::Zero(d_);
  s.sigma2 = Eigen::VectorXd::Ones(I_);
  s.u_mu = Eigen::VectorXd::Zero(I_);
  s.u_alpha = Eigen::VectorXd::Zero(I_);
  if (spec_.moderator_random_effects && d_ > 0) {
    s.u = Eigen::MatrixXd::Zero(I_, d_);
    s.tau_k2 = Eigen::VectorXd::Ones(d_);
    s.aux_tau_k = Eigen::VectorXd::Ones(d_);
  }
  const PriorMethod& m = spec_.prior;
  if (m.is_g_method()) s.g = Eigen::VectorXd::Ones(d_);
  if (m.samples_b()) s.b = Eigen::VectorXd::Ones(d_);
  if (m.samples_p()) s.p_trial = Eigen::VectorXd::Constant(I_, 0.5);
  if (m.tag == PriorTag::HS) {
    s.lambda2 = Eigen::VectorXd::Ones(d_);
    s.aux_lambda = Eigen::VectorXd::Ones(d_);
  }
  if (m.tag == PriorTag::SSVS) s.inclusion = Eigen::VectorXi::Ones(d_);
  return s;
}

// Neal's stepping-out slice sampler for targets on the whole real line.
double GibbsSampler::slice_unbounded_(double z0, const std::function<double(double)>& logf,
                                      Rng& rng) const {
  const double w = 2.0;
  const double ly = logf(z0) + std::log(rng.uniform());
  double L = z0 - w * rng.uniform();
  double R = L + w;
  for (int j = 0; j < 60 && logf(L) > ly; ++j) L -= w;
  for (int j = 0; j < 60 && logf(R) > ly; ++j) R += w;
  for (int it = 0; it < 2000; ++it) {
    const double z = rng.uniform(L, R);
    if (logf(z) >= ly) return z;
    if (z < z0) L = z;
    else R = z;
  }
  throw NumericalError("slice sampler failed to accept at iteration " + std::to_string(iter_));
}

PosteriorDraws run_mcmc(const IpdDataset& data, const ModelSpec& spec, const ChainConfig& cfg) {
  cfg.validate();
  if (!cfg.prior_only && data.centering == Centering::None) {
    // accept hand-centered data, reject anything with a clearly nonzero grand mean
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(data.p);
    for (const auto& tr : data.trials) sums += tr.X.colwise().sum().transpose();
    const Eigen::VectorXd means = sums / static_cast<double>(data.n_total());
    for (int j = 0; j < data.p; ++j)
      if (std::abs(means[j]) > 1e-6)
        throw ValidationError("covariate " + std::to_string(j + 1) +
                              " is not centered (grand mean " + std::to_string(means[j]) +
                              "); call center_covariates first");
  }

  const int n_chains = cfg.n_chains;
  const int retained = cfg.retained_per_chain();
  std::vector<Eigen::MatrixXd> chains(n_chains);
  std::vector<std::exception_ptr> failures(n_chains);

  auto run_chain = [&](int chain) {
    try {
      GibbsSampler sampler(data, spec, cfg);
      Rng rng(mix_seed(cfg.seed, 0x1000 + static_cast<std::uint64_t>(chain)));
      ParameterState st = sampler.initial_state();
      Eigen::MatrixXd out(retained, sampler.parameter_names().size());
      int kept = 0;
      for (int m = 1; m <= cfg.n_iter; ++m) {
        sampler.sweep(st, rng);
        if (m > cfg.burn_in && (m - cfg.burn_in) % cfg.thin == 0 && kept < retained)
          out.row(kept++) = sampler.flatten(st).transpose();
      }
      chains[chain] = std::move(out);
    } catch (...) {
      failures[chain] = std::current_exception();
    }
  };

  int workers = cfg.workers > 0 ? std::min(cfg.workers, n_chains) : n_chains;
  if (n_chains == 1 || workers <= 1) {
    for (int c = 0; c < n_chains; ++c) run_chain(c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (int c = next.fetch_add(1); c < n_chains; c = next.fetch_add(1)) run_chain(c);
      });
    for (auto& th : pool) th.join();
  }
  for (int c = 0; c < n_chains; ++c)
    if (failures[c]) std::rethrow_exception(failures[c]);

  PosteriorDraws draws;
  GibbsSampler sampler(data, spec, cfg);
  draws.names = sampler.parameter_names();
  draws.chains = std::move(chains);
  draws.config = cfg;
  draws.method = spec.prior.name();
  return draws;
}

double log_likelihood(const ParameterState& s, const IpdDataset& data, const ModelSpec& spec) {
  constexpr double half_log_2pi = 0.9189385332046727;
  const std::vector<int> mods = effective_moderators(data, spec);
  const int d = static_cast<int>(mods.size());
  double ll = 0.0;
  for (int i = 0; i < data.n_trials(); ++i) {
    const TrialBlock& tr = data.trials[i];
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(tr.n());
    if (spec.intercept) mean.array() += s.mu;
    if (spec.treatment_effect) mean += s.alpha * tr.t;
    if (spec.baseline_effects) mean += tr.X * s.beta;
    for (int k = 0; k < d; ++k) {
      double coef = s.gamma[k];
      if (spec.moderator_random_effects && s.u.size() > 0) coef += s.u(i, k);
      mean += coef * tr.t.cwiseProduct(tr.X.col(mods[k]));
    }
    if (spec.trial_random_effects && s.u_mu.size() > 0) {
      mean.array() += s.u_mu[i];
      mean += s.u_alpha[i] * tr.t;
    }
    const double s2 = s.sigma2[i];
    ll += -0.5 * (tr.y - mean).squaredNorm() / s2 - tr.n() * (half_log_2pi + 0.5 * std::log(s2));
  }
  return ll;
}

double gelman_rubin(const PosteriorDraws& draws, const std::string& param) {
  if (draws.n_chains() < 2) throw DomainError("split R-hat needs at least 2 chains");
  const int m = draws.retained_per_chain();
  if (m < 10) throw DomainError("split R-hat needs at least 10 retained draws per chain");
  const int idx = draws.index_of(param);
  if (idx < 0) throw DomainError("unknown parameter '" + param + "'");
  const int half = m / 2;

  std::vector<Eigen::VectorXd> seqs;
  for (const auto& c : draws.chains) {
    seqs.push_back(c.col(idx).head(half));
    seqs.push_back(c.col(idx).tail(half));
  }
  const int M = static_cast<int>(seqs.size());
  Eigen::VectorXd means(M), vars(M);
  for (int j = 0; j < M; ++j) {
    means[j] = seqs[j].mean();
    vars[j] = (seqs[j].array() - means[j]).square().sum() / (half - 1);
  }
  const double W = vars.mean();
  if (W <= 0.0) throw DomainError("R-hat undefined: constant chains");
  const double grand = means.mean();
  const double B = half * (means.array() - grand).square().sum() / (M - 1);
  const double var_plus = (half - 1.0) / half * W + B / half;
  return std::sqrt(var_plus / W);
}

double dic(const PosteriorDraws& draws, const IpdDataset& data, const ModelSpec& spec) {
  if (draws.n_retained_total() == 0) throw DomainError("dic: no retained draws");
  GibbsSampler sampler(data, spec, draws.config);
  if (sampler.parameter_names() != draws.names)
    throw DomainError("dic: draws do not match the model's parameter registry");

  const Eigen::MatrixXd pooled = draws.pooled_all();
  double dbar = 0.0;
  for (int r = 0; r < pooled.rows(); ++r) {
    const ParameterState st = sampler.unflatten(pooled.row(r).transpose());
    dbar += -2.0 * log_likelihood(st, data, spec);
  }
  dbar /= pooled.rows();

  const Eigen::VectorXd mean = pooled.colwise().mean().transpose();
  const ParameterState at_mean = sampler.unflatten(mean);
  const double d_hat = -2.0 * log_likelihood(at_mean, data, spec);
  if (!std::isfinite(dbar) || !std::isfinite(d_hat))
    throw NumericalError("dic: non-finite deviance");
  const double p_d = dbar - d_hat;
  return dbar + p_d;
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# ipdma draws v" << kVersion << "\n";
  out << "# method: " << draws.method << "\n";
  out << "# seed: " << draws.config.seed << "\n";
  out << "# chains: " << draws.config.n_chains << " iterations: " << draws.config.n_iter
      << " burn_in: " << draws.config.burn_in << " thin: " << draws.config.thin << "\n";
  out << "chain,iteration,parameter,value\n";
  char buf[40];
  for (int c = 0; c < draws.n_chains(); ++c) {
    const auto& mat = draws.chains[c];
    for (int r = 0; r < mat.rows(); ++r) {
      const long iter = draws.config.burn_in + static_cast<long>(r + 1) * draws.config.thin;
      for (int j = 0; j < mat.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", mat(r, j));
        out << (c + 1) << ',' << iter << ',' << draws.names[j] << ',' << buf << '\n';
      }
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

PosteriorDraws read_draws_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  PosteriorDraws draws;
  std::string line;
  std::vector<std::string> names;
  // (chain, iteration) cells in file order
  std::vector<std::vector<double>> rows;
  std::vector<int> row_chain;
  long last_chain = -1, last_iter = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto parse_tag = [&](const std::string& tag) -> std::string {
        const auto at = line.find(tag);
        if (at == std::string::npos) return "";
        return line.substr(at + tag.size());
      };
      if (auto v = parse_tag("# method: "); !v.empty()) draws.method = v;
      if (auto v = parse_tag("# seed: "); !v.empty()) draws.config.seed = std::stoull(v);
      if (line.rfind("# chains: ", 0) == 0) {
        std::istringstream is(line.substr(2));
        std::string key;
        is >> key >> draws.config.n_chains >> key >> draws.config.n_iter >> key >>
            draws.config.burn_in >> key >> draws.config.thin;
      }
      continue;
    }
    if (line.rfind("chain,", 0) == 0) continue;  // header
    // parameter names may contain a comma ("u[2,3]"); value is the last field
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.rfind(',');
    if (c1 == std::string::npos || c2 == std::string::npos || c3 <= c2)
      throw DataError(path + ": malformed draw row '" + line + "'");
    const std::string chain_s = line.substr(0, c1);
    const std::string iter_s = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string name = line.substr(c2 + 1, c3 - c2 - 1);
    const std::string value_s = line.substr(c3 + 1);
    const long chain = std::stol(chain_s), iter = std::stol(iter_s);
    if (chain != last_chain || iter != last_iter) {
      rows.emplace_back();
      row_chain.push_back(static_cast<int>(chain));
      last_chain = chain;
      last_iter = iter;
    }
    if (rows.size() == 1) names.push_back(name);
    rows.back().push_back(std::stod(value_s));
  }
  if (rows.empty()) throw DataError(path + ": no draws");
  draws.names = names;
  const int n_chains = *std::max_element(row_chain.begin(), row_chain.end());
  std::vector<std::vector<const std::vector<double>*>> per_chain(n_chains);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != names.size()) throw DataError(path + ": ragged draw rows");
    per_chain[row_chain[r] - 1].push_back(&rows[r]);
  }
  for (const auto& ch : per_chain) {
    Eigen::MatrixXd mat(ch.size(), names.size());
    for (size_t r = 0; r < ch.size(); ++r)
      for (size_t j = 0; j < names.size(); ++j) mat(r, j) = (*ch[r])[j];
    draws.chains.push_back(std::move(mat));
  }
  return draws;
}

}  // namespace ipdma
