#include "ipdma/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#ifndef M_PI
#define M_PI 3.14159265358979323846
#endif

namespace ipdma {

const ParamSummary& PosteriorSummary::at(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw DomainError("no summary for parameter '" + name + "'");
}

bool PosteriorSummary::has(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return true;
  return false;
}

double quantile(Eigen::VectorXd draws, double prob) {
  const int m = static_cast<int>(draws.size());
  if (m == 0) throw DomainError("quantile of empty sample");
  if (prob < 0.0 || prob > 1.0) throw DomainError("quantile probability outside [0,1]");
  std::sort(draws.data(), draws.data() + m);
  const double h = (m - 1) * prob;
  const int lo = static_cast<int>(std::floor(h));
  const int hi = std::min(lo + 1, m - 1);
  return draws[lo] + (h - lo) * (draws[hi] - draws[lo]);
}

PosteriorSummary summarize(const PosteriorDraws& draws) {
  const int m = draws.n_retained_total();
  if (m < 2) throw DomainError("summarize needs draws");
  PosteriorSummary out;
  out.method = draws.method;
  for (int j = 0; j < draws.n_params(); ++j) {
    const Eigen::VectorXd col = draws.pooled_column(j);
    ParamSummary ps;
    ps.name = draws.names[j];
    ps.mean = col.mean();
    ps.sd = std::sqrt((col.array() - ps.mean).square().sum() / (m - 1));
    ps.ci_low = quantile(col, 0.025);
    ps.ci_high = quantile(col, 0.975);
    out.params.push_back(ps);
  }
  for (int j = 0; j < draws.n_params(); ++j) {
    if (draws.names[j].rfind("gamma[", 0) == 0) {
      out.gamma_names.push_back(draws.names[j]);
      out.p_gamma.push_back(scaled_neighborhood_prob(draws.pooled_column(j)));
    }
  }
  return out;
}

double scaled_neighborhood_prob(const Eigen::VectorXd& gamma_draws) {
  const int m = static_cast<int>(gamma_draws.size());
  if (m < 2) throw DomainError("scaled neighborhood probability needs >= 2 draws");
  const double mean = gamma_draws.mean();
  const double sd = std::sqrt((gamma_draws.array() - mean).square().sum() / (m - 1));
  if (sd <= 0.0) throw DomainError("scaled neighborhood probability undefined for degenerate draws");
  int inside = 0;
  for (int i = 0; i < m; ++i)
    if (std::abs(gamma_draws[i]) < sd) ++inside;
  return static_cast<double>(inside) / m;
}

ModeratorFlags flag_moderators(const PosteriorSummary& summary, double threshold) {
  ModeratorFlags flags;
  for (int k = 0; k < static_cast<int>(summary.p_gamma.size()); ++k) {
    if (summary.p_gamma[k] < threshold) flags.scaled_neighborhood.push_back(k);
    if (k < static_cast<int>(summary.gamma_names.size()) && summary.has(summary.gamma_names[k])) {
      const auto& ps = summary.at(summary.gamma_names[k]);
      if (ps.ci_low > 0.0 || ps.ci_high < 0.0) flags.ci_excludes_zero.push_back(k);
    }
  }
  return flags;
}

DensityTable density_export(const Eigen::VectorXd& draws, double lo, double hi, int points) {
  const int m = static_cast<int>(draws.size());
  if (m < 2) throw DomainError("density export needs draws");
  if (points < 2 || hi <= lo) throw DomainError("bad density grid");
  const double mean = draws.mean();
  const double sd = std::sqrt((draws.array() - mean).square().sum() / (m - 1));
  const double q25 = quantile(draws, 0.25), q75 = quantile(draws, 0.75);
  const double iqr = q75 - q25;
  // Silverman's rule of thumb
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  double h = 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
  if (h <= 0.0) h = 1e-8 + 1e-3 * (hi - lo);

  DensityTable table;
  table.x.resize(points);
  table.density.resize(points);
  const double inv = 1.0 / (m * h * std::sqrt(2.0 * M_PI));
  for (int j = 0; j < points; ++j) {
    const double x = lo + (hi - lo) * j / (points - 1);
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      const double z = (x - draws[i]) / h;
      acc += std::exp(-0.5 * z * z);
    }
    table.x[j] = x;
    table.density[j] = acc * inv;
  }
  return table;
}

DensityTable density_export(const Eigen::VectorXd& draws, int points) {
  const double mean = draws.mean();
  const double sd =
      std::sqrt((draws.array() - mean).square().sum() / (std::max<int>(draws.size(), 2) - 1));
  const double half = 6.0 * (sd > 0 ? sd : 1.0);
  return density_export(draws, mean - half, mean + half, points);
}

namespace {

// composite Simpson over [a, b]
double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2 != 0) ++intervals;
  const double h = (b - a) / intervals;
  double acc = f(a) + f(b);
  for (int j = 1; j < intervals; ++j) acc += f(a + j * h) * (j % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// density of g under the method, marginalized over b ~ U(0,2) for S1/S3
double g_density(const PriorMethod& m, double g, double N) {
  if (m.samples_b()) {
    auto cond = [&](double b) {
      return std::exp(*log_hyperprior_g(m, g, b, N));
    };
    // integrand is smooth in b; the b -> 0 edge is integrable
    return 0.5 * simpson(cond, 1e-8, 2.0, 400);
  }
  const auto lp = log_hyperprior_g(m, g, std::nullopt, N);
  if (!lp) throw DomainError("method '" + m.name() + "' has no proper hyperprior on g");
  return std::exp(*lp);
}

// density of the shrinkage factor s = g/(1+g) (g/(g+N) mapped back for HGN)
double shrinkage_density(const PriorMethod& m, double s, double N,
                         std::optional<double> b_fixed) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double g = s / (1.0 - s);
  const double jac = 1.0 / ((1.0 - s) * (1.0 - s));  // dg/ds
  if (m.samples_b() && !b_fixed) {
    auto cond = [&](double b) { return std::exp(*log_hyperprior_g(m, g, b, N)); };
    return 0.5 * simpson(cond, 1e-8, 2.0, 400) * jac;
  }
  const auto lp = log_hyperprior_g(m, g, b_fixed, N);
  if (!lp) throw DomainError("method '" + m.name() + "' has no proper hyperprior on g");
  return std::exp(*lp) * jac;
}

}  // namespace

DensityTable prior_g_density(const PriorMethod& method, double N, double lo, double hi,
                             int points) {
  if (!method.has_proper_g_hyperprior())
    throw DomainError("method '" + method.name() + "' has no proper hyperprior on g");
  if (lo <= 0.0 || hi <= lo || points < 2) throw DomainError("bad density grid");
  DensityTable t;
  t.x.resize(points);
  t.density.resize(points);
  for (int j = 0; j < points; ++j) {
    const double g = lo + (hi - lo) * j / (points - 1);
    t.x[j] = g;
    t.density[j] = g_density(method, g, N);
  }
  return t;
}

DensityTable prior_shrinkage_density(const PriorMethod& method, double N, int points) {
  if (!method.has_proper_g_hyperprior())
    throw DomainError("method '" + method.name() + "' has no proper hyperprior on g");
  DensityTable t;
  t.x.resize(points);
  t.density.resize(points);
  for (int j = 0; j < points; ++j) {
    const double s = (j + 0.5) / points;  // open grid on (0,1)
    t.x[j] = s;
    t.density[j] = shrinkage_density(method, s, N, std::nullopt);
  }
  return t;
}

DensityTable prior_shrinkage_density_given_b(const PriorMethod& method, double b, double N,
                                             int points) {
  if (!method.has_proper_g_hyperprior())
    throw DomainError("method '" + method.name() + "' has no proper hyperprior on g");
  DensityTable t;
  t.x.resize(points);
  t.density.resize(points);
  for (int j = 0; j < points; ++j) {
    const double s = (j + 0.5) / points;
    t.x[j] = s;
    t.density[j] = shrinkage_density(method, s, N, b);
  }
  return t;
}

DensityTable tuning_growth_curve(TuningKind kind, double p, int n_lo, int n_hi) {
  if (n_lo < 1 || n_hi < n_lo) throw DomainError("bad sample-size range");
  DensityTable t;
  const int count = n_hi - n_lo + 1;
  t.x.resize(count);
  t.density.resize(count);
  for (int j = 0; j < count; ++j) {
    const int n = n_lo + j;
    t.x[j] = n;
    const auto [lo, hi] = tuning_support(kind, n);
    const double pc = std::clamp(p, lo, hi);
    t.density[j] = tuning_f(kind, n, pc);
  }
  return t;
}

}  // namespace ipdma
