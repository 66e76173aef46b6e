#include "ipdma/priors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ipdma {

namespace {
constexpr double kE = 2.718281828459045;

std::string strip_spaces(const std::string& s) {
  std::string out;
  for (char c : s)
    if (c != ' ' && c != '\t') out.push_back(c);
  return out;
}
}  // namespace

PriorMethod PriorMethod::ssvs(double c, double h) {
  if (c <= 0.0 || h <= 0.0) throw DomainError("SSVS constants must be > 0");
  PriorMethod m{PriorTag::SSVS};
  m.ssvs_c = c;
  m.ssvs_h = h;
  return m;
}

PriorMethod PriorMethod::hg(double a) {
  if (a <= 2.0) throw DomainError("HG requires a > 2");
  PriorMethod m{PriorTag::HG};
  m.a = a;
  return m;
}

PriorMethod PriorMethod::hgn(double a) {
  if (a <= 2.0) throw DomainError("HGN requires a > 2");
  PriorMethod m{PriorTag::HGN};
  m.a = a;
  return m;
}

PriorMethod PriorMethod::czs() {
  PriorMethod m{PriorTag::CZS};
  m.tuning = TuningKind::N;  // the only tuning function considered for CZS
  return m;
}

PriorMethod PriorMethod::cmg(ShrinkLevel s, TuningKind f) {
  PriorMethod m{PriorTag::CMG};
  m.shrink = s;
  m.tuning = f;
  return m;
}

PriorMethod PriorMethod::zellner(double g) {
  if (g <= 0.0) throw DomainError("fixed g must be > 0");
  PriorMethod m{PriorTag::FixedG};
  m.fixed_g = g;
  return m;
}

std::string to_string(ShrinkLevel s) {
  switch (s) {
    case ShrinkLevel::S1: return "S1";
    case ShrinkLevel::S2: return "S2";
    default: return "S3";
  }
}

std::string to_string(TuningKind k) {
  switch (k) {
    case TuningKind::N: return "n";
    case TuningKind::Log: return "log";
    default: return "pow";
  }
}

std::string PriorMethod::name() const {
  switch (tag) {
    case PriorTag::Flat: return "Flat";
    case PriorTag::HS: return "HS";
    case PriorTag::SSVS: return "SSVS";
    case PriorTag::UIP: return "UIP";
    case PriorTag::ZS: return "ZS";
    case PriorTag::HG: return "HG(a=" + std::to_string(static_cast<int>(a)) + ")";
    case PriorTag::HGN: return "HGN(a=" + std::to_string(static_cast<int>(a)) + ")";
    case PriorTag::CUIP: return "CUIP";
    case PriorTag::CZS: return "CZS";
    case PriorTag::CMG: return "CMG-" + to_string(shrink) + "-" + to_string(tuning);
    default: {
      std::ostringstream os;
      os << "FixedG(" << fixed_g << ")";
      return os.str();
    }
  }
}

const std::vector<std::string>& method_roster() {
  static const std::vector<std::string> roster = {
      "Flat",       "HS",         "SSVS",       "UIP",        "ZS",
      "HG(a=3)",    "HG(a=4)",    "HGN(a=3)",   "HGN(a=4)",   "CUIP",
      "CZS",        "CMG-S1-n",   "CMG-S2-n",   "CMG-S3-n",   "CMG-S1-log",
      "CMG-S2-log", "CMG-S3-log", "CMG-S1-pow", "CMG-S2-pow", "CMG-S3-pow"};
  return roster;
}

PriorMethod PriorMethod::parse(const std::string& raw) {
  const std::string name = strip_spaces(raw);
  if (name == "Flat") return flat();
  if (name == "HS") return horseshoe();
  if (name == "SSVS") return ssvs();
  if (name == "UIP") return uip();
  if (name == "ZS") return zs();
  if (name == "HG(a=3)") return hg(3.0);
  if (name == "HG(a=4)") return hg(4.0);
  if (name == "HGN(a=3)") return hgn(3.0);
  if (name == "HGN(a=4)") return hgn(4.0);
  if (name == "CUIP") return cuip();
  if (name == "CZS") return czs();
  if (name.rfind("CMG-", 0) == 0) {
    const std::string rest = name.substr(4);
    ShrinkLevel s;
    TuningKind f;
    bool ok = rest.size() > 3;
    if (ok) {
      if (rest.rfind("S1-", 0) == 0) s = ShrinkLevel::S1;
      else if (rest.rfind("S2-", 0) == 0) s = ShrinkLevel::S2;
      else if (rest.rfind("S3-", 0) == 0) s = ShrinkLevel::S3;
      else ok = false;
    }
    if (ok) {
      const std::string fk = rest.substr(3);
      if (fk == "n") f = TuningKind::N;
      else if (fk == "log") f = TuningKind::Log;
      else if (fk == "pow") f = TuningKind::Pow;
      else ok = false;
    }
    if (ok) return cmg(s, f);
  }
  std::ostringstream os;
  os << "unknown method '" << raw << "'; available methods:";
  for (const auto& m : method_roster()) os << " " << m;
  throw UsageError(os.str());
}

bool PriorMethod::is_g_method() const {
  switch (tag) {
    case PriorTag::UIP:
    case PriorTag::ZS:
    case PriorTag::HG:
    case PriorTag::HGN:
    case PriorTag::CUIP:
    case PriorTag::CZS:
    case PriorTag::CMG:
    case PriorTag::FixedG: return true;
    default: return false;
  }
}

bool PriorMethod::is_calibrated() const {
  return tag == PriorTag::CUIP || tag == PriorTag::CZS || tag == PriorTag::CMG;
}

bool PriorMethod::samples_g() const {
  switch (tag) {
    case PriorTag::ZS:
    case PriorTag::HG:
    case PriorTag::HGN:
    case PriorTag::CZS:
    case PriorTag::CMG: return true;
    default: return false;
  }
}

bool PriorMethod::samples_b() const {
  return tag == PriorTag::CMG && (shrink == ShrinkLevel::S1 || shrink == ShrinkLevel::S3);
}

bool PriorMethod::samples_p() const {
  return tag == PriorTag::CZS || tag == PriorTag::CMG;
}

bool PriorMethod::has_proper_g_hyperprior() const { return samples_g(); }

TuningKind PriorMethod::tuning_kind() const {
  return tag == PriorTag::CZS ? TuningKind::N : tuning;
}

bool PriorMethod::operator==(const PriorMethod& o) const {
  if (tag != o.tag) return false;
  switch (tag) {
    case PriorTag::HG:
    case PriorTag::HGN: return a == o.a;
    case PriorTag::SSVS: return ssvs_c == o.ssvs_c && ssvs_h == o.ssvs_h;
    case PriorTag::CMG: return shrink == o.shrink && tuning == o.tuning;
    case PriorTag::FixedG: return fixed_g == o.fixed_g;
    default: return true;
  }
}

std::pair<double, double> tuning_support(TuningKind kind, int n_i) {
  if (n_i < 1) throw DomainError("trial size must be >= 1");
  const double n = static_cast<double>(n_i);
  switch (kind) {
    case TuningKind::N: return {1.0 / n, 1.0};
    case TuningKind::Log: return {kE / n, 1.0};  // keeps f >= 1
    default: return {0.0, 1.0};
  }
}

double tuning_f(TuningKind kind, int n_i, double p_i) {
  const auto [lo, hi] = tuning_support(kind, n_i);
  if (p_i < lo || p_i > hi)
    throw DomainError("tuning fraction " + std::to_string(p_i) + " outside support [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  const double n = static_cast<double>(n_i);
  switch (kind) {
    case TuningKind::N: return n * p_i;
    case TuningKind::Log: return std::log(n * p_i);
    default: return std::pow(n, p_i);
  }
}

Eigen::VectorXd tuning_values(const PriorMethod& method, const std::vector<int>& trial_sizes,
                              const Eigen::VectorXd& p_trial) {
  const int I = static_cast<int>(trial_sizes.size());
  Eigen::VectorXd f = Eigen::VectorXd::Ones(I);
  if (method.tag == PriorTag::CUIP) {
    double N = 0;
    for (int n : trial_sizes) N += n;
    f.setConstant(std::sqrt(N));
  } else if (method.samples_p()) {
    if (p_trial.size() != I) throw DomainError("tuning fractions must have one entry per trial");
    for (int i = 0; i < I; ++i) f[i] = tuning_f(method.tuning_kind(), trial_sizes[i], p_trial[i]);
  }
  return f;
}

Eigen::VectorXd lambda_star(const Eigen::VectorXd& sigma2, const Eigen::VectorXd& f_vals,
                            const std::vector<int>& trial_sizes) {
  const int I = static_cast<int>(trial_sizes.size());
  if (sigma2.size() != I || f_vals.size() != I)
    throw DomainError("lambda_star: need one sigma^2 and one f value per trial");
  if ((sigma2.array() <= 0.0).any() || (f_vals.array() <= 0.0).any())
    throw DomainError("lambda_star: sigma^2 and f values must be > 0");
  int N = 0;
  for (int n : trial_sizes) N += n;
  Eigen::VectorXd w(N);
  int at = 0;
  for (int i = 0; i < I; ++i) {
    w.segment(at, trial_sizes[i]).setConstant(1.0 / (sigma2[i] * f_vals[i]));
    at += trial_sizes[i];
  }
  return w;
}

double gamma_prior_precision(int k, double g_k, const Eigen::VectorXd& weights,
                             const IpdDataset& data) {
  if (g_k <= 0.0) throw DomainError("g_k must be > 0");
  const Eigen::VectorXd col = moderator_column(data, k);
  if (weights.size() != col.size())
    throw DomainError("weight vector length does not match observation count");
  const double s = (weights.array() * col.array().square()).sum();
  if (s <= 0.0)
    throw ValidationError("moderator column " + std::to_string(k) +
                          " is identically zero; prior variance would be infinite");
  return s / g_k;
}

double log_beta_pdf(double x, double r, double s) {
  if (x <= 0.0 || x >= 1.0) return -std::numeric_limits<double>::infinity();
  const double lbeta = std::lgamma(r) + std::lgamma(s) - std::lgamma(r + s);
  return (r - 1.0) * std::log(x) + (s - 1.0) * std::log1p(-x) - lbeta;
}

double log_inv_gamma_pdf(double x, double shape, double scale) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

std::pair<double, double> shrinkage_beta_params(const PriorMethod& method, double b_k) {
  switch (method.tag) {
    case PriorTag::HG:
    case PriorTag::HGN: return {1.0, method.a / 2.0 - 1.0};
    case PriorTag::CMG:
      switch (method.shrink) {
        case ShrinkLevel::S1:
          if (b_k <= 0.0 || b_k > 2.0) throw DomainError("S1 requires b in (0, 2]");
          return {2.0, b_k};
        case ShrinkLevel::S2: return {1.0, 1.0};
        default:
          if (b_k <= 0.0 || b_k > 2.0) throw DomainError("S3 requires b in (0, 2]");
          return {b_k, 2.0};
      }
    default: throw DomainError("method '" + method.name() + "' has no Beta shrinkage hyperprior");
  }
}

std::optional<double> log_hyperprior_g(const PriorMethod& method, double g_k,
                                       std::optional<double> b_k, double N) {
  if (g_k <= 0.0) throw DomainError("g_k must be > 0");
  switch (method.tag) {
    case PriorTag::Flat:
    case PriorTag::UIP:
    case PriorTag::CUIP:
    case PriorTag::FixedG:
    case PriorTag::HS:
    case PriorTag::SSVS: return std::nullopt;
    case PriorTag::ZS: return log_inv_gamma_pdf(g_k, 0.5, N / 2.0);
    case PriorTag::CZS: return log_inv_gamma_pdf(g_k, 0.5, 0.5);
    case PriorTag::HG:
      // (a-2)/2 (1+g)^{-a/2}
      return std::log((method.a - 2.0) / 2.0) - (method.a / 2.0) * std::log1p(g_k);
    case PriorTag::HGN:
      return std::log((method.a - 2.0) / (2.0 * N)) - (method.a / 2.0) * std::log1p(g_k / N);
    case PriorTag::CMG: {
      const auto [r, s] = shrinkage_beta_params(method, b_k.value_or(1.0));
      // Beta(r,s) on g/(1+g), Jacobian 1/(1+g)^2
      const double u = g_k / (1.0 + g_k);
      return log_beta_pdf(u, r, s) - 2.0 * std::log1p(g_k);
    }
  }
  return std::nullopt;
}

double sample_prior_shrinkage(const PriorMethod& method, double N, Rng& rng) {
  switch (method.tag) {
    case PriorTag::ZS: {
      const double g = rng.inv_gamma(0.5, N / 2.0);
      return g / (1.0 + g);
    }
    case PriorTag::CZS: {
      const double g = rng.inv_gamma(0.5, 0.5);
      return g / (1.0 + g);
    }
    case PriorTag::HG: return rng.beta(1.0, method.a / 2.0 - 1.0);
    case PriorTag::HGN: {
      const double sN = rng.beta(1.0, method.a / 2.0 - 1.0);
      const double g = N * sN / (1.0 - sN);
      return g / (1.0 + g);
    }
    case PriorTag::CMG:
      switch (method.shrink) {
        case ShrinkLevel::S1: return rng.beta(2.0, rng.uniform(0.0, 2.0));
        case ShrinkLevel::S2: return rng.beta(1.0, 1.0);
        default: return rng.beta(rng.uniform(0.0, 2.0), 2.0);
      }
    default:
      throw DomainError("method '" + method.name() + "' has no proper hyperprior on g");
  }
}

double log_prior_gamma_nong(const PriorMethod& method, double gamma_k, double lambda2,
                            double tau_hs2, int inclusion, double eta) {
  constexpr double half_log_2pi = 0.9189385332046727;
  switch (method.tag) {
    case PriorTag::Flat: return 0.0;
    case PriorTag::HS: {
      if (lambda2 <= 0.0 || tau_hs2 <= 0.0) throw DomainError("HS scales must be > 0");
      const double v = lambda2 * tau_hs2;
      return -half_log_2pi - 0.5 * std::log(v) - gamma_k * gamma_k / (2.0 * v);
    }
    case PriorTag::SSVS: {
      if (inclusion != 0 && inclusion != 1) throw DomainError("SSVS indicator must be 0/1");
      if (eta <= 0.0 || eta >= method.ssvs_c)
        throw DomainError("SSVS eta must lie in (0, c)");
      const double v = (inclusion ? method.ssvs_h : 1.0) * eta * eta;
      return -half_log_2pi - 0.5 * std::log(v) - gamma_k * gamma_k / (2.0 * v);
    }
    default:
      throw DomainError("method '" + method.name() + "' is a g-prior method");
  }
}

}  // namespace ipdma
