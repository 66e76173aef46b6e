#include <doctest.h>

#include <ipdma/posterior.hpp>
#include <ipdma/rng.hpp>

#include "support/stat_oracles.hpp"

using namespace ipdma;

namespace {

PosteriorDraws draws_of(const std::vector<std::pair<std::string, Eigen::VectorXd>>& cols) {
  PosteriorDraws d;
  const int m = static_cast<int>(cols[0].second.size());
  Eigen::MatrixXd chain(m, cols.size());
  for (size_t j = 0; j < cols.size(); ++j) {
    d.names.push_back(cols[j].first);
    chain.col(j) = cols[j].second;
  }
  d.chains = {chain};
  return d;
}

Eigen::VectorXd std_normal_draws(int m, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(m);
  for (int i = 0; i < m; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("summarize: mean, sd and quantiles") {
  Eigen::VectorXd three(3);
  three << 1, 2, 3;
  const PosteriorSummary s = summarize(draws_of({{"x", three}}));
  CHECK(s.at("x").mean == doctest::Approx(2.0));
  CHECK(s.at("x").sd == doctest::Approx(1.0));

  // symmetric draws: |mean| < 3 sd / sqrt(m)
  const Eigen::VectorXd z = std_normal_draws(10000, 3);
  const PosteriorSummary zs = summarize(draws_of({{"x", z}}));
  CHECK(std::abs(zs.at("x").mean) < 3.0 * zs.at("x").sd / 100.0);

  PosteriorDraws empty;
  empty.names = {"x"};
  empty.chains = {Eigen::MatrixXd(0, 1)};
  CHECK_THROWS_AS(summarize(empty), DomainError);
}

TEST_CASE("summarize: uniform quantiles near 0.025 / 0.975") {
  Rng rng(17);
  Eigen::VectorXd u(10000);
  for (int i = 0; i < u.size(); ++i) u[i] = rng.uniform();
  const PosteriorSummary s = summarize(draws_of({{"x", u}}));
  CHECK(std::abs(s.at("x").ci_low - 0.025) < 0.01);
  CHECK(std::abs(s.at("x").ci_high - 0.975) < 0.01);
  CHECK(s.at("x").ci_low <= s.at("x").ci_high);
}

TEST_CASE("summarize computes p_gamma for moderator parameters only") {
  const Eigen::VectorXd z = std_normal_draws(500, 4);
  const PosteriorSummary s =
      summarize(draws_of({{"mu", z}, {"gamma[1]", z}, {"gamma[2]", 3.0 * z}}));
  CHECK(s.gamma_names == std::vector<std::string>{"gamma[1]", "gamma[2]"});
  CHECK(s.p_gamma.size() == 2);
}

TEST_CASE("scaled neighborhood probability") {
  Eigen::VectorXd pm(4);
  pm << -1, 1, -1, 1;  // sample sd = sqrt(4/3) > 1
  CHECK(scaled_neighborhood_prob(pm) == doctest::Approx(1.0));

  Rng rng(9);
  Eigen::VectorXd tight(200);
  for (int i = 0; i < 200; ++i) tight[i] = 10.0 + 0.1 * rng.normal();
  CHECK(scaled_neighborhood_prob(tight) == doctest::Approx(0.0));

  const Eigen::VectorXd z = std_normal_draws(10000, 11);
  CHECK(std::abs(scaled_neighborhood_prob(z) - 0.683) < 0.02);

  // sign-flip invariance
  Eigen::VectorXd skewed(6);
  skewed << 0.1, -0.4, 2.2, 0.3, -1.8, 0.05;
  CHECK(scaled_neighborhood_prob(skewed) == scaled_neighborhood_prob(-skewed));

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(10, 2.0);
  CHECK_THROWS_AS(scaled_neighborhood_prob(flat), DomainError);
  Eigen::VectorXd one(1);
  one << 1.0;
  CHECK_THROWS_AS(scaled_neighborhood_prob(one), DomainError);
}

TEST_CASE("flag_moderators: threshold logic") {
  PosteriorSummary s;
  s.gamma_names = {"gamma[1]", "gamma[2]", "gamma[3]"};
  s.p_gamma = {0.68, 0.20, 0.58};
  s.params = {{"gamma[1]", 0.0, 1.0, -2.0, 2.0},
              {"gamma[2]", 1.0, 0.3, 0.4, 1.6},
              {"gamma[3]", -0.5, 0.5, -1.5, 0.5}};

  const ModeratorFlags f = flag_moderators(s, 0.5);
  CHECK(f.scaled_neighborhood == std::vector<int>{1});
  CHECK(f.ci_excludes_zero == std::vector<int>{1});  // (0.4, 1.6) excludes 0

  s.p_gamma = {0.5, 0.5, 0.5};
  CHECK(flag_moderators(s, 0.5).scaled_neighborhood.empty());  // strict inequality
  CHECK(flag_moderators(s, 1.0).scaled_neighborhood.size() == 3);

  // monotone in the threshold
  s.p_gamma = {0.68, 0.20, 0.58};
  for (double t1 : {0.1, 0.3, 0.5, 0.7}) {
    for (double t2 : {0.1, 0.3, 0.5, 0.7}) {
      if (t1 > t2) continue;
      const auto a = flag_moderators(s, t1).scaled_neighborhood;
      const auto b = flag_moderators(s, t2).scaled_neighborhood;
      for (int k : a) CHECK(std::find(b.begin(), b.end(), k) != b.end());
    }
  }
}

TEST_CASE("kde: standard normal at the mode, integrates to one") {
  const Eigen::VectorXd z = std_normal_draws(10000, 21);
  const DensityTable t = density_export(z, 512);
  // value at x closest to 0
  int j0 = 0;
  for (int j = 0; j < t.x.size(); ++j)
    if (std::abs(t.x[j]) < std::abs(t.x[j0])) j0 = j;
  CHECK(std::abs(t.density[j0] - 0.3989) < 0.02);

  // trapezoid integral over the +-6 sd grid
  double integral = 0.0;
  for (int j = 1; j < t.x.size(); ++j)
    integral += 0.5 * (t.density[j] + t.density[j - 1]) * (t.x[j] - t.x[j - 1]);
  CHECK(std::abs(integral - 1.0) < 0.01);
}

TEST_CASE("prior curves: S2 factor density is flat at one") {
  const DensityTable t =
      prior_shrinkage_density(PriorMethod::cmg(ShrinkLevel::S2, TuningKind::N), 625, 64);
  for (int j = 0; j < t.x.size(); ++j) CHECK(t.density[j] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("prior curves: conditional b = 1.2 equals the Beta(1.2, 2) pdf") {
  const DensityTable t = prior_shrinkage_density_given_b(
      PriorMethod::cmg(ShrinkLevel::S3, TuningKind::Pow), 1.2, 625, 101);
  const double lbeta = std::lgamma(1.2) + std::lgamma(2.0) - std::lgamma(3.2);
  double integral = 0.0;
  for (int j = 0; j < t.x.size(); ++j) {
    const double x = t.x[j];
    const double expect = std::exp((1.2 - 1.0) * std::log(x) + std::log1p(-x) - lbeta);
    CHECK(t.density[j] == doctest::Approx(expect).epsilon(1e-9));
    if (j > 0) integral += 0.5 * (t.density[j] + t.density[j - 1]) * (t.x[j] - t.x[j - 1]);
  }
  CHECK(std::abs(integral - 1.0) < 0.02);  // open grid misses the edges slightly
}

TEST_CASE("prior curves: marginal S1/S3 densities agree with Monte Carlo mass") {
  // the marginals have integrable singularities at the edges (mass decays
  // only logarithmically), so compare interior probabilities against draws
  Rng rng(2718);
  for (ShrinkLevel level : {ShrinkLevel::S1, ShrinkLevel::S3}) {
    const PriorMethod m = PriorMethod::cmg(level, TuningKind::N);
    const DensityTable t = prior_shrinkage_density(m, 625, 2000);
    auto curve_mass = [&](double a, double b) {
      double acc = 0.0;
      for (int j = 0; j < t.x.size(); ++j)
        if (t.x[j] >= a && t.x[j] < b) acc += t.density[j] / t.x.size();
      return acc;  // midpoint rule on the uniform grid
    };
    const int n = 40000;
    int inside = 0;
    for (int i = 0; i < n; ++i) {
      const double s = sample_prior_shrinkage(m, 625, rng);
      if (s >= 0.2 && s < 0.8) ++inside;
    }
    CHECK(std::abs(curve_mass(0.2, 0.8) - static_cast<double>(inside) / n) < 0.01);
    // most of the mass is on the grid even with the singular edges
    CHECK(curve_mass(0.0, 1.0) > 0.9);
    CHECK(curve_mass(0.0, 1.0) < 1.005);
  }
}

TEST_CASE("prior curves: HG g-density matches the closed form") {
  const DensityTable t = prior_g_density(PriorMethod::hg(4), 625, 0.1, 20.0, 50);
  for (int j = 0; j < t.x.size(); ++j) {
    const double g = t.x[j];
    CHECK(t.density[j] == doctest::Approx(1.0 / ((1 + g) * (1 + g))).epsilon(1e-9));
  }
  CHECK_THROWS_AS(prior_g_density(PriorMethod::flat(), 625, 0.1, 20.0, 50), DomainError);
  CHECK_THROWS_AS(prior_shrinkage_density(PriorMethod::uip(), 625, 50), DomainError);
}

TEST_CASE("tuning growth curves ordered log < pow < n at p = 0.5") {
  const DensityTable fn = tuning_growth_curve(TuningKind::N, 0.5, 10, 1000);
  const DensityTable fl = tuning_growth_curve(TuningKind::Log, 0.5, 10, 1000);
  const DensityTable fp = tuning_growth_curve(TuningKind::Pow, 0.5, 10, 1000);
  REQUIRE(fn.x.size() == 991);
  for (int j = 0; j < fn.x.size(); ++j) {
    CHECK(fl.density[j] < fp.density[j]);
    CHECK(fp.density[j] < fn.density[j]);
  }
  // n = 100 row: log(50) < 10 < 50
  CHECK(fl.density[90] == doctest::Approx(std::log(50.0)));
  CHECK(fp.density[90] == doctest::Approx(10.0));
  CHECK(fn.density[90] == doctest::Approx(50.0));
}
