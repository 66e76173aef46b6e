#include <doctest.h>

#include <ipdma/data_model.hpp>
#include <ipdma/rng.hpp>

#include <sstream>

using namespace ipdma;

namespace {

std::string five_trial_csv() {
  std::ostringstream os;
  os << "trial_id,y,t";
  for (int k = 1; k <= 8; ++k) os << ",x" << k;
  os << "\n";
  Rng rng(7);
  for (int i = 1; i <= 5; ++i) {
    for (int j = 0; j < 4; ++j) {
      os << "t" << i << "," << rng.normal() << "," << (j % 2);
      for (int k = 0; k < 8; ++k) os << "," << rng.normal();
      os << "\n";
    }
  }
  return os.str();
}

IpdDataset toy_dataset(const std::vector<std::vector<double>>& t_by_trial,
                       const std::vector<std::vector<double>>& x_by_trial) {
  IpdDataset data;
  data.p = 1;
  data.moderator_indices = {0};
  for (size_t i = 0; i < t_by_trial.size(); ++i) {
    TrialBlock tr;
    tr.trial_id = "t" + std::to_string(i + 1);
    const int n = static_cast<int>(t_by_trial[i].size());
    tr.t = Eigen::Map<const Eigen::VectorXd>(t_by_trial[i].data(), n);
    tr.X = Eigen::Map<const Eigen::VectorXd>(x_by_trial[i].data(), n);
    tr.y = Eigen::VectorXd::Zero(n);
    data.trials.push_back(tr);
  }
  return data;
}

}  // namespace

TEST_CASE("ingest: five trials, eight covariates") {
  const IpdDataset data = ingest_csv_text(five_trial_csv());
  CHECK(data.n_trials() == 5);
  CHECK(data.p == 8);
  CHECK(data.n_total() == 20);
  CHECK(data.d() == 8);
  // row order preserved within trial
  CHECK(data.trials[0].trial_id == "t1");
  CHECK(data.trials[4].trial_id == "t5");
}

TEST_CASE("ingest: single-arm trial rejected") {
  std::string csv = "trial_id,y,t,x1\n";
  csv += "a,1.0,1,0.5\n";
  csv += "a,2.0,1,0.2\n";
  csv += "b,1.0,0,0.1\n";
  csv += "b,2.0,1,0.7\n";
  CHECK_THROWS_AS(ingest_csv_text(csv), ValidationError);
}

TEST_CASE("ingest: empty cell names the row") {
  std::string csv = "trial_id,y,t,x1,x2,x3\n";
  csv += "a,1.0,1,0.5,0.1,0.3\n";
  csv += "a,2.0,0,0.2,0.4,\n";  // row 3, empty x3
  try {
    ingest_csv_text(csv);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    CHECK(std::string(e.what()).find("x3") != std::string::npos);
  }
}

TEST_CASE("ingest: non-numeric cell rejected") {
  std::string csv = "trial_id,y,t,x1\n";
  csv += "a,1.0,1,oops\n";
  csv += "a,2.0,0,0.2\n";
  CHECK_THROWS_AS(ingest_csv_text(csv), IngestError);
}

TEST_CASE("ingest: missing required column is a schema error") {
  CHECK_THROWS_AS(ingest_csv_text("trial_id,y,x1\na,1,0.5\n"), SchemaError);
  CHECK_THROWS_AS(ingest_csv_text("trial_id,y,t\na,1,0\n"), SchemaError);
}

TEST_CASE("ingest: named covariate columns") {
  std::string csv = "study,outcome,arm,age,weight\n";
  csv += "a,1.0,1,50,70\n";
  csv += "a,2.0,0,60,80\n";
  ColumnMap map;
  map.trial_id = "study";
  map.y = "outcome";
  map.t = "arm";
  map.covariates = {"age", "weight"};
  const IpdDataset data = ingest_csv_text(csv, map);
  CHECK(data.p == 2);
  CHECK(data.trials[0].X(0, 0) == 50.0);
}

TEST_CASE("centering: simple column") {
  auto data = toy_dataset({{1, 0, 1}}, {{1, 2, 3}});
  const IpdDataset c = center_covariates(data);
  CHECK(c.trials[0].X(0, 0) == doctest::Approx(-1.0));
  CHECK(c.trials[0].X(1, 0) == doctest::Approx(0.0));
  CHECK(c.trials[0].X(2, 0) == doctest::Approx(1.0));
  CHECK(c.column_means[0] == doctest::Approx(2.0));
}

TEST_CASE("centering: already-centered column unchanged") {
  auto data = toy_dataset({{1, 0, 1}}, {{-1, 0, 1}});
  const IpdDataset c = center_covariates(data);
  for (int j = 0; j < 3; ++j)
    CHECK(c.trials[0].X(j, 0) == doctest::Approx(data.trials[0].X(j, 0)).epsilon(1e-12));
}

TEST_CASE("centering: grand mean pools trials") {
  auto data = toy_dataset({{1, 0}, {0, 1}}, {{0, 0}, {2, 2}});
  const IpdDataset c = center_covariates(data);
  CHECK(c.trials[0].X(0, 0) == doctest::Approx(-1.0));
  CHECK(c.trials[1].X(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("centering: within-trial mode and round trip") {
  const IpdDataset data = ingest_csv_text(five_trial_csv());
  for (Centering mode : {Centering::Pooled, Centering::WithinTrial}) {
    const IpdDataset c = center_covariates(data, mode);
    if (mode == Centering::Pooled) {
      Eigen::VectorXd sums = Eigen::VectorXd::Zero(data.p);
      for (const auto& tr : c.trials) sums += tr.X.colwise().sum().transpose();
      for (int k = 0; k < data.p; ++k)
        CHECK(std::abs(sums[k] / data.n_total()) < 1e-10);
    }
    const IpdDataset back = uncenter_covariates(c);
    for (int i = 0; i < data.n_trials(); ++i)
      CHECK((back.trials[i].X - data.trials[i].X).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(center_covariates(center_covariates(data)), ValidationError);
}

TEST_CASE("moderator column: elementwise product") {
  auto data = toy_dataset({{1, 0, 1}}, {{2, 5, -3}});
  const Eigen::VectorXd col = moderator_column(data, 0);
  CHECK(col[0] == 2.0);
  CHECK(col[1] == 0.0);
  CHECK(col[2] == -3.0);
  CHECK_THROWS_AS(moderator_column(data, 1), DomainError);
}

TEST_CASE("moderator column: all-control trial gives zero segment, all-treated is identity") {
  auto data = toy_dataset({{0, 0}, {1, 1}}, {{4, 5}, {6, 7}});
  const Eigen::VectorXd col = moderator_column(data, 0);
  CHECK(col.head(2).isZero());
  CHECK(col[2] == 6.0);
  CHECK(col[3] == 7.0);
}

TEST_CASE("moderator column: zeros exactly where t is zero") {
  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> t, x;
    const int n = 5 + static_cast<int>(rng.below(10));
    for (int j = 0; j < n; ++j) {
      t.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);
      x.push_back(rng.normal() + 2.0);  // keep x away from 0
    }
    auto data = toy_dataset({t}, {x});
    const Eigen::VectorXd col = moderator_column(data, 0);
    for (int j = 0; j < n; ++j) CHECK((col[j] == 0.0) == (t[j] == 0.0));
  }
}

TEST_CASE("validate rejects malformed datasets") {
  auto ok = toy_dataset({{1, 0}}, {{1, 2}});
  CHECK_NOTHROW(ok.validate());

  auto tiny = toy_dataset({{1}}, {{1}});
  CHECK_THROWS_AS(tiny.validate(), ValidationError);

  auto bad_t = toy_dataset({{1, 2}}, {{1, 2}});
  CHECK_THROWS_AS(bad_t.validate(), ValidationError);

  auto dup = toy_dataset({{1, 0}}, {{1, 2}});
  dup.moderator_indices = {0, 0};
  CHECK_THROWS_AS(dup.validate(), ValidationError);
}
