#include "ipdma/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace ipdma {

Eigen::VectorXd IpdDataset::stacked_t() const {
  Eigen::VectorXd out(n_total());
  int at = 0;
  for (const auto& tr : trials) {
    out.segment(at, tr.n()) = tr.t;
    at += tr.n();
  }
  return out;
}

Eigen::VectorXd IpdDataset::stacked_y() const {
  Eigen::VectorXd out(n_total());
  int at = 0;
  for (const auto& tr : trials) {
    out.segment(at, tr.n()) = tr.y;
    at += tr.n();
  }
  return out;
}

void IpdDataset::validate() const {
  if (trials.empty()) throw ValidationError("dataset has no trials");
  for (const auto& tr : trials) {
    const int n = tr.n();
    if (n < 2) throw ValidationError("trial '" + tr.trial_id + "' has fewer than 2 participants");
    if (tr.t.size() != n || tr.X.rows() != n)
      throw ValidationError("trial '" + tr.trial_id + "' has inconsistent row counts");
    if (tr.X.cols() != p)
      throw ValidationError("trial '" + tr.trial_id + "' has covariate dimension " +
                            std::to_string(tr.X.cols()) + ", expected " + std::to_string(p));
    int treated = 0;
    for (int j = 0; j < n; ++j) {
      const double tv = tr.t[j];
      if (tv != 0.0 && tv != 1.0)
        throw ValidationError("trial '" + tr.trial_id + "' has a treatment value other than 0/1");
      treated += tv == 1.0 ? 1 : 0;
    }
    if (treated == 0 || treated == n)
      throw ValidationError("trial '" + tr.trial_id + "' has participants in only one arm");
    if (!tr.y.allFinite() || !tr.X.allFinite())
      throw ValidationError("trial '" + tr.trial_id + "' contains non-finite values");
  }
  if (static_cast<int>(moderator_indices.size()) > p)
    throw ValidationError("more moderators than covariates");
  std::vector<int> sorted = moderator_indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError("duplicate moderator indices");
  for (int k : moderator_indices)
    if (k < 0 || k >= p) throw ValidationError("moderator index out of range");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

IpdDataset ingest_csv_text(const std::string& text, const ColumnMap& schema,
                           const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(origin + ": empty file");
  const auto header = split_csv_line(line);

  std::map<std::string, int> col_index;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) col_index[trim(header[i])] = i;

  auto require = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end()) throw SchemaError(origin + ": missing column '" + name + "'");
    return it->second;
  };

  const int c_trial = require(schema.trial_id);
  const int c_y = require(schema.y);
  const int c_t = require(schema.t);

  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    // autodetect x1..xp, contiguous from 1
    for (int k = 1;; ++k) {
      const std::string name = "x" + std::to_string(k);
      if (!col_index.count(name)) break;
      cov_names.push_back(name);
    }
    if (cov_names.empty()) throw SchemaError(origin + ": no covariate columns x1..xp found");
  }
  std::vector<int> c_cov;
  for (const auto& name : cov_names) c_cov.push_back(require(name));
  const int p = static_cast<int>(cov_names.size());

  struct Rows {
    std::vector<double> y, t;
    std::vector<double> x;  // row-major n x p
  };
  std::vector<std::string> trial_order;
  std::map<std::string, Rows> by_trial;

  int row_no = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw IngestError(origin + ": row " + std::to_string(row_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    auto cell = [&](int c, const char* what) {
      double v;
      if (!parse_double(fields[c], v))
        throw IngestError(origin + ": row " + std::to_string(row_no) + ": missing or non-numeric " +
                          what + " ('" + trim(fields[c]) + "')");
      return v;
    };
    const std::string id = trim(fields[c_trial]);
    if (id.empty())
      throw IngestError(origin + ": row " + std::to_string(row_no) + ": empty trial_id");
    if (!by_trial.count(id)) trial_order.push_back(id);
    Rows& rows = by_trial[id];
    rows.y.push_back(cell(c_y, schema.y.c_str()));
    rows.t.push_back(cell(c_t, schema.t.c_str()));
    for (int k = 0; k < p; ++k) rows.x.push_back(cell(c_cov[k], cov_names[k].c_str()));
  }
  if (trial_order.empty()) throw IngestError(origin + ": no data rows");

  IpdDataset data;
  data.p = p;
  for (const auto& id : trial_order) {
    const Rows& rows = by_trial[id];
    TrialBlock tr;
    tr.trial_id = id;
    const int n = static_cast<int>(rows.y.size());
    tr.y = Eigen::Map<const Eigen::VectorXd>(rows.y.data(), n);
    tr.t = Eigen::Map<const Eigen::VectorXd>(rows.t.data(), n);
    tr.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(rows.x.data(), n, p);
    data.trials.push_back(std::move(tr));
  }
  // every covariate is a moderator candidate unless the caller narrows it
  data.moderator_indices.resize(p);
  for (int k = 0; k < p; ++k) data.moderator_indices[k] = k;
  data.validate();
  return data;
}

IpdDataset ingest_csv(const std::string& path, const ColumnMap& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ingest_csv_text(buf.str(), schema, path);
}

IpdDataset center_covariates(const IpdDataset& data, Centering mode) {
  if (mode == Centering::None) return data;
  if (data.centering != Centering::None)
    throw ValidationError("dataset is already centered");
  IpdDataset out = data;
  const int I = data.n_trials();
  if (mode == Centering::Pooled) {
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(data.p);
    for (const auto& tr : data.trials) sums += tr.X.colwise().sum().transpose();
    out.column_means = sums / static_cast<double>(data.n_total());
    for (auto& tr : out.trials) tr.X.rowwise() -= out.column_means.transpose();
  } else {
    out.trial_means.resize(I, data.p);
    for (int i = 0; i < I; ++i) {
      out.trial_means.row(i) = data.trials[i].X.colwise().mean();
      out.trials[i].X.rowwise() -= out.trial_means.row(i);
    }
  }
  out.centering = mode;
  return out;
}

IpdDataset uncenter_covariates(const IpdDataset& data) {
  IpdDataset out = data;
  if (data.centering == Centering::Pooled) {
    for (auto& tr : out.trials) tr.X.rowwise() += data.column_means.transpose();
  } else if (data.centering == Centering::WithinTrial) {
    for (int i = 0; i < out.n_trials(); ++i)
      out.trials[i].X.rowwise() += data.trial_means.row(i);
  }
  out.centering = Centering::None;
  out.column_means.resize(0);
  out.trial_means.resize(0, 0);
  return out;
}

Eigen::VectorXd moderator_column(const IpdDataset& data, int k) {
  const bool known = std::find(data.moderator_indices.begin(), data.moderator_indices.end(), k) !=
                     data.moderator_indices.end();
  if (!known)
    throw DomainError("covariate index " + std::to_string(k) + " is not a moderator");
  Eigen::VectorXd out(data.n_total());
  int at = 0;
  for (const auto& tr : data.trials) {
    out.segment(at, tr.n()) = tr.t.cwiseProduct(tr.X.col(k));
    at += tr.n();
  }
  return out;
}

}  // namespace ipdma
