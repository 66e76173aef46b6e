#ifndef IPDMA_CLI_HPP
#define IPDMA_CLI_HPP

#include <map>
#include <string>
#include <vector>

#include "ipdma/data_model.hpp"
#include "ipdma/sampler.hpp"
#include "ipdma/simulation.hpp"

namespace ipdma {

extern const char* kVersion;

// Flat dotted-key configuration, "key = value" per line, '#' comments.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_text(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  void set(const std::string& key, const std::string& value);

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// Everything one run needs; assembled from the config file plus flag overrides.
struct RunConfig {
  std::string subcommand;  // fit | simulate | report | prior-curves
  std::string config_path;

  // data
  std::string data_path;
  ColumnMap columns;
  Centering centering = Centering::Pooled;
  std::vector<int> moderators;  // empty -> all covariates

  // model / methods
  std::vector<PriorMethod> methods;
  bool moderator_random_effects = true;
  bool compare_random_effects = false;  // fit both variants, report both DICs

  ChainConfig chain;

  // simulate
  std::string scenario_path;
  bool full_grid = false;
  int replicates = 0;  // overrides scenario file when > 0

  // report
  std::string draws_path;

  // outputs
  std::string out_dir = "out";
  MetricVariant metric_variant = MetricVariant::Literal;
  double threshold = 0.5;
  int workers = 0;
  bool save_estimates = false;

  static RunConfig from_config(const KeyValueConfig& cfg);
};

// Subcommand entry points. Each writes a manifest (config, seed, version)
// into out_dir before any computation output; outputs are staged and renamed
// on completion. Returns the process exit code.
int cmd_fit(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_report(const RunConfig& config);
int cmd_prior_curves(const RunConfig& config);

// argv-level driver used by the binary. Exit codes: 0 ok, 1 usage, 2 data
// error, 3 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace ipdma

#endif
