#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace protorep {

/// Flat `key = value` configuration text: one pair per line, `#` starts a
/// comment, blank lines ignored.  Values may be comma-separated lists; only
/// the keys an experiment declares sweepable accept lists (they become grid
/// axes), scalar accessors reject them.
class KvConfig {
 public:
  static KvConfig parse(const std::string& text);
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double dflt) const;
  long get_long(const std::string& key, long dflt) const;
  int get_int(const std::string& key, int dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  std::vector<std::string> get_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  /// Rejects any key outside `known` (schema enforcement).
  void expect_only(const std::vector<std::string>& known) const;
  /// Canonical serialization: sorted `key = value` lines.
  std::string echo() const;

 private:
  std::map<std::string, std::string> kv_;
};

/// One grid cell: the axis assignments overriding the base config.
struct CellSpec {
  int index = 0;
  std::vector<std::pair<std::string, std::string>> assignment;
  std::string label() const;
};

/// One learning run's output series.  The first two columns are always the
/// plot abscissa and the headline measure; extras carry auxiliary series.
struct RunTable {
  std::vector<std::string> extra_columns;
  std::vector<std::vector<double>> rows;  // each row: 2 + extra_columns.size()
};

struct ExperimentPlan {
  std::string experiment;  // shaping | rod | count | transfer | repr_analysis
  std::string env;
  std::string variant;
  KvConfig config;
  std::vector<CellSpec> cells;
  int runs = 0;
  std::uint64_t master_seed = 0;
  std::filesystem::path out_dir;
  std::string x_axis;  // metadata: what the x column counts
  std::string y_axis;
};

/// Validates the config (unknown keys rejected), expands list-valued
/// sweepable keys into the cell grid and resolves the output directory.
ExperimentPlan make_plan(const KvConfig& cfg,
                         const std::optional<std::filesystem::path>& out_override);

/// Scalar used to rank sweep cells: mean return over the last tenth of
/// episodes (shaping), the final row's measure (rod, count, repr_analysis),
/// or the mean over all rows (transfer).
double final_performance(const std::string& experiment, const RunTable& table);

/// Executes every (cell, seed) task and writes raw/, summary.csv,
/// config_echo.cfg and manifest.json under the plan's output directory.
void run_experiment(const ExperimentPlan& plan, int workers);

/// Two-phase hyperparameter search: every cell with `sweep_runs` seeds
/// (written under <out>/search), then the winning cell re-run with
/// `final_runs` fresh seeds as the top-level artifact set; the selection is
/// recorded in selection.json.
void sweep_experiment(const ExperimentPlan& plan, int workers);

/// Recomputes summary.csv for a directory from raw/cell*_seed*.csv alone.
void summarize_dir(const std::filesystem::path& dir);

/// Renders a stored vector (1-row or 1-column CSV, or row `row` of a square
/// matrix CSV) over a grid map as <input>.heat.csv and <input>.heat.svg.
void heatmap_file(const std::filesystem::path& csv_path, const std::string& env_name,
                  const std::string& variant, int row);

/// Worker count: CLI value if positive, else PROTOREP_WORKERS, else 1.
int resolve_workers(int cli_value);

}  // namespace protorep
