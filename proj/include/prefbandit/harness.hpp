#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "prefbandit/design.hpp"
#include "prefbandit/distill.hpp"
#include "prefbandit/dpo.hpp"
#include "prefbandit/generators.hpp"

namespace prefbandit {

// Experiment description parsed from the line-based `key value` config
// format (see README). Unknown keys are errors.
struct ExperimentSpec {
  std::string method;  // online-dpo | offline-dpo | two-step-design |
                       // rd-fixed | rd-calibrated | rebel-legacy
  std::optional<RecipeHeader> recipe;
  std::string instance_file;

  std::string sweep_axis = "n";  // n | K | R
  std::vector<double> grid;      // strictly increasing
  std::vector<uint64_t> seeds;
  std::string out_path;

  int iterations = 1;
  long batch = 256;
  std::string schedule = "constant";  // constant | exp-decay
  double eta = 0.5;
  double alpha = 1.0;
  long n_final = 0;
  int epochs = 1;
  double gamma = 0.0;     // 0 keeps the instance temperature
  double grad_tol = 1e-8;
  int max_steps = 50000;
  double gamma_c = -1.0;
  std::string rd_loss = "squared";  // squared | binary-kl
  double beta = 1.0;
  double rm_epsilon = 0.0;  // reward-model corruption level
  double design_weight = 0.5;
  bool cumulative = false;
  bool timing = false;  // wall times in the CSV; off keeps output byte-stable
};

ExperimentSpec parse_config(const std::string& text);
ExperimentSpec load_config_file(const std::string& path);

struct RunRecord {
  std::string method;
  double sweep = 0.0;
  uint64_t seed = 0;
  int round = 0;
  double err_p = 0.0;
  double err_2 = 0.0;
  double kl_fwd = 0.0;
  double kl_rev = 0.0;
  double coverage = 0.0;
  double mad_err = 0.0;
  double seconds = 0.0;
  std::string note;  // empty for ok rows, reason string for error rows
};

void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_csv(std::istream& is);

// Cartesian product of sweep grid x seeds, deterministic (sweep, seed, round)
// order regardless of parallelism. Cell failures become error rows.
std::vector<RunRecord> run_experiment(const ExperimentSpec& spec, int parallelism = 1);

// Numeric column accessor by name for the slope fit and report.
double record_column(const RunRecord& r, const std::string& name);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root-mean-square residual in log space
};

// Ordinary least squares on (ln x, ln y).
SlopeFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

// Final-round records are grouped by the x column and aggregated by the
// median over seeds before the fit.
SlopeFit fit_loglog_slope(const std::vector<RunRecord>& records, const std::string& x_column,
                          const std::string& y_column);

double median(std::vector<double> values);

// Text summary (per-method medians and interquartile ranges per sweep point)
// plus optional plot-ready two-column series files under the given prefix.
std::string report(const std::vector<RunRecord>& records, const std::string& series_prefix = "");

// Deterministic helper: run fn(i) for i in [0, count) on `threads` workers,
// collecting results into index order.
void parallel_for_indexed(int count, int threads, const std::function<void(int)>& fn);

}  // namespace prefbandit
