#ifndef UNISIM_HARNESS_HPP
#define UNISIM_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "unisim/estimators.hpp"
#include "unisim/federated.hpp"
#include "unisim/problems.hpp"
#include "unisim/theory.hpp"

namespace unisim {

enum class StepMode { auto_thm1, auto_thm2, auto_thm5, manual };

struct RunConfig {
  std::string problem = "lsq:1,10,1,16,10,0";  // lsq:<seed>,<d>,<m>,<n>,<cond>,<het> | sinpl | sinpl:<d>
  std::string method = "gd";
  std::string framework = "none";  // none | dc | diana:<alpha|auto>
  std::string compressor = "identity";
  StepMode step_mode = StepMode::auto_thm1;
  double manual_eta = 0.0;
  double epsilon = 1e-2;
  long long max_iters = 1000000;
  uint64_t seed = 1;
  long long record_every = 1;
  double x0 = 1.0;  // every coordinate of the start point
  std::string output;
};

// flat key=value lines; '#' starts a comment
RunConfig parse_config_file(const std::string& path);
void apply_override(RunConfig& cfg, const std::string& kv);

FiniteSumObjective make_problem(const std::string& spec);

struct IterationRecord {
  long long k = 0;
  double f_gap = 0, grad_norm = 0, sigma_sq = 0, eta_k = 0;
  long long floats_sent = 0;  // cumulative
};

struct RunResult {
  std::vector<IterationRecord> records;
  long long stop_k = -1;  // first k meeting the target metric, -1 if none
  bool diverged = false;
  bool pl_metric = false;  // true when the target is f_gap, else grad norm
  double eta = 0;          // constant (or initial) stepsize used
  double K_theory_raw = 0; // 0 in manual mode
  bool empirical = false;  // certificate includes fitted constants
  double min_grad_norm = 0;
  double final_f_gap = 0;
};

RunResult run(const RunConfig& cfg);

struct BoundReport {
  double K_theory = 0;
  long long k_empirical = -1;
  bool pass = false;
  bool empirical = false;
};

// requires an auto stepsize mode; pass iff the run hit the target within the
// theoretical iteration count
BoundReport verify_bound(const RunConfig& cfg);

void export_csv(const std::vector<IterationRecord>& records,
                const std::string& path);

struct SweepCell {
  std::string method, framework, compressor, csv_path;
  long long stop_k = -1;
  bool diverged = false;
  double final_f_gap = 0, final_grad_norm = 0;
};

// cartesian grid; one CSV per cell plus summary.csv in out_dir; the summary
// is written in grid order so results are independent of the thread count
std::vector<SweepCell> sweep(const RunConfig& base,
                             const std::vector<std::string>& methods,
                             const std::vector<std::string>& frameworks,
                             const std::vector<std::string>& compressors,
                             const std::string& out_dir, int threads);

}  // namespace unisim

#endif
