#pragma once

#include "ptrack/guidance.hpp"
#include "ptrack/harness.hpp"
#include "ptrack/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ptrack {

inline constexpr const char* kSummarySchema = "ptrack_summary_v1";

/// Library version compiled in by the build.
const char* code_version();

/// I/O failure with the offending path.
class IoError : public std::runtime_error {
public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what) {}
};

// CSV writers. Each writes a header line and one row per record; numbers
// use a fixed "%.12g" rendering so output is byte-stable.
void write_measurements_csv(std::ostream& os, const TrialLog& log);  // step,target,bearing,is_clutter
void write_estimates_csv(std::ostream& os, const TrialLog& log);     // step,target,est_x,est_y,cov_trace,ess,resampled
void write_controller_csv(std::ostream& os, const TrialLog& log);    // step,chosen_x,chosen_y,best_trace_sum,candidates,trace_<j>...
void write_truth_csv(std::ostream& os, const TrialLog& log);         // step,target,x,y,vx,vy,plan_feasible
void write_rmse_csv(std::ostream& os, const RmseSeries& series);     // step,target,rmse ("mean" rows for the average)
void write_trials_csv(std::ostream& os, const std::vector<TrialLog>& logs, int first_step);  // trial,seed,score

/// Planned means, covariance traces, controls and faces, one row per
/// (target, step).
void write_plan_csv(std::ostream& os, const std::vector<GuidancePlan>& plans);

/// Summary document: schema, code version, config hash, mode, seeds and
/// per-trial scores. No timings, so reruns are byte-identical.
std::string summary_json(const ScenarioConfig& config, const std::string& command,
                         const std::vector<TrialLog>& logs, const RmseSeries* rmse, int first_step = 20);

/// Writes `content` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);

/// Writes the file set of a single trial into `dir`.
void emit_trial(const std::filesystem::path& dir, const ScenarioConfig& config, const std::string& command,
                const TrialLog& log, bool csv);

/// Writes rmse.csv, trials.csv and the summary into `dir`.
void emit_monte_carlo(const std::filesystem::path& dir, const ScenarioConfig& config, const std::string& command,
                      const MonteCarloResult& result, bool csv);

}  // namespace ptrack
