#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fovnav/config.hpp"
#include "fovnav/simulation.hpp"

namespace fovnav {

inline constexpr std::string_view kTraceSchema = "fovnav-trace/1";
inline constexpr std::string_view kPlotSchema = "fovnav-plot/1";

/// %.17g, with inf/-inf/nan spelled out.
std::string format_double(double value);

/// First line "# schema: fovnav-trace/1", then the header row
/// t,robot_id,x,y,yaw,vx,vy,yaw_rate,plan_id and one block per neighbor:
/// neighbor_id,detected,est_x,est_y,b_sr_min,b_sr_max,b_fov_min.
std::string trace_csv(const SimTrace& trace);
void write_trace_csv(const SimTrace& trace, const std::filesystem::path& path);
/// Inverse of trace_csv for the columns it stores (no plan polylines,
/// ellipsoid shapes or timings).
SimTrace parse_trace_csv(const std::string& text);
SimTrace read_trace_csv(const std::filesystem::path& path);

struct Interval {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
  int count = 0;
};

/// Mean with a two-sided 95% Student-t interval. One sample gives a
/// zero-width interval.
Interval mean_confidence_95(const std::vector<double>& values);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  bool completed = false;
  std::string error;
  Metrics metrics;
  int fallbacks = 0;
  std::string trace_file;
};

struct BatchReport {
  RunConfig config;
  std::vector<TrialResult> trials;
  Interval success_rate;
  Interval pct_neighbors_in_fov;
  Interval makespan;  // over successful trials
  Interval collisions;
  /// Mean plan() wall time per robot count, the form of a runtime table.
  std::vector<std::pair<int, double>> plan_time_ms_by_robots;

  bool all_completed() const;
};

/// Runs config.trials seeded trials (seed + trial index). With an output
/// directory, writes trial_<k>/trace.csv and report.json under it.
BatchReport run_batch(const RunConfig& config, const std::optional<std::filesystem::path>& out_dir);
BatchReport summarize(const RunConfig& config, std::vector<TrialResult> trials);
std::string report_json(const BatchReport& report);

/// poses.csv, fov.csv, ellipsoids.csv and plans.csv for external plotting.
void export_plot_data(const SimTrace& trace, const SensingModel& sensing, const std::filesystem::path& out_dir);

}  // namespace fovnav
