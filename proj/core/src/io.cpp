#include "fovnav/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

namespace fovnav {

namespace {

constexpr const char* kNeighborColumns[] = {"neighbor_id", "detected", "est_x", "est_y",
                                            "b_sr_min", "b_sr_max", "b_fov_min"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("trace: bad number '" + s + "'");
  return v;
}

nlohmann::json interval_json(const Interval& iv) {
  return {{"mean", iv.mean}, {"ci95_low", iv.low}, {"ci95_high", iv.high}, {"n", iv.count}};
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string trace_csv(const SimTrace& trace) {
  std::string out = "# schema: " + std::string(kTraceSchema) + "\n";
  std::size_t blocks = 0;
  if (!trace.steps.empty() && !trace.steps.front().robots.empty())
    blocks = trace.steps.front().robots.front().neighbors.size();
  out += "t,robot_id,x,y,yaw,vx,vy,yaw_rate,plan_id";
  for (std::size_t b = 0; b < blocks; ++b)
    for (const char* c : kNeighborColumns) out += std::string(",") + c;
  out += "\n";
  for (const auto& step : trace.steps) {
    for (const auto& r : step.robots) {
      const RobotState& s = r.state;
      out += format_double(step.time) + "," + std::to_string(r.robot_id);
      for (double v : {s.position.x(), s.position.y(), s.yaw, s.velocity.x(), s.velocity.y(), s.yaw_rate})
        out += "," + format_double(v);
      out += "," + std::to_string(r.plan_id);
      for (const auto& nb : r.neighbors) {
        out += "," + std::to_string(nb.neighbor_id) + "," + (nb.detected ? "1" : "0");
        for (double v : {nb.estimate.x(), nb.estimate.y(), nb.b_sr_min, nb.b_sr_max, nb.b_fov_min})
          out += "," + format_double(v);
      }
      out += "\n";
    }
  }
  return out;
}

void write_trace_csv(const SimTrace& trace, const std::filesystem::path& path) { write_file(path, trace_csv(trace)); }

SimTrace parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "# schema: " + std::string(kTraceSchema))
    throw std::runtime_error("trace: missing or unsupported schema line");
  if (!std::getline(in, line)) throw std::runtime_error("trace: missing header");
  const std::size_t columns = split(line, ',').size();
  if (columns < 9 || (columns - 9) % 7 != 0) throw std::runtime_error("trace: malformed header");

  SimTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != columns) throw std::runtime_error("trace: row has " + std::to_string(f.size()) + " fields");
    const double t = parse_double(f[0]);
    if (trace.steps.empty() || trace.steps.back().time != t) trace.steps.push_back({t, {}});
    RobotRecord r;
    r.robot_id = std::stoi(f[1]);
    r.state.position = {parse_double(f[2]), parse_double(f[3])};
    r.state.yaw = parse_double(f[4]);
    r.state.velocity = {parse_double(f[5]), parse_double(f[6])};
    r.state.yaw_rate = parse_double(f[7]);
    r.plan_id = std::stoi(f[8]);
    for (std::size_t c = 9; c < columns; c += 7) {
      NeighborRecord nb;
      nb.neighbor_id = std::stoi(f[c]);
      nb.detected = f[c + 1] == "1";
      nb.estimate = {parse_double(f[c + 2]), parse_double(f[c + 3])};
      nb.b_sr_min = parse_double(f[c + 4]);
      nb.b_sr_max = parse_double(f[c + 5]);
      nb.b_fov_min = parse_double(f[c + 6]);
      r.neighbors.push_back(nb);
    }
    trace.steps.back().robots.push_back(std::move(r));
  }
  if (trace.steps.size() >= 2) trace.step = trace.steps[1].time - trace.steps[0].time;
  return trace;
}

SimTrace read_trace_csv(const std::filesystem::path& path) { return parse_trace_csv(read_file(path)); }

Interval mean_confidence_95(const std::vector<double>& values) {
  Interval iv;
  iv.count = static_cast<int>(values.size());
  if (values.empty()) return iv;
  double sum = 0.0;
  for (double v : values) sum += v;
  iv.mean = sum / iv.count;
  iv.low = iv.high = iv.mean;
  if (iv.count < 2) return iv;
  double ss = 0.0;
  for (double v : values) ss += (v - iv.mean) * (v - iv.mean);
  const double sd = std::sqrt(ss / (iv.count - 1));
  const boost::math::students_t dist(iv.count - 1);
  const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
  const double half = q * sd / std::sqrt(static_cast<double>(iv.count));
  iv.low = iv.mean - half;
  iv.high = iv.mean + half;
  return iv;
}

bool BatchReport::all_completed() const {
  for (const auto& t : trials)
    if (!t.completed) return false;
  return true;
}

BatchReport summarize(const RunConfig& config, std::vector<TrialResult> trials) {
  BatchReport rep;
  rep.config = config;
  rep.trials = std::move(trials);
  std::vector<double> success, pct, makespan, collisions;
  std::map<int, std::pair<double, int>> plan_time;
  const int robots = config.build_scenario(config.seed).size();
  for (const auto& t : rep.trials) {
    if (!t.completed) continue;
    success.push_back(t.metrics.success ? 1.0 : 0.0);
    pct.push_back(t.metrics.pct_neighbors_in_fov);
    collisions.push_back(t.metrics.collision_count);
    if (t.metrics.makespan) makespan.push_back(*t.metrics.makespan);
    auto& acc = plan_time[robots];
    acc.first += t.metrics.mean_plan_time_ms;
    acc.second += 1;
  }
  rep.success_rate = mean_confidence_95(success);
  rep.pct_neighbors_in_fov = mean_confidence_95(pct);
  rep.makespan = mean_confidence_95(makespan);
  rep.collisions = mean_confidence_95(collisions);
  for (const auto& [n, acc] : plan_time) rep.plan_time_ms_by_robots.emplace_back(n, acc.first / acc.second);
  return rep;
}

BatchReport run_batch(const RunConfig& config, const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  if (out_dir) std::filesystem::create_directories(*out_dir);
  std::vector<TrialResult> results;
  for (int k = 0; k < config.trials; ++k) {
    TrialResult tr;
    tr.trial = k;
    tr.seed = config.seed + static_cast<std::uint64_t>(k);
    try {
      const Scenario sc = config.build_scenario(tr.seed);
      const SimTrace trace = run(sc, config.robot_config(sc));
      tr.metrics = evaluate(trace, sc, config.planner.shape);
      tr.fallbacks = trace.fallback_count;
      if (out_dir) {
        const auto dir = *out_dir / ("trial_" + std::to_string(k));
        std::filesystem::create_directories(dir);
        write_trace_csv(trace, dir / "trace.csv");
        tr.trace_file = (std::filesystem::path("trial_" + std::to_string(k)) / "trace.csv").generic_string();
      }
      tr.completed = true;
    } catch (const std::exception& e) {
      tr.error = e.what();
    }
    results.push_back(std::move(tr));
  }
  BatchReport rep = summarize(config, std::move(results));
  if (out_dir) write_file(*out_dir / "report.json", report_json(rep));
  return rep;
}

std::string report_json(const BatchReport& rep) {
  nlohmann::json j;
  j["schema"] = "fovnav-report/1";
  j["instance"] = std::string(to_string(rep.config.scenario.kind));
  j["robots"] = rep.config.build_scenario(rep.config.seed).size();
  j["fov"] = rep.config.planner.sensing.fov;
  j["hocbf_samples"] = rep.config.planner.hocbf_samples;
  j["sample_interval"] = rep.config.planner.sample_interval;
  j["detection_delay"] = rep.config.sim.detection_delay;
  j["trial_count"] = rep.config.trials;
  j["base_seed"] = rep.config.seed;
  j["metrics"] = {{"success_rate", interval_json(rep.success_rate)},
                  {"pct_neighbors_in_fov", interval_json(rep.pct_neighbors_in_fov)},
                  {"makespan_s", interval_json(rep.makespan)},
                  {"collision_count", interval_json(rep.collisions)}};
  nlohmann::json runtime = nlohmann::json::array();
  for (const auto& [n, ms] : rep.plan_time_ms_by_robots) runtime.push_back({{"robots", n}, {"mean_plan_time_ms", ms}});
  j["plan_time"] = runtime;
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : rep.trials) {
    nlohmann::json e = {{"trial", t.trial},
                        {"seed", t.seed},
                        {"completed", t.completed},
                        {"success", t.metrics.success},
                        {"makespan_s", t.metrics.makespan ? nlohmann::json(*t.metrics.makespan) : nlohmann::json()},
                        {"pct_neighbors_in_fov", t.metrics.pct_neighbors_in_fov},
                        {"collision_count", t.metrics.collision_count},
                        {"mean_plan_time_ms", t.metrics.mean_plan_time_ms},
                        {"fallbacks", t.fallbacks},
                        {"trace", t.trace_file}};
    if (!t.error.empty()) e["error"] = t.error;
    trials.push_back(e);
  }
  j["trials"] = trials;
  return j.dump(2) + "\n";
}

void export_plot_data(const SimTrace& trace, const SensingModel& sensing, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  const std::string schema = "# schema: " + std::string(kPlotSchema) + "\n";
  std::string poses = schema + "t,robot_id,x,y,yaw\n";
  std::string fov = schema + "t,robot_id,apex_x,apex_y,left_x,left_y,right_x,right_y\n";
  std::string ell = schema + "t,robot_id,neighbor_id,center_x,center_y,shape_xx,shape_xy,shape_yy\n";
  std::string plans = schema + "t,robot_id,plan_id,k,x,y,yaw\n";
  const double half = std::min(sensing.fov, 2.0 * std::numbers::pi) / 2.0;
  auto row = [](std::initializer_list<double> vals) {
    std::string s;
    for (double v : vals) s += "," + format_double(v);
    return s;
  };
  for (const auto& step : trace.steps) {
    const std::string t = format_double(step.time);
    for (const auto& r : step.robots) {
      const std::string id = std::to_string(r.robot_id);
      const auto& s = r.state;
      poses += t + "," + id + row({s.position.x(), s.position.y(), s.yaw}) + "\n";
      const Eigen::Vector2d left = s.position + sensing.range * Eigen::Vector2d(std::cos(s.yaw + half), std::sin(s.yaw + half));
      const Eigen::Vector2d right = s.position + sensing.range * Eigen::Vector2d(std::cos(s.yaw - half), std::sin(s.yaw - half));
      fov += t + "," + id + row({s.position.x(), s.position.y(), left.x(), left.y(), right.x(), right.y()}) + "\n";
      for (const auto& nb : r.neighbors)
        ell += t + "," + id + "," + std::to_string(nb.neighbor_id) +
               row({nb.estimate.x(), nb.estimate.y(), nb.ellipsoid(0, 0), nb.ellipsoid(0, 1), nb.ellipsoid(1, 1)}) + "\n";
      for (std::size_t k = 0; k < r.plan_polyline.size(); ++k) {
        const auto& p = r.plan_polyline[k];
        plans += t + "," + id + "," + std::to_string(r.plan_id) + "," + std::to_string(k) + row({p.x(), p.y(), p.z()}) + "\n";
      }
    }
  }
  write_file(out_dir / "poses.csv", poses);
  write_file(out_dir / "fov.csv", fov);
  write_file(out_dir / "ellipsoids.csv", ell);
  write_file(out_dir / "plans.csv", plans);
}

}  // namespace fovnav
