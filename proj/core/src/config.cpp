#include "fovnav/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace fovnav {

namespace {

struct Context {
  std::string source;
  std::map<std::string, int> lines;  // dotted key -> 1-based line

  [[noreturn]] void fail(const YAML::Node& node, const std::string& message) const {
    throw ConfigError(source, node.IsDefined() ? node.Mark().line + 1 : 0, message);
  }
};

class Section {
 public:
  Section(const YAML::Node& node, std::string path, Context& ctx) : node_(node), path_(std::move(path)), ctx_(ctx) {
    if (!node_.IsMap()) ctx_.fail(node_, "'" + path_ + "' must be a mapping");
    ctx_.lines[path_] = node_.Mark().line + 1;
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
        ctx_.fail(kv.first, "unknown key '" + key + "' in '" + path_ + "'");
    }
  }

  bool has(const char* key) const { return static_cast<bool>(node_[key]); }

  Section child(const char* key) const { return Section(node_[key], name(key), ctx_); }

  YAML::Node raw(const char* key) const { return node_[key]; }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void get(const char* key, T& out) const {
    const YAML::Node n = node_[key];
    if (!n) return;
    ctx_.lines[name(key)] = n.Mark().line + 1;
    read(n, name(key), out);
  }

  template <typename T>
  void require(const char* key, T& out) const {
    if (!node_[key]) ctx_.fail(node_, "missing required field '" + name(key) + "'");
    get(key, out);
  }

 private:
  template <typename T>
  void read(const YAML::Node& n, const std::string& field, T& out) const {
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      ctx_.fail(n, "field '" + field + "' has an invalid value");
    }
  }

  void read(const YAML::Node& n, const std::string& field, Eigen::Vector3d& out) const {
    std::vector<double> v;
    read(n, field, v);
    if (v.size() != 3) ctx_.fail(n, "field '" + field + "' must be a list of 3 numbers");
    out = Eigen::Vector3d(v[0], v[1], v[2]);
  }

  void read(const YAML::Node& n, const std::string& field, Eigen::Vector2d& out) const {
    std::vector<double> v;
    read(n, field, v);
    if (v.size() != 2) ctx_.fail(n, "field '" + field + "' must be a list of 2 numbers");
    out = Eigen::Vector2d(v[0], v[1]);
  }

  // A scalar means an isotropic matrix; a list of 4 is row-major.
  void read(const YAML::Node& n, const std::string& field, Eigen::Matrix2d& out) const {
    if (n.IsScalar()) {
      double s = 0.0;
      read(n, field, s);
      out = s * Eigen::Matrix2d::Identity();
      return;
    }
    std::vector<double> v;
    read(n, field, v);
    if (v.size() != 4) ctx_.fail(n, "field '" + field + "' must be a number or a list of 4 numbers");
    out << v[0], v[1], v[2], v[3];
  }

  void read(const YAML::Node& n, const std::string& field, InstanceKind& out) const {
    std::string s;
    read(n, field, s);
    try {
      out = instance_kind_from_string(s);
    } catch (const std::invalid_argument&) {
      ctx_.fail(n, "field '" + field + "' must be one of circle, formation, custom");
    }
  }

  YAML::Node node_;
  std::string path_;
  Context& ctx_;
};

void parse_scenario(const Section& s, ScenarioSpec& out, Context& ctx) {
  s.allow({"kind", "robots", "radius", "spacing", "travel", "custom"});
  s.require("kind", out.kind);
  s.get("robots", out.robots);
  s.get("radius", out.radius);
  s.get("spacing", out.spacing);
  s.get("travel", out.travel);
  if (s.has("custom")) {
    const YAML::Node list = s.raw("custom");
    if (!list.IsSequence()) ctx.fail(list, "'scenario.custom' must be a list");
    out.custom.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Section r(list[i], "scenario.custom[" + std::to_string(i) + "]", ctx);
      r.allow({"start", "goal"});
      Eigen::Vector3d start = Eigen::Vector3d::Zero();
      RobotSpec spec;
      r.require("start", start);
      r.require("goal", spec.goal);
      spec.start.position = start.head<2>();
      spec.start.yaw = start[2];
      out.custom.push_back(spec);
    }
    out.robots = static_cast<int>(out.custom.size());
  }
}

void parse_planner(const Section& s, PlannerParams& p) {
  s.allow({"pieces", "degree", "piece_duration", "continuity", "initial_condition_order", "sample_interval",
           "hocbf_samples", "sqp_iterations", "goal_samples", "goal_weight", "effort_weights", "slack_cost",
           "slack_decay", "velocity_max", "velocity_min", "acceleration_max", "acceleration_min", "cbf", "shape",
           "qp"});
  s.get("pieces", p.pieces);
  s.get("degree", p.degree);
  s.get("piece_duration", p.piece_duration);
  s.get("continuity", p.continuity);
  s.get("initial_condition_order", p.initial_condition_order);
  s.get("sample_interval", p.sample_interval);
  s.get("hocbf_samples", p.hocbf_samples);
  s.get("sqp_iterations", p.sqp_iterations);
  s.get("goal_samples", p.goal_samples);
  s.get("goal_weight", p.goal_weight);
  s.get("effort_weights", p.effort_weights);
  s.get("slack_cost", p.slack_cost);
  s.get("slack_decay", p.slack_decay);
  s.get("velocity_max", p.velocity_max);
  s.get("velocity_min", p.velocity_min);
  s.get("acceleration_max", p.acceleration_max);
  s.get("acceleration_min", p.acceleration_min);
  if (s.has("cbf")) {
    const Section c = s.child("cbf");
    c.allow({"gamma1", "gamma2", "mu"});
    c.get("gamma1", p.cbf.gamma1);
    c.get("gamma2", p.cbf.gamma2);
    c.get("mu", p.cbf.mu);
  }
  if (s.has("shape")) {
    const Section c = s.child("shape");
    c.allow({"half_extents"});
    c.get("half_extents", p.shape.half_extents);
  }
  if (s.has("qp")) {
    const Section c = s.child("qp");
    c.allow({"tolerance", "max_iterations"});
    c.get("tolerance", p.qp.tolerance);
    c.get("max_iterations", p.qp.max_iterations);
  }
}

void parse_filter(const Section& s, FilterParams& f) {
  s.allow({"particles", "process_cov", "measurement_cov", "penalty", "resample_threshold", "init_sigma"});
  s.get("particles", f.num_particles);
  s.get("process_cov", f.process_cov);
  s.get("measurement_cov", f.measurement_cov);
  s.get("penalty", f.penalty);
  s.get("resample_threshold", f.resample_threshold);
  s.get("init_sigma", f.init_sigma);
}

void parse_sim(const Section& s, SimParams& m) {
  s.allow({"output_noise", "velocity_noise", "measurement_noise", "detection_noise", "detection_delay",
           "replan_period", "max_time", "settle_time", "goal_area_radius"});
  s.get("output_noise", m.output_noise);
  s.get("velocity_noise", m.velocity_noise);
  s.get("measurement_noise", m.measurement_noise);
  s.get("detection_noise", m.detection_noise);
  s.get("detection_delay", m.detection_delay);
  s.get("replan_period", m.replan_period);
  s.get("max_time", m.max_time);
  s.get("settle_time", m.settle_time);
  s.get("goal_area_radius", m.goal_area_radius);
}

// Line of the most specific recorded key that prefixes the message.
int line_for(const Context& ctx, const std::string& message) {
  int line = 0;
  std::size_t best = 0;
  for (const auto& [key, l] : ctx.lines) {
    if (message.compare(0, key.size(), key) == 0 && key.size() > best &&
        (message.size() == key.size() || message[key.size()] == ' ' || message[key.size()] == '.')) {
      best = key.size();
      line = l;
    }
  }
  return line;
}

void emit_vec(YAML::Emitter& out, const char* key, const Eigen::VectorXd& v) {
  out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v[i];
  out << YAML::EndSeq;
}

void emit_mat(YAML::Emitter& out, const char* key, const Eigen::Matrix2d& m) {
  out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << m(0, 0) << m(0, 1) << m(1, 0) << m(1, 1)
      << YAML::EndSeq;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(source + ":" + (line > 0 ? std::to_string(line) + ":" : std::string()) + " " + message),
      line_(line) {}

void RunConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (output_dir.empty()) throw std::invalid_argument("output_dir must not be empty");
  switch (scenario.kind) {
    case InstanceKind::circle:
      if (scenario.robots < 2) throw std::invalid_argument("scenario.robots must be at least 2 for a circle");
      if (!(scenario.radius > 0.0)) throw std::invalid_argument("scenario.radius must be positive");
      break;
    case InstanceKind::formation:
      if (scenario.robots < 1) throw std::invalid_argument("scenario.robots must be at least 1");
      if (!(scenario.spacing > 0.0)) throw std::invalid_argument("scenario.spacing must be positive");
      break;
    case InstanceKind::custom:
      if (scenario.custom.empty()) throw std::invalid_argument("scenario.custom must list at least one robot");
      break;
  }
  planner.validate();
  filter.validate();
  sim.validate();
  build_scenario(seed).validate(planner.shape);
}

Scenario RunConfig::build_scenario(std::uint64_t trial_seed) const {
  Scenario sc;
  switch (scenario.kind) {
    case InstanceKind::circle: sc = make_circle_instance(scenario.robots, scenario.radius); break;
    case InstanceKind::formation:
      sc = make_formation_instance(scenario.robots, scenario.spacing, scenario.travel);
      break;
    case InstanceKind::custom: {
      sc.kind = InstanceKind::custom;
      sc.robots = scenario.custom;
      Eigen::AlignedBox2d box;
      for (const auto& r : sc.robots) {
        box.extend(r.start.position);
        box.extend(r.goal.head<2>());
      }
      sc.workspace = Eigen::AlignedBox2d(box.min() - Eigen::Vector2d::Constant(3.0),
                                         box.max() + Eigen::Vector2d::Constant(3.0));
      break;
    }
  }
  sc.sim = sim;
  sc.seed = trial_seed;
  return sc;
}

RobotConfig RunConfig::robot_config(const Scenario& sc) const {
  RobotConfig rc{planner, filter};
  rc.filter.workspace = sc.workspace;
  return rc;
}

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config(const std::string& text, const std::string& source) {
  Context ctx{source, {}};
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source, e.mark.line + 1, e.msg);
  }
  if (!root.IsMap()) throw ConfigError(source, 1, "top level must be a mapping");

  RunConfig cfg;
  const Section top(root, "", ctx);
  top.allow({"scenario", "sensing", "planner", "filter", "sim", "trials", "seed", "output_dir"});
  if (!top.has("scenario")) ctx.fail(root, "missing required section 'scenario'");
  if (!top.has("sensing")) ctx.fail(root, "missing required section 'sensing'");
  parse_scenario(top.child("scenario"), cfg.scenario, ctx);
  {
    const Section s = top.child("sensing");
    s.allow({"fov", "range", "safety_distance"});
    s.require("fov", cfg.planner.sensing.fov);
    s.require("range", cfg.planner.sensing.range);
    s.require("safety_distance", cfg.planner.sensing.safety_distance);
  }
  if (top.has("planner")) parse_planner(top.child("planner"), cfg.planner);
  if (top.has("filter")) parse_filter(top.child("filter"), cfg.filter);
  if (top.has("sim")) parse_sim(top.child("sim"), cfg.sim);
  top.get("trials", cfg.trials);
  top.get("seed", cfg.seed);
  top.get("output_dir", cfg.output_dir);

  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(source, line_for(ctx, e.what()), e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string dump_config(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;

  out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << std::string(to_string(c.scenario.kind));
  if (c.scenario.kind == InstanceKind::custom) {
    out << YAML::Key << "custom" << YAML::Value << YAML::BeginSeq;
    for (const auto& r : c.scenario.custom) {
      out << YAML::BeginMap;
      emit_vec(out, "start", r.start.output());
      emit_vec(out, "goal", r.goal);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  } else {
    out << YAML::Key << "robots" << YAML::Value << c.scenario.robots;
    out << YAML::Key << "radius" << YAML::Value << c.scenario.radius;
    out << YAML::Key << "spacing" << YAML::Value << c.scenario.spacing;
    out << YAML::Key << "travel" << YAML::Value << c.scenario.travel;
  }
  out << YAML::EndMap;

  const auto& s = c.planner.sensing;
  out << YAML::Key << "sensing" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "fov" << YAML::Value << s.fov;
  out << YAML::Key << "range" << YAML::Value << s.range;
  out << YAML::Key << "safety_distance" << YAML::Value << s.safety_distance;
  out << YAML::EndMap;

  const auto& p = c.planner;
  out << YAML::Key << "planner" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "pieces" << YAML::Value << p.pieces;
  out << YAML::Key << "degree" << YAML::Value << p.degree;
  out << YAML::Key << "piece_duration" << YAML::Value << p.piece_duration;
  out << YAML::Key << "continuity" << YAML::Value << p.continuity;
  out << YAML::Key << "initial_condition_order" << YAML::Value << p.initial_condition_order;
  out << YAML::Key << "sample_interval" << YAML::Value << p.sample_interval;
  out << YAML::Key << "hocbf_samples" << YAML::Value << p.hocbf_samples;
  out << YAML::Key << "sqp_iterations" << YAML::Value << p.sqp_iterations;
  out << YAML::Key << "goal_samples" << YAML::Value << p.goal_samples;
  out << YAML::Key << "goal_weight" << YAML::Value << p.goal_weight;
  out << YAML::Key << "effort_weights" << YAML::Value << YAML::Flow << p.effort_weights;
  out << YAML::Key << "slack_cost" << YAML::Value << p.slack_cost;
  out << YAML::Key << "slack_decay" << YAML::Value << p.slack_decay;
  emit_vec(out, "velocity_max", p.velocity_max);
  emit_vec(out, "velocity_min", p.velocity_min);
  emit_vec(out, "acceleration_max", p.acceleration_max);
  emit_vec(out, "acceleration_min", p.acceleration_min);
  out << YAML::Key << "cbf" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "gamma1" << YAML::Value << p.cbf.gamma1;
  out << YAML::Key << "gamma2" << YAML::Value << p.cbf.gamma2;
  out << YAML::Key << "mu" << YAML::Value << p.cbf.mu;
  out << YAML::EndMap;
  out << YAML::Key << "shape" << YAML::Value << YAML::BeginMap;
  emit_vec(out, "half_extents", p.shape.half_extents);
  out << YAML::EndMap;
  out << YAML::Key << "qp" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tolerance" << YAML::Value << p.qp.tolerance;
  out << YAML::Key << "max_iterations" << YAML::Value << p.qp.max_iterations;
  out << YAML::EndMap;
  out << YAML::EndMap;

  const auto& f = c.filter;
  out << YAML::Key << "filter" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "particles" << YAML::Value << f.num_particles;
  emit_mat(out, "process_cov", f.process_cov);
  emit_mat(out, "measurement_cov", f.measurement_cov);
  out << YAML::Key << "penalty" << YAML::Value << f.penalty;
  out << YAML::Key << "resample_threshold" << YAML::Value << f.resample_threshold;
  out << YAML::Key << "init_sigma" << YAML::Value << f.init_sigma;
  out << YAML::EndMap;

  const auto& m = c.sim;
  out << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "output_noise" << YAML::Value << m.output_noise;
  out << YAML::Key << "velocity_noise" << YAML::Value << m.velocity_noise;
  out << YAML::Key << "measurement_noise" << YAML::Value << m.measurement_noise;
  out << YAML::Key << "detection_noise" << YAML::Value << m.detection_noise;
  out << YAML::Key << "detection_delay" << YAML::Value << m.detection_delay;
  out << YAML::Key << "replan_period" << YAML::Value << m.replan_period;
  out << YAML::Key << "max_time" << YAML::Value << m.max_time;
  out << YAML::Key << "settle_time" << YAML::Value << m.settle_time;
  out << YAML::Key << "goal_area_radius" << YAML::Value << m.goal_area_radius;
  out << YAML::EndMap;

  out << YAML::Key << "trials" << YAML::Value << c.trials;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config to " + path.string());
  out << dump_config(config);
}

}  // namespace fovnav
