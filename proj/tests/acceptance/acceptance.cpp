#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fovnav/cbf.hpp"
#include "fovnav/config.hpp"
#include "fovnav/io.hpp"
#include "fovnav/particle_filter.hpp"
#include "fovnav/planner.hpp"
#include "fovnav/qp.hpp"
#include "fovnav/simulation.hpp"
#include "fovnav/spline.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fovnav;

namespace {

constexpr double kPi = std::numbers::pi;

struct Check {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void report(int id, const std::string& title, const Check& c) {
  std::printf("criterion %d: %s  %s (%s)\n", id, c.pass ? "PASS" : "FAIL", title.c_str(), c.detail.c_str());
  std::fflush(stdout);
}

class Batches {
 public:
  Batches(fs::path config_dir, fs::path out_dir) : config_dir_(std::move(config_dir)), out_dir_(std::move(out_dir)) {}

  const BatchReport& get(const std::string& name) {
    for (const auto& [n, r] : cache_)
      if (n == name) return r;
    const RunConfig cfg = load_config(config_dir_ / (name + ".yaml"));
    std::fprintf(stderr, "running %s (%d trials)\n", name.c_str(), cfg.trials);
    cache_.emplace_back(name, run_batch(cfg, out_dir_ / name));
    return cache_.back().second;
  }

 private:
  fs::path config_dir_, out_dir_;
  std::vector<std::pair<std::string, BatchReport>> cache_;
};

double plan_time_for(const BatchReport& rep) {
  return rep.plan_time_ms_by_robots.empty() ? std::nan("") : rep.plan_time_ms_by_robots.front().second;
}

// Property suite --------------------------------------------------------

struct Property {
  std::string name;
  std::function<Check()> run;
};

Check bernstein_property() {
  double worst = 0.0;
  for (int h = 0; h <= 7; ++h) {
    for (int i = 0; i <= 200; ++i) {
      const double t = 0.5 * i / 200.0;
      double sum = 0.0;
      for (int v = 0; v <= h; ++v) sum += bernstein_basis(h, v, t, 0.5);
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    for (int v = 0; v <= h; ++v) {
      worst = std::max(worst, std::abs(bernstein_basis(h, v, 0.0, 0.5) - (v == 0 ? 1.0 : 0.0)));
      worst = std::max(worst, std::abs(bernstein_basis(h, v, 0.5, 0.5) - (v == h ? 1.0 : 0.0)));
    }
  }
  return {worst <= 1e-12, fmt("max error %.3g", worst)};
}

double junction_residual(const Plan& p, int max_order) {
  const auto& pieces = p.spline.pieces();
  double worst = 0.0;
  for (std::size_t j = 0; j + 1 < pieces.size(); ++j)
    for (int order = 0; order <= max_order; ++order)
      worst = std::max(worst, (pieces[j].eval(pieces[j].duration(), order) - pieces[j + 1].eval(0.0, order))
                                  .cwiseAbs()
                                  .maxCoeff());
  return worst;
}

Check continuity_property(const fs::path& config_dir) {
  const RunConfig cfg = load_config(config_dir / "circle4.yaml");
  const Scenario sc = cfg.build_scenario(cfg.seed);
  const RobotConfig rc = cfg.robot_config(sc);
  World w = initialize(sc, rc);
  SimTrace trace;
  double worst = 0.0;
  long plans = 0;
  const int steps = static_cast<int>(std::llround(sc.sim.max_time / sc.sim.replan_period));
  for (int k = 0; k < steps; ++k) {
    w = step(w, sc, rc, trace);
    for (const auto& r : w.robots) {
      worst = std::max(worst, junction_residual(*r.last_plan, cfg.planner.continuity));
      ++plans;
    }
    bool done = true;
    for (int i = 0; i < sc.size(); ++i)
      done = done && (w.robots[i].state.position - sc.robots[i].goal.head<2>()).norm() <= sc.sim.goal_area_radius;
    if (done) break;
  }
  return {worst <= 1e-9, fmt("%.0f plans", static_cast<double>(plans)) + fmt(", max residual %.3g", worst)};
}

Check gradient_property() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> P(-3.0, 3.0), Y(-kPi, kPi), V(-1.5, 1.5);
  double worst = 0.0;
  int branches = 0;
  for (double fov : {2.0 * kPi / 3.0, kPi, 1.5 * kPi, 2.0 * kPi}) {
    const SensingModel sm{fov, 8.0, 0.5};
    for (BarrierKind kind : barrier_rows(sm)) {
      ++branches;
      for (int i = 0; i < 1000; ++i) {
        RobotState s;
        s.position = {P(rng), P(rng)};
        s.yaw = Y(rng);
        s.velocity = {V(rng), V(rng)};
        s.yaw_rate = V(rng);
        Eigen::Vector2d nb(P(rng), P(rng));
        if (kind == BarrierKind::fov_single && fov > kPi && std::abs(body_frame(nb - s.position, s.yaw).y()) < 1e-3)
          nb.y() += 0.01;
        const auto row = hocbf_row(s, nb, sm, CbfParams{1.3, 0.7, 0}, kind);
        if (!row) return {false, "missing row"};
        const Eigen::VectorXd fd = oracle::gradient(
            [&](const Eigen::VectorXd& z) { return barrier_value(kind, z.head<2>(), z[2], nb, sm); }, s.output(), 1e-6);
        worst = std::max(worst, (row->a_u - fd).norm() / std::max(1.0, fd.norm()));
      }
    }
  }
  return {worst <= 1e-5, fmt("%.0f branches", branches) + fmt(", max rel error %.3g", worst)};
}

Check drift_property() {
  // rollouts are plans for random situations; the barrier is evaluated along them
  PlannerParams pp;
  const CbfParams cp = pp.cbf;
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> P(-3.0, 3.0), V(-1.0, 1.0), Y(-kPi, kPi), T(0.02, 1.48);
  double worst = 0.0;
  int samples = 0;
  for (double fov : {2.0 * kPi / 3.0, kPi, 1.5 * kPi}) {
    pp.sensing.fov = fov;
    for (int trial = 0; trial < 20; ++trial) {
      RobotState s;
      s.velocity = {V(rng), V(rng)};
      s.yaw = Y(rng);
      s.yaw_rate = V(rng);
      Eigen::Vector2d nb(P(rng), P(rng));
      if (nb.norm() < 1.0) nb = nb.normalized() * 1.5;
      const Plan p = plan(s, std::nullopt, {{1, nb, nb.norm() - 0.3}}, {P(rng), P(rng), Y(rng)}, pp);
      for (BarrierKind kind : barrier_rows(pp.sensing)) {
        for (int k = 0; k < 10; ++k) {
          const double t = T(rng);
          const auto b_at = [&](double tt) {
            const Eigen::Vector3d y = p.output(tt);
            return barrier_value(kind, y.head<2>(), y[2], nb, pp.sensing);
          };
          if (kind == BarrierKind::fov_single && fov > kPi) {
            const Eigen::Vector3d y = p.output(t);
            if (std::abs(body_frame(nb - y.head<2>(), y[2]).y()) < 0.05) continue;
          }
          const RobotState st = p.state_at(t);
          const auto row = hocbf_row(st, nb, pp.sensing, cp, kind);
          const double b = row->barrier_value;
          const double lf = row->a_u.dot(st.rates());
          const double reconstructed = row->residual(p.control(t)) - (cp.gamma1 + cp.gamma2) * lf - cp.gamma1 * cp.gamma2 * b;
          const double numeric = oracle::second_difference(b_at, t, 1e-4);
          worst = std::max(worst, std::abs(reconstructed - numeric) / std::max(1.0, std::abs(numeric)));
          ++samples;
        }
      }
    }
  }
  return {worst <= 1e-3, fmt("%.0f samples", samples) + fmt(", max rel error %.3g", worst)};
}

Check qp_property() {
  double worst_kkt = 0.0;
  int not_optimal = 0;
  for (const QpProblem& qp : oracle::qp_regression_set()) {
    const QpSolution sol = solve(qp);
    if (sol.status != QpStatus::optimal) ++not_optimal;
    worst_kkt = std::max(worst_kkt, sol.kkt.max());
  }
  double worst_obj = 0.0;
  for (const QpProblem& qp : oracle::small_bounded_set(40)) {
    const auto [A, b] = oracle::as_inequalities(qp);
    const auto best = oracle::enumerate_active_sets(qp.H, qp.g, A, b);
    if (!best) return {false, "enumeration oracle found no KKT point"};
    worst_obj = std::max(worst_obj, std::abs(solve(qp).objective - *best) / std::max(1.0, std::abs(*best)));
  }
  const bool pass = not_optimal == 0 && worst_kkt <= 1e-6 && worst_obj <= 1e-6;
  return {pass, fmt("max KKT %.3g", worst_kkt) + fmt(", max objective gap %.3g", worst_obj) +
                    fmt(", non-optimal %.0f", not_optimal)};
}

// Two robots passing head-on with noise disabled.
SimTrace head_on(double yaw0) {
  Scenario sc;
  sc.kind = InstanceKind::custom;
  RobotSpec a, b;
  a.start.position = {-3.0, 0.0};
  a.start.yaw = yaw0;
  a.goal = {3.0, 0.0, 0.0};
  b.start.position = {3.0, 0.05};
  b.start.yaw = kPi;
  b.goal = {-3.0, 0.0, kPi};
  sc.robots = {a, b};
  sc.workspace = Eigen::AlignedBox2d(Eigen::Vector2d(-6.0, -6.0), Eigen::Vector2d(6.0, 6.0));
  sc.sim.output_noise = 0.0;
  sc.sim.velocity_noise = 0.0;
  sc.sim.measurement_noise = false;
  sc.sim.max_time = 30.0;
  RobotConfig rc;
  rc.planner.sensing = SensingModel{2.0 * kPi / 3.0, 12.0, 1.0};
  rc.planner.cbf = CbfParams{5.0, 5.0, 0};
  rc.planner.hocbf_samples = 5;
  rc.filter.workspace = sc.workspace;
  return run(sc, rc);
}

Check invariance_property() {
  const SimTrace t = head_on(0.0);
  double min_sr = 1e300, min_fov = 1e300;
  for (const auto& s : t.steps)
    for (const auto& r : s.robots)
      for (const auto& n : r.neighbors) {
        min_sr = std::min({min_sr, n.b_sr_min, n.b_sr_max});
        min_fov = std::min(min_fov, n.b_fov_min);
      }
  const bool safe = min_sr >= -1e-3 && min_fov >= -1e-3;

  const SimTrace rec = head_on(2.0);
  std::vector<double> fov0;
  for (const auto& s : rec.steps) fov0.push_back(s.robots[0].neighbors[0].b_fov_min);
  std::optional<double> cross;
  for (std::size_t k = 0; k < fov0.size(); ++k)
    if (fov0[k] >= 0.0) {
      cross = rec.steps[k].time;
      break;
    }
  // 0.5 s window means before the crossing may not decrease
  bool trend = fov0.front() < 0.0;
  const std::size_t end = cross ? static_cast<std::size_t>(std::llround(*cross / rec.step)) : fov0.size();
  double prev = -1e300;
  for (std::size_t k = 0; k + 5 <= end + 1 && k + 5 <= fov0.size(); ++k) {
    double m = 0.0;
    for (std::size_t i = k; i < k + 5; ++i) m += fov0[i] / 5.0;
    if (m < prev - 1e-9) trend = false;
    prev = m;
  }
  const bool recovered = cross && *cross <= 5.0 && trend;
  return {safe && recovered, fmt("head-on min b_sr %.4g", min_sr) + fmt(", min b_fov %.4g", min_fov) +
                                 (cross ? fmt(", recovery crossing at %.1f s", *cross) : std::string(", no recovery")) +
                                 (trend ? "" : ", trend decreasing")};
}

Check filter_property() {
  const Eigen::Vector2d truth(2.0, 0.3);
  const SensingModel sm;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    FilterParams fp;
    std::mt19937_64 rng(1000 + seed);
    std::normal_distribution<double> N(0.0, std::sqrt(0.05));
    ParticleSet ps = ParticleSet::uniform(fp, seed);
    for (int k = 0; k < 50; ++k) {
      ps = pf_predict(ps, fp, 0.1);
      ps = pf_update(ps, truth + Eigen::Vector2d(N(rng), N(rng)), RobotState{}, sm, fp);
    }
    worst = std::max(worst, (estimate(ps).mean - truth).norm());
  }
  return {worst < 0.1, fmt("worst error over 15 seeds %.4f m", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Check determinism_property(const fs::path& config_dir, const fs::path& out) {
  RunConfig cfg = load_config(config_dir / "circle4.yaml");
  cfg.trials = 2;
  cfg.sim.max_time = 10.0;
  run_batch(cfg, out / "a");
  run_batch(cfg, out / "b");
  for (int k = 0; k < cfg.trials; ++k) {
    const fs::path rel = fs::path("trial_" + std::to_string(k)) / "trace.csv";
    const std::string a = slurp(out / "a" / rel), b = slurp(out / "b" / rel);
    if (a.empty() || a != b) return {false, "trace " + rel.string() + " differs"};
  }
  return {true, "2 trials byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string config_dir = FOVNAV_CONFIG_DIR;
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  app.add_option("--configs", config_dir, "Directory with the shipped configs");
  app.add_option("--out", out_dir, "Directory for batch outputs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  Batches batches(config_dir, out_dir);
  int failures = 0;
  const auto record = [&](int id, const std::string& title, const Check& c) {
    report(id, title, c);
    if (!c.pass) ++failures;
  };

  if (wanted(1)) {
    const auto& r = batches.get("circle4");
    record(1, "circle-4 FoV mean >= 90%",
           {r.all_completed() && r.pct_neighbors_in_fov.mean >= 90.0,
            fmt("mean %.2f%%", r.pct_neighbors_in_fov.mean) + fmt(" [%.2f, ", r.pct_neighbors_in_fov.low) +
                fmt("%.2f]", r.pct_neighbors_in_fov.high) + fmt(", success %.2f", r.success_rate.mean)});
  }
  if (wanted(2)) {
    const auto& two = batches.get("circle4");
    const auto& one = batches.get("circle4_kr1");
    const double gap = two.pct_neighbors_in_fov.mean - one.pct_neighbors_in_fov.mean;
    record(2, "K_r=1 FoV at least 2 points below K_r=2",
           {gap >= 2.0, fmt("K_r=2 %.2f%%", two.pct_neighbors_in_fov.mean) +
                            fmt(", K_r=1 %.2f%%", one.pct_neighbors_in_fov.mean) + fmt(", gap %.2f", gap)});
  }
  if (wanted(3)) {
    const auto& r = batches.get("circle8");
    record(3, "circle-8 FoV mean >= 55%",
           {r.all_completed() && r.pct_neighbors_in_fov.mean >= 55.0,
            fmt("mean %.2f%%", r.pct_neighbors_in_fov.mean) + fmt(", success %.2f", r.success_rate.mean)});
  }
  if (wanted(4)) {
    const auto& r = batches.get("formation4");
    record(4, "formation-4 success >= 80% and FoV >= 60%",
           {r.all_completed() && r.success_rate.mean >= 0.8 && r.pct_neighbors_in_fov.mean >= 60.0,
            fmt("success %.2f", r.success_rate.mean) + fmt(", FoV %.2f%%", r.pct_neighbors_in_fov.mean)});
  }
  if (wanted(5)) {
    const auto& r = batches.get("circle4_delay");
    record(5, "circle-4 with 0.1 s delay: all succeed and FoV >= 75%",
           {r.all_completed() && r.success_rate.mean == 1.0 && r.pct_neighbors_in_fov.mean >= 75.0,
            fmt("success %.2f", r.success_rate.mean) + fmt(", FoV %.2f%%", r.pct_neighbors_in_fov.mean)});
  }
  if (wanted(6)) {
    const double ms = plan_time_for(batches.get("circle4"));
    record(6, "circle-4 mean plan time <= 100 ms", {ms <= 100.0, fmt("mean %.3f ms", ms)});
  }
  if (wanted(7)) {
    const fs::path cdir = config_dir;
    const std::vector<Property> props{
        {"bernstein partition and endpoints", bernstein_property},
        {"junction continuity on emitted plans", [&] { return continuity_property(cdir); }},
        {"barrier gradients vs finite differences", gradient_property},
        {"drift reconstruction vs second derivative", drift_property},
        {"qp KKT and enumeration oracle", qp_property},
        {"forward invariance and recovery", invariance_property},
        {"particle filter convergence", filter_property},
        {"determinism", [&] { return determinism_property(cdir, fs::path(out_dir) / "determinism"); }},
    };
    int failed = 0;
    std::string failed_names;
    for (const auto& p : props) {
      const Check c = p.run();
      std::printf("  property %-44s %s  %s\n", p.name.c_str(), c.pass ? "PASS" : "FAIL", c.detail.c_str());
      std::fflush(stdout);
      if (!c.pass) {
        ++failed;
        failed_names += (failed_names.empty() ? "" : "; ") + p.name;
      }
    }
    record(7, "property suite with zero failures",
           {failed == 0, fmt("%.0f of ", static_cast<double>(props.size() - failed)) +
                             fmt("%.0f passed", static_cast<double>(props.size())) +
                             (failed ? ", failed: " + failed_names : std::string())});
  }
  return failures == 0 ? 0 : 1;
}
