#include "fovnav/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fovnav/particle_filter.hpp"

namespace fovnav {

namespace {

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

Eigen::MatrixXd vstack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), std::max(top.cols(), bottom.cols()));
  if (top.rows() > 0) out.topRows(top.rows()) = top;
  if (bottom.rows() > 0) out.bottomRows(bottom.rows()) = bottom;
  return out;
}

Eigen::VectorXd vstack(const Eigen::VectorXd& top, const Eigen::VectorXd& bottom) {
  Eigen::VectorXd out(top.size() + bottom.size());
  out << top, bottom;
  return out;
}

// Accumulates rows of A x <= b.
class RowBuilder {
 public:
  explicit RowBuilder(int cols) : cols_(cols) {}
  void add(const Eigen::RowVectorXd& row, double bound) {
    rows_.push_back(row);
    bounds_.push_back(bound);
  }
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows_.size()), cols_);
    for (std::size_t i = 0; i < rows_.size(); ++i) A.row(static_cast<Eigen::Index>(i)) = rows_[i];
    return A;
  }
  Eigen::VectorXd vector() const {
    return Eigen::Map<const Eigen::VectorXd>(bounds_.data(), static_cast<Eigen::Index>(bounds_.size()));
  }

 private:
  int cols_;
  std::vector<Eigen::RowVectorXd> rows_;
  std::vector<double> bounds_;
};

// Values of derivative orders 0..order at t = 0, one column per order.
Eigen::MatrixXd initial_targets(const RobotState& state, const std::optional<Eigen::MatrixXd>& hint, int order) {
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(3, order + 1);
  targets.col(0) = state.output();
  if (order >= 1) targets.col(1) = state.rates();
  for (int j = 2; j <= order; ++j)
    if (hint && hint->cols() > j - 2 && hint->rows() == 3) targets.col(j) = hint->col(j - 2);
  return targets;
}

// Control points of the first piece fixed by the initial conditions.
std::vector<Eigen::Vector3d> pinned_points(const SplineShape& shape, const Eigen::MatrixXd& targets) {
  std::vector<Eigen::Vector3d> pts;
  for (int j = 0; j < targets.cols(); ++j) {
    const Eigen::VectorXd w = bezier_derivative_weights(shape.degree, shape.durations[0], 0.0, j);
    Eigen::Vector3d rest = targets.col(j);
    for (int v = 0; v < j; ++v) rest -= w[v] * pts[v];
    pts.push_back(rest / w[j]);
  }
  return pts;
}

struct Equalities {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

Equalities plan_equalities(const SplineShape& shape, const Eigen::MatrixXd& targets, int continuity, int cols) {
  const int nv = shape.num_variables();
  const LinearEqualities cont = continuity_system(shape, continuity);
  const int init_rows = static_cast<int>(targets.cols()) * shape.dim;
  Equalities eq{Eigen::MatrixXd::Zero(init_rows + cont.A.rows(), cols), Eigen::VectorXd::Zero(init_rows + cont.A.rows())};
  for (int j = 0; j < targets.cols(); ++j) {
    eq.A.block(j * shape.dim, 0, shape.dim, nv) = evaluation_matrix(shape, 0.0, j);
    eq.b.segment(j * shape.dim, shape.dim) = targets.col(j);
  }
  if (cont.A.rows() > 0) {
    eq.A.block(init_rows, 0, cont.A.rows(), nv) = cont.A;
    eq.b.segment(init_rows, cont.A.rows()) = cont.b;
  }
  return eq;
}

// Sampled velocity and acceleration boxes. Samples whose value is pinned by
// the initial conditions are skipped.
void add_limit_rows(RowBuilder& rows, const SplineShape& shape, const PlannerParams& params, int cols) {
  const int nv = shape.num_variables();
  const int K = params.num_samples();
  for (int k = 0; k < K; ++k) {
    const double t = std::min(k * params.sample_interval, shape.total_duration());
    for (int order : {1, 2}) {
      if (k == 0 && order <= params.initial_condition_order) continue;
      const Eigen::MatrixXd E = evaluation_matrix(shape, t, order);
      const Eigen::Vector3d& hi = order == 1 ? params.velocity_max : params.acceleration_max;
      const Eigen::Vector3d& lo = order == 1 ? params.velocity_min : params.acceleration_min;
      for (int d = 0; d < shape.dim; ++d) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cols);
        row.head(nv) = E.row(d);
        rows.add(row, hi[d]);
        rows.add(-row, -lo[d]);
      }
    }
  }
}

// Buffered Voronoi corridor on every free position control point. When the
// pinned points already sit past the buffered plane (estimate noise), the
// plane is moved back to pass through them.
void add_collision_rows(RowBuilder& rows, const SplineShape& shape, const RobotState& state,
                        const std::vector<Eigen::Vector2d>& means, const std::vector<Eigen::Vector3d>& pinned,
                        const PlannerParams& params, int cols) {
  for (const auto& mean : means) {
    const HalfSpace hs = buffer_halfspace(voronoi_halfspace(state.position, mean), params.shape);
    double offset = hs.offset;
    for (const auto& p : pinned) offset = std::min(offset, -hs.normal.dot(p.head<2>()));
    for (int i = 0; i < shape.pieces(); ++i) {
      for (int v = 0; v <= shape.degree; ++v) {
        if (i == 0 && v < static_cast<int>(pinned.size())) continue;
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cols);
        row[shape.index(i, v, 0)] = hs.normal.x();
        row[shape.index(i, v, 1)] = hs.normal.y();
        rows.add(row, -offset);
      }
    }
  }
}

PiecewiseSpline spline_from_solution(const SplineShape& shape, const Eigen::VectorXd& z) {
  return PiecewiseSpline::from_vector(shape, z.head(shape.num_variables()));
}

// Minimum-effort spline that brakes toward zero velocity, used when the MPC
// problem has no feasible solution.
PiecewiseSpline braking_spline(const SplineShape& shape, const Equalities& eq_full, const PlannerParams& params) {
  const int nv = shape.num_variables();
  const QuadraticCost effort = assemble_effort_cost(shape, params);
  Eigen::MatrixXd H = effort.H;
  const int K = params.num_samples();
  for (int k = 1; k < K; ++k) {
    const Eigen::MatrixXd E = evaluation_matrix(shape, std::min(k * params.sample_interval, shape.total_duration()), 1);
    H += 2.0 * 100.0 * E.transpose() * E;
  }
  QpProblem qp = QpProblem::unconstrained(H, Eigen::VectorXd::Zero(nv));
  qp.A_eq = eq_full.A.leftCols(nv);
  qp.b_eq = eq_full.b;

  RowBuilder rows(nv);
  add_limit_rows(rows, shape, params, nv);
  qp.A_in = rows.matrix();
  qp.b_in = rows.vector();
  QpSolution sol = solve(qp, std::nullopt, params.qp);
  if (sol.status != QpStatus::optimal) {
    qp.A_in.resize(0, nv);
    qp.b_in.resize(0);
    sol = solve(qp, std::nullopt, params.qp);
  }
  return PiecewiseSpline::from_vector(shape, sol.z);
}

}  // namespace

int PlannerParams::num_samples() const {
  return static_cast<int>(std::llround(horizon() / sample_interval)) + 1;
}

SplineShape PlannerParams::spline_shape() const {
  SplineShape s;
  s.degree = degree;
  s.dim = 3;
  s.durations.assign(pieces, piece_duration);
  return s;
}

void PlannerParams::validate() const {
  require(pieces >= 1, "planner.pieces must be at least 1");
  require(degree >= 2, "planner.degree must be at least 2 (controls are second derivatives)");
  require(piece_duration > 0.0, "planner.piece_duration must be positive");
  require(continuity >= 0 && continuity <= degree, "planner.continuity must lie in [0, degree]");
  require(initial_condition_order >= 0 && initial_condition_order <= degree,
          "planner.initial_condition_order must lie in [0, degree]");
  require(sample_interval > 0.0, "planner.sample_interval must be positive");
  require(std::abs((num_samples() - 1) * sample_interval - horizon()) <= 1e-9,
          "planner.sample_interval must divide the horizon");
  require(hocbf_samples >= 1 && hocbf_samples <= num_samples(), "planner.hocbf_samples must lie in [1, K]");
  require(sqp_iterations >= 1, "planner.sqp_iterations must be at least 1");
  require(goal_samples >= 1 && goal_samples <= num_samples(), "planner.goal_samples must lie in [1, K]");
  require(goal_weight >= 0.0, "planner.goal_weight must be nonnegative");
  require(static_cast<int>(effort_weights.size()) == continuity,
          "planner.effort_weights needs one weight per derivative order 1..continuity");
  for (double w : effort_weights) require(w >= 0.0, "planner.effort_weights must be nonnegative");
  require(slack_cost > 0.0, "planner.slack_cost must be positive");
  require(slack_decay > 0.0 && slack_decay < 1.0, "planner.slack_decay must lie in (0, 1)");
  require((velocity_min.array() < velocity_max.array()).all(), "planner velocity limits must satisfy min < max");
  require((acceleration_min.array() < acceleration_max.array()).all(),
          "planner acceleration limits must satisfy min < max");
  require(qp.tolerance > 0.0 && qp.max_iterations >= 1, "planner.qp settings must be positive");
  cbf.validate();
  sensing.validate();
  shape.validate();
}

RobotState Plan::state_at(double t) const {
  const Eigen::Vector3d y = output(t);
  const Eigen::Vector3d v = rates(t);
  RobotState s;
  s.position = y.head<2>();
  s.yaw = y[2];
  s.velocity = v.head<2>();
  s.yaw_rate = v[2];
  return s;
}

double Plan::slack_for(int neighbor_id) const {
  for (const auto& s : slacks)
    if (s.id == neighbor_id) return s.slack;
  return 0.0;
}

QuadraticCost assemble_goal_cost(const SplineShape& shape, const Eigen::Vector3d& goal, double reference_yaw,
                                 const PlannerParams& params) {
  const int nv = shape.num_variables();
  QuadraticCost cost{Eigen::MatrixXd::Zero(nv, nv), Eigen::VectorXd::Zero(nv), 0.0};
  Eigen::Vector3d target = goal;
  target[2] = reference_yaw + wrap_angle(goal[2] - reference_yaw);
  const int K = params.num_samples();
  for (int k = K - params.goal_samples; k < K; ++k) {
    const double t = std::min(k * params.sample_interval, shape.total_duration());
    const Eigen::MatrixXd L = evaluation_matrix(shape, t, 0);
    cost.H += 2.0 * params.goal_weight * L.transpose() * L;
    cost.g -= 2.0 * params.goal_weight * L.transpose() * target;
    cost.constant += params.goal_weight * target.squaredNorm();
  }
  return cost;
}

QuadraticCost assemble_effort_cost(const SplineShape& shape, const PlannerParams& params) {
  const int nv = shape.num_variables();
  QuadraticCost cost{Eigen::MatrixXd::Zero(nv, nv), Eigen::VectorXd::Zero(nv), 0.0};
  const int n = shape.points_per_piece();
  for (int i = 0; i < shape.pieces(); ++i) {
    for (std::size_t j = 0; j < params.effort_weights.size(); ++j) {
      const double theta = params.effort_weights[j];
      if (theta == 0.0) continue;
      const Eigen::MatrixXd G = effort_gram(shape.degree, shape.durations[i], static_cast<int>(j) + 1);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int d = 0; d < shape.dim; ++d) cost.H(shape.index(i, a, d), shape.index(i, b, d)) += 2.0 * theta * G(a, b);
    }
  }
  return cost;
}

LinearInequalities sampled_hocbf_constraints(const SplineShape& shape, const std::vector<RobotState>& linearization,
                                             const std::vector<Eigen::Vector2d>& neighbor_means,
                                             const PlannerParams& params) {
  const int nv = shape.num_variables();
  const int cols = nv + static_cast<int>(neighbor_means.size());
  RowBuilder rows(cols);
  LinearInequalities out;
  std::vector<Eigen::MatrixXd> control_maps;
  for (std::size_t k = 0; k < linearization.size(); ++k) {
    const double t = std::min(static_cast<double>(k) * params.sample_interval, shape.total_duration());
    control_maps.push_back(evaluation_matrix(shape, t, 2));
  }
  for (std::size_t j = 0; j < neighbor_means.size(); ++j) {
    for (std::size_t k = 0; k < linearization.size(); ++k) {
      for (const HocbfRow& row : hocbf_rows(linearization[k], neighbor_means[j], params.sensing, params.cbf)) {
        Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(cols);
        a.head(nv) = -row.a_u.transpose() * control_maps[k];
        a[nv + static_cast<int>(j)] = -1.0;
        rows.add(a, row.b_const);
        out.tags.push_back({static_cast<int>(j), static_cast<int>(k), row});
      }
    }
  }
  out.A = rows.matrix();
  out.b = rows.vector();
  return out;
}

std::vector<Eigen::Vector2d> predicted_relative_positions(const Plan& previous, const Eigen::Vector2d& neighbor_mean,
                                                          const PlannerParams& params) {
  std::vector<Eigen::Vector2d> out;
  const double horizon = previous.spline.duration();
  for (int k = 0; k < params.hocbf_samples; ++k) {
    const double t = std::min(k * params.sample_interval, horizon);
    out.push_back(neighbor_mean - previous.output(t).head<2>());
  }
  return out;
}

Plan plan(const RobotState& state_in, const std::optional<Eigen::MatrixXd>& derivative_hint,
          const std::vector<NeighborBelief>& neighbors, const Eigen::Vector3d& goal, const PlannerParams& params) {
  const auto start = std::chrono::steady_clock::now();
  params.validate();
  if (!state_in.finite()) throw std::invalid_argument("plan: state must be finite");
  const RobotState state = state_in.normalized();

  const SplineShape shape = params.spline_shape();
  const int nv = shape.num_variables();

  std::vector<NeighborDistance> distances;
  for (const auto& nb : neighbors) distances.push_back({nb.id, nb.distance});
  const std::vector<NeighborPriority> order =
      priority_weights(distances, params.slack_cost, params.slack_decay);
  std::vector<Eigen::Vector2d> means;
  for (const auto& pr : order)
    for (const auto& nb : neighbors)
      if (nb.id == pr.id) {
        means.push_back(nb.mean);
        break;
      }
  const int ns = static_cast<int>(means.size());
  const int cols = nv + ns;

  // cost
  const QuadraticCost effort = assemble_effort_cost(shape, params);
  const QuadraticCost goal_cost = assemble_goal_cost(shape, goal, state.yaw, params);
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Zero(cols, cols);
  qp.H.topLeftCorner(nv, nv) = effort.H + goal_cost.H;
  qp.g = Eigen::VectorXd::Zero(cols);
  qp.g.head(nv) = goal_cost.g;
  for (int j = 0; j < ns; ++j) qp.g[nv + j] = order[j].weight;

  // equalities
  const Eigen::MatrixXd targets = initial_targets(state, derivative_hint, params.initial_condition_order);
  const Equalities eq = plan_equalities(shape, targets, params.continuity, cols);
  qp.A_eq = eq.A;
  qp.b_eq = eq.b;

  // static inequalities
  RowBuilder static_rows(cols);
  add_limit_rows(static_rows, shape, params, cols);
  add_collision_rows(static_rows, shape, state, means, pinned_points(shape, targets), params, cols);
  const Eigen::MatrixXd A_static = static_rows.matrix();
  const Eigen::VectorXd b_static = static_rows.vector();

  Eigen::VectorXd lb = Eigen::VectorXd::Constant(cols, -std::numeric_limits<double>::infinity());
  lb.tail(ns).setZero();
  qp.lb = lb;

  PlanDiagnostics diag;
  std::optional<Eigen::VectorXd> accepted;
  LinearInequalities accepted_cbf;
  std::optional<Plan> previous;

  for (int nu = 0; nu < params.sqp_iterations; ++nu) {
    std::vector<RobotState> linearization{state};
    if (previous) {
      for (int k = 1; k < params.hocbf_samples; ++k) {
        linearization.push_back(previous->state_at(std::min(k * params.sample_interval, params.horizon())));
      }
    }
    LinearInequalities cbf = sampled_hocbf_constraints(shape, linearization, means, params);
    qp.A_in = vstack(A_static, cbf.A);
    qp.b_in = vstack(b_static, cbf.b);
    const QpSolution sol = solve(qp, accepted, params.qp);
    diag.qp_statuses.push_back(sol.status);
    diag.sqp_iterations = nu + 1;
    if (sol.status != QpStatus::optimal) {
      diag.fallback = true;
      diag.note = "qp " + std::string(to_string(sol.status)) + " at sqp iteration " + std::to_string(nu);
      break;
    }
    accepted = sol.z;
    accepted_cbf = std::move(cbf);
    previous = Plan{spline_from_solution(shape, sol.z), {}, {}, {}};
  }

  Plan result{accepted ? spline_from_solution(shape, *accepted) : braking_spline(shape, eq, params), {}, {}, diag};
  if (!accepted) result.diagnostics.braking = true;

  for (int j = 0; j < ns; ++j) {
    result.slacks.push_back({order[j].id, order[j].weight, accepted ? std::max(0.0, (*accepted)[nv + j]) : 0.0});
  }
  if (accepted) {
    const Eigen::VectorXd u_vec = accepted->head(nv);
    for (const auto& tag : accepted_cbf.tags) {
      const double t = std::min(tag.sample * params.sample_interval, params.horizon());
      const Eigen::Vector3d u = evaluation_matrix(shape, t, 2) * u_vec;
      result.hocbf_residuals.push_back(
          {order[tag.neighbor].id, tag.sample, tag.row.kind, tag.row.residual(u), result.slacks[tag.neighbor].slack});
    }
  }
  result.diagnostics.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace fovnav
