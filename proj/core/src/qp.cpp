#include "fovnav/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace fovnav {

namespace {

// Stacked inequality system G z <= h covering A_in rows and finite bounds.
struct Inequalities {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

Inequalities stack_inequalities(const QpProblem& qp) {
  const int n = qp.num_variables();
  std::vector<std::pair<int, double>> upper, lower;
  if (qp.ub)
    for (int i = 0; i < n; ++i)
      if (std::isfinite((*qp.ub)[i])) upper.emplace_back(i, (*qp.ub)[i]);
  if (qp.lb)
    for (int i = 0; i < n; ++i)
      if (std::isfinite((*qp.lb)[i])) lower.emplace_back(i, (*qp.lb)[i]);

  const int m_in = static_cast<int>(qp.A_in.rows());
  const int m = m_in + static_cast<int>(upper.size() + lower.size());
  Inequalities ineq{Eigen::MatrixXd::Zero(m, n), Eigen::VectorXd::Zero(m)};
  if (m_in > 0) {
    ineq.G.topRows(m_in) = qp.A_in;
    ineq.h.head(m_in) = qp.b_in;
  }
  int r = m_in;
  for (auto [i, v] : upper) {
    ineq.G(r, i) = 1.0;
    ineq.h[r++] = v;
  }
  for (auto [i, v] : lower) {
    ineq.G(r, i) = -1.0;
    ineq.h[r++] = -v;
  }
  return ineq;
}

struct IpmResult {
  Eigen::VectorXd y;
  Eigen::VectorXd lambda;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

double step_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

// Mehrotra predictor-corrector for min 0.5 y'Qy + c'y s.t. G y <= h.
IpmResult interior_point(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c, const Eigen::MatrixXd& G,
                         const Eigen::VectorXd& h, const Eigen::VectorXd& y0, double tol, int max_iter) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(h.size());
  IpmResult res;
  res.y = y0;
  if (m == 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Q + 1e-12 * Eigen::MatrixXd::Identity(n, n));
    res.y = ldlt.solve(-c);
    res.lambda.resize(0);
    res.converged = res.y.allFinite();
    res.iterations = 1;
    return res;
  }

  // Starting point: least-squares fit of G y + s = h with s = -lambda, then
  // both shifted into the positive orthant.
  const Eigen::MatrixXd reg = 1e-12 * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd y = Eigen::LDLT<Eigen::MatrixXd>(Q + G.transpose() * G + reg).solve(-c + G.transpose() * h);
  if (!y.allFinite()) y = y0;
  Eigen::VectorXd s = h - G * y;
  Eigen::VectorXd lambda = -s;
  const double shift_s = -s.minCoeff();
  if (shift_s >= 0.0) s.array() += 1.0 + shift_s;
  const double shift_l = -lambda.minCoeff();
  if (shift_l >= 0.0) lambda.array() += 1.0 + shift_l;
  const double scale_d = std::max(1.0, c.lpNorm<Eigen::Infinity>());
  const double scale_p = std::max(1.0, h.lpNorm<Eigen::Infinity>());
  double best_merit = std::numeric_limits<double>::infinity();
  int stall = 0;
  res.lambda = lambda;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd r_d = Q * y + c + G.transpose() * lambda;
    const Eigen::VectorXd r_p = G * y + s - h;
    const double mu = s.dot(lambda) / m;
    const double comp = (s.array() * lambda.array()).maxCoeff();
    res.iterations = it;
    const double rd_inf = r_d.lpNorm<Eigen::Infinity>();
    const double rp_inf = r_p.lpNorm<Eigen::Infinity>();
    if (!y.allFinite() || !s.allFinite() || !lambda.allFinite() || !std::isfinite(mu)) {
      res.diverged = true;
      break;
    }
    const double merit = std::max({rd_inf / scale_d, rp_inf / scale_p, comp});
    if (merit < best_merit) {
      best_merit = merit;
      res.y = y;
      res.lambda = lambda;
      stall = 0;
    } else if (++stall > 10) {
      break;
    }
    if (rd_inf <= tol && rp_inf <= tol && comp <= tol) {
      res.converged = true;
      break;
    }
    if (lambda.lpNorm<Eigen::Infinity>() > 1e13 || s.minCoeff() < 1e-300) {
      res.diverged = lambda.lpNorm<Eigen::Infinity>() > 1e13;
      break;
    }

    const Eigen::VectorXd d = lambda.cwiseQuotient(s);
    const Eigen::MatrixXd M = Q + G.transpose() * d.asDiagonal() * G + reg;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    const bool use_llt = llt.info() == Eigen::Success;
    if (!use_llt) ldlt.compute(M);

    auto newton = [&](const Eigen::VectorXd& r_c, Eigen::VectorXd& dy, Eigen::VectorXd& ds, Eigen::VectorXd& dl) {
      const Eigen::VectorXd rhs =
          -r_d - G.transpose() * ((-r_c + lambda.cwiseProduct(r_p)).cwiseQuotient(s));
      dy = use_llt ? Eigen::VectorXd(llt.solve(rhs)) : Eigen::VectorXd(ldlt.solve(rhs));
      ds = -r_p - G * dy;
      dl = (-r_c - lambda.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Eigen::VectorXd dy, ds, dl;
    const Eigen::VectorXd r_c_aff = s.cwiseProduct(lambda);
    newton(r_c_aff, dy, ds, dl);
    const double a_aff = std::min(step_to_boundary(s, ds), step_to_boundary(lambda, dl));
    const double mu_aff = (s + a_aff * ds).dot(lambda + a_aff * dl) / m;
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    const Eigen::VectorXd r_c = r_c_aff + ds.cwiseProduct(dl) - Eigen::VectorXd::Constant(m, sigma * mu);
    newton(r_c, dy, ds, dl);
    const double a_max = std::min(step_to_boundary(s, ds), step_to_boundary(lambda, dl));
    const double alpha = std::min(1.0, 0.99 * a_max);

    y += alpha * dy;
    s += alpha * ds;
    lambda += alpha * dl;
    res.iterations = it + 1;
  }
  if (res.converged || !std::isfinite(best_merit)) {
    res.y = y;
    res.lambda = lambda;
  }
  return res;
}

// Solves the equality-constrained problem on the constraints the interior
// point iterate identifies as active, with regularized iterative refinement.
std::optional<IpmResult> polish(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c, const Eigen::MatrixXd& G,
                                const Eigen::VectorXd& h, const IpmResult& ipm) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(h.size());
  if (m == 0) return std::nullopt;
  const Eigen::VectorXd s = h - G * ipm.y;
  std::vector<int> active;
  for (int i = 0; i < m; ++i)
    if (ipm.lambda[i] > s[i]) active.push_back(i);
  const int a = static_cast<int>(active.size());
  const double delta = 1e-9;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + a, n + a);
  K.topLeftCorner(n, n) = Q;
  Eigen::VectorXd rhs(n + a);
  rhs.head(n) = -c;
  for (int k = 0; k < a; ++k) {
    K.block(n + k, 0, 1, n) = G.row(active[k]);
    K.block(0, n + k, n, 1) = G.row(active[k]).transpose();
    rhs[n + k] = h[active[k]];
  }
  Eigen::MatrixXd Kreg = K;
  Kreg.topLeftCorner(n, n) += delta * Eigen::MatrixXd::Identity(n, n);
  Kreg.bottomRightCorner(a, a) -= delta * Eigen::MatrixXd::Identity(a, a);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kreg);
  Eigen::VectorXd x = lu.solve(rhs);
  for (int k = 0; k < 5; ++k) x += lu.solve(rhs - K * x);
  if (!x.allFinite()) return std::nullopt;
  IpmResult out;
  out.y = x.head(n);
  out.lambda = Eigen::VectorXd::Zero(m);
  for (int k = 0; k < a; ++k) out.lambda[active[k]] = std::max(0.0, x[n + k]);
  out.iterations = ipm.iterations;
  out.converged = true;
  return out;
}

// Smallest uniform relaxation t >= 0 with G y <= h + t feasible.
double phase_one(const Eigen::MatrixXd& G, const Eigen::VectorXd& h, double tol, int max_iter) {
  const int n = static_cast<int>(G.cols());
  const int m = static_cast<int>(G.rows());
  Eigen::MatrixXd G1 = Eigen::MatrixXd::Zero(m + 1, n + 1);
  G1.topLeftCorner(m, n) = G;
  G1.col(n).head(m).setConstant(-1.0);
  G1(m, n) = -1.0;
  Eigen::VectorXd h1 = Eigen::VectorXd::Zero(m + 1);
  h1.head(m) = h;
  Eigen::MatrixXd Q1 = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Q1.topLeftCorner(n, n) = 1e-10 * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(n + 1);
  c1[n] = 1.0;
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n + 1);
  y0[n] = std::max(0.0, (-h).maxCoeff()) + 1.0;
  const IpmResult r = interior_point(Q1, c1, G1, h1, y0, tol, max_iter);
  const Eigen::VectorXd y = r.y.head(n);
  return std::max(0.0, (G * y - h).maxCoeff());
}

}  // namespace

QpProblem QpProblem::unconstrained(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
  QpProblem qp;
  qp.H = H;
  qp.g = g;
  const auto n = g.size();
  qp.A_eq.resize(0, n);
  qp.b_eq.resize(0);
  qp.A_in.resize(0, n);
  qp.b_in.resize(0);
  return qp;
}

void QpProblem::validate() const {
  const auto n = g.size();
  if (H.rows() != n || H.cols() != n) throw std::invalid_argument("QpProblem: H must be n x n");
  if ((H - H.transpose()).lpNorm<Eigen::Infinity>() > 1e-10) throw std::invalid_argument("QpProblem: H not symmetric");
  if (A_eq.cols() != n || A_eq.rows() != b_eq.size()) throw std::invalid_argument("QpProblem: equality dimensions");
  if (A_in.cols() != n || A_in.rows() != b_in.size()) throw std::invalid_argument("QpProblem: inequality dimensions");
  if (lb && lb->size() != n) throw std::invalid_argument("QpProblem: lb dimension");
  if (ub && ub->size() != n) throw std::invalid_argument("QpProblem: ub dimension");
}

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

KktResiduals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& eq_multipliers,
                           const Eigen::VectorXd& ineq_multipliers) {
  const Inequalities ineq = stack_inequalities(qp);
  KktResiduals r;
  Eigen::VectorXd grad = qp.H * z + qp.g;
  if (qp.A_eq.rows() > 0) grad += qp.A_eq.transpose() * eq_multipliers;
  if (ineq.G.rows() > 0) grad += ineq.G.transpose() * ineq_multipliers;
  r.stationarity = grad.size() > 0 ? grad.lpNorm<Eigen::Infinity>() : 0.0;
  if (qp.A_eq.rows() > 0) r.primal = (qp.A_eq * z - qp.b_eq).lpNorm<Eigen::Infinity>();
  if (ineq.G.rows() > 0) {
    const Eigen::VectorXd slack = ineq.h - ineq.G * z;
    r.primal = std::max(r.primal, std::max(0.0, -slack.minCoeff()));
    r.primal = std::max(r.primal, std::max(0.0, -ineq_multipliers.minCoeff()));
    r.complementarity = (ineq_multipliers.array() * slack.array()).abs().maxCoeff();
  }
  return r;
}

QpSolution solve(const QpProblem& qp, const std::optional<Eigen::VectorXd>& warm_start, const QpSettings& settings) {
  qp.validate();
  const int n = qp.num_variables();
  QpSolution sol;

  Eigen::MatrixXd H = 0.5 * (qp.H + qp.H.transpose());
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, H.lpNorm<Eigen::Infinity>())) {
      H += 1e-9 * Eigen::MatrixXd::Identity(n, n);
      sol.regularized = true;
    }
  }

  // equality elimination z = z_p + N y
  Eigen::VectorXd z_p = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd N = Eigen::MatrixXd::Identity(n, n);
  const int m_eq = static_cast<int>(qp.A_eq.rows());
  if (m_eq > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(qp.A_eq.transpose());
    qr.setThreshold(1e-12);
    const int rank = static_cast<int>(qr.rank());
    const Eigen::MatrixXd Qfull = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    N = Qfull.rightCols(n - rank);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(qp.A_eq);
    z_p = cod.solve(qp.b_eq);
    const double eq_residual = (qp.A_eq * z_p - qp.b_eq).lpNorm<Eigen::Infinity>();
    if (eq_residual > settings.tolerance * std::max(1.0, qp.b_eq.lpNorm<Eigen::Infinity>())) {
      sol.status = QpStatus::infeasible;
      sol.infeasibility = eq_residual;
      sol.z = z_p;
      sol.objective = qp.objective(z_p);
      return sol;
    }
  }

  const Inequalities ineq = stack_inequalities(qp);
  const Eigen::MatrixXd Qr = N.transpose() * H * N;
  const Eigen::VectorXd cr = N.transpose() * (H * z_p + qp.g);
  const Eigen::MatrixXd Gr = ineq.G * N;
  const Eigen::VectorXd hr = ineq.h - ineq.G * z_p;

  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(N.cols());
  if (warm_start && warm_start->size() == n && warm_start->allFinite()) y0 = N.transpose() * (*warm_start - z_p);

  // reduced residuals are driven below a fraction of the tolerance so the
  // original-space residuals land inside it
  const IpmResult ipm = interior_point(Qr, cr, Gr, hr, y0, 0.1 * settings.tolerance, settings.max_iterations);
  sol.iterations = ipm.iterations;

  const auto recover = [&](const IpmResult& r, QpSolution& out) {
    out.z = z_p + N * r.y;
    out.objective = qp.objective(out.z);
    out.ineq_multipliers = r.lambda;
    const Eigen::VectorXd grad = H * out.z + qp.g + (ineq.G.rows() > 0 ? Eigen::VectorXd(ineq.G.transpose() * r.lambda)
                                                                        : Eigen::VectorXd::Zero(n));
    if (m_eq > 0) {
      out.eq_multipliers = qp.A_eq.transpose().colPivHouseholderQr().solve(-grad);
    } else {
      out.eq_multipliers.resize(0);
    }
    out.kkt = kkt_residuals(qp, out.z, out.eq_multipliers, out.ineq_multipliers);
  };
  recover(ipm, sol);
  if (!(ipm.converged && sol.kkt.max() <= settings.tolerance) && !ipm.diverged) {
    if (const auto polished = polish(Qr, cr, Gr, hr, ipm)) {
      QpSolution alt = sol;
      recover(*polished, alt);
      if (alt.kkt.max() < sol.kkt.max() || !std::isfinite(sol.kkt.max())) sol = alt;
    }
  }

  if (sol.kkt.max() <= settings.tolerance) {
    sol.status = QpStatus::optimal;
    return sol;
  }
  sol.status = QpStatus::max_iter;
  if (Gr.rows() > 0) {
    const double relax = phase_one(Gr, hr, 0.1 * settings.tolerance, std::max(50, settings.max_iterations));
    if (relax > settings.tolerance) {
      sol.status = QpStatus::infeasible;
      sol.infeasibility = relax;
    }
  }
  return sol;
}

}  // namespace fovnav
