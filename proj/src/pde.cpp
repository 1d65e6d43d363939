#include "wickpde/pde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "wickpde/util.hpp"

namespace wickpde {

std::string scheme_name(Scheme s) {
  return s == Scheme::BackwardEuler ? "backward_euler" : "crank_nicolson";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "backward_euler") return Scheme::BackwardEuler;
  if (name == "crank_nicolson") return Scheme::CrankNicolson;
  throw ValidationError("unknown scheme '" + name +
                        "' (expected backward_euler or crank_nicolson)");
}

void OperatorSpec::validate() const {
  if (J < 3) throw ValidationError("operator needs J >= 3");
  if (dt <= 0) throw ValidationError("operator needs dt > 0");
  if (steps < 1) throw ValidationError("operator needs steps >= 1");
}

double SemigroupEnvelope::value(double t) const { return M * std::exp(kappa() * t); }

double SemigroupEnvelope::integral(double t) const {
  double k = kappa();
  if (k == 0.0) return M * t;
  return M * std::expm1(k * t) / k;
}

void SemigroupEnvelope::validate() const {
  if (M < 1.0) throw ValidationError("envelope needs M >= 1");
  if (q0_inf < 0.0) throw ValidationError("envelope needs q0_inf >= 0");
}

double envelope_M(const SemigroupEnvelope& env, double t) { return env.value(t); }
double envelope_Mtilde(const SemigroupEnvelope& env, double t) { return env.integral(t); }

TridiagonalSolver::TridiagonalSolver(std::vector<double> diag, double off, bool cyclic)
    : diag_(std::move(diag)), off_(off), cyclic_(cyclic) {
  if (size() < (cyclic_ ? 3 : 2))
    throw ValidationError("tridiagonal system needs at least " +
                          std::string(cyclic_ ? "3" : "2") + " unknowns");
  factor();
}

void TridiagonalSolver::factor() {
  const int n = size();
  double scale = 2.0 * std::abs(off_);
  for (double d : diag_) scale = std::max(scale, std::abs(d));
  const double tiny = 1e-14 * scale;
  auto check_pivot = [&](double piv, int i) {
    if (!(std::abs(piv) > tiny))
      throw NumericalError("singular step matrix (pivot " + std::to_string(i) + ")");
  };

  if (cyclic_) {
    // Sherman-Morrison: write the cyclic matrix as T + u v^T with
    // u = (gamma, 0, ..., 0, off), v = (1, 0, ..., 0, off/gamma); T is the
    // corner-free tridiagonal below.
    gamma_ = -diag_[0];
    check_pivot(gamma_, 0);
    diag_[0] -= gamma_;
    diag_[static_cast<std::size_t>(n) - 1] -= off_ * off_ / gamma_;
  }

  lower_.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 1; i < n; ++i) {
    double piv = diag_[static_cast<std::size_t>(i) - 1];
    check_pivot(piv, i - 1);
    lower_[static_cast<std::size_t>(i)] = off_ / piv;
    diag_[static_cast<std::size_t>(i)] -= lower_[static_cast<std::size_t>(i)] * off_;
  }
  check_pivot(diag_.back(), n - 1);

  if (cyclic_) {
    z_.assign(static_cast<std::size_t>(n), 0.0);
    z_.front() = gamma_;
    z_.back() = off_;
    thomas_solve(z_);
    double denom = 1.0 + z_.front() + (off_ / gamma_) * z_.back();
    check_pivot(denom, n);
  }
}

void TridiagonalSolver::thomas_solve(std::span<double> rhs) const {
  const int n = size();
  for (int i = 1; i < n; ++i)
    rhs[static_cast<std::size_t>(i)] -=
        lower_[static_cast<std::size_t>(i)] * rhs[static_cast<std::size_t>(i) - 1];
  rhs[static_cast<std::size_t>(n) - 1] /= diag_[static_cast<std::size_t>(n) - 1];
  for (int i = n - 2; i >= 0; --i)
    rhs[static_cast<std::size_t>(i)] =
        (rhs[static_cast<std::size_t>(i)] - off_ * rhs[static_cast<std::size_t>(i) + 1]) /
        diag_[static_cast<std::size_t>(i)];
}

void TridiagonalSolver::solve_in_place(std::span<double> rhs) const {
  if (static_cast<int>(rhs.size()) != size())
    throw ValidationError("tridiagonal solve: rhs size mismatch");
  thomas_solve(rhs);
  if (cyclic_) {
    double denom = 1.0 + z_.front() + (off_ / gamma_) * z_.back();
    double corr = (rhs.front() + (off_ / gamma_) * rhs.back()) / denom;
    for (std::size_t i = 0; i < z_.size(); ++i) rhs[i] -= corr * z_[i];
  }
}

namespace {

TridiagonalSolver build_step_solver(const OperatorSpec& op, const GridField& q) {
  op.validate();
  if (q.J() != op.J || q.boundary() != op.boundary)
    throw ValidationError("potential grid does not match the operator");
  const bool cyclic = op.boundary == Boundary::Periodic;
  const int n = cyclic ? op.J : op.J - 1;
  const int base = cyclic ? 0 : 1;
  const double h2inv = static_cast<double>(op.J) * op.J;
  const double c = op.theta() * op.dt;
  std::vector<double> diag(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) diag[static_cast<std::size_t>(i)] = 1.0 + c * (2.0 * h2inv + q[base + i]);
  return TridiagonalSolver(std::move(diag), -c * h2inv, cyclic);
}

}  // namespace

ThetaScheme::ThetaScheme(const OperatorSpec& op, const GridField& q)
    : op_(op), q_(q), solver_(build_step_solver(op, q)) {
  const bool cyclic = op_.boundary == Boundary::Periodic;
  n_ = cyclic ? op_.J : op_.J - 1;
  base_ = cyclic ? 0 : 1;
}

GridField ThetaScheme::step(const GridField& u, const GridField& f_eff) const {
  require_same_grid(u, q_, "theta step");
  require_same_grid(f_eff, q_, "theta step force");
  const int J = op_.J;
  const double h2inv = static_cast<double>(J) * J;
  const double ec = (1.0 - op_.theta()) * op_.dt;
  const bool cyclic = op_.boundary == Boundary::Periodic;

  std::vector<double> rhs(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) {
    int j = base_ + i;
    double um = cyclic ? u[(j + J - 1) % J] : u[j - 1];
    double up = cyclic ? u[(j + 1) % J] : u[j + 1];
    double lap = (um - 2.0 * u[j] + up) * h2inv;
    rhs[static_cast<std::size_t>(i)] =
        u[j] + ec * (lap - q_[j] * u[j]) + op_.dt * f_eff[j];
  }
  solver_.solve_in_place(rhs);

  GridField out(J, op_.boundary);
  for (int i = 0; i < n_; ++i) out[base_ + i] = rhs[static_cast<std::size_t>(i)];
  if (cyclic) out[J] = out[0];
  return out;
}

GridField ThetaScheme::effective_force(const Trajectory& f, int k) const {
  if (op_.scheme == Scheme::BackwardEuler) return f.at(k + 1);
  GridField avg = add_fields(f.at(k), 1.0, f.at(k + 1));
  avg.scale(0.5);
  return avg;
}

Trajectory ThetaScheme::run(const Trajectory& f, const GridField& g) const {
  require_same_grid(g, q_, "initial data");
  if (f.steps() != op_.steps || f.dt() != op_.dt)
    throw ValidationError("force trajectory does not match the operator's dt/steps");
  require_same_grid(f.at(0), q_, "force");
  std::vector<GridField> frames;
  frames.reserve(static_cast<std::size_t>(op_.steps) + 1);
  frames.push_back(g);
  for (int k = 0; k < op_.steps; ++k)
    frames.push_back(step(frames.back(), effective_force(f, k)));
  return Trajectory(op_.dt, std::move(frames));
}

Trajectory solve_deterministic(const OperatorSpec& op, const GridField& q, const Trajectory& f,
                               const GridField& g) {
  return ThetaScheme(op, q).run(f, g);
}

namespace {

double composite_simpson(const std::function<double(double)>& f, double a, double b,
                         int panels) {
  double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

double quad(const std::function<double(double)>& f, double a, double b,
            double rel_tol = 1e-10) {
  double prev = composite_simpson(f, a, b, 8);
  for (int panels = 16; panels <= (1 << 20); panels *= 2) {
    double cur = composite_simpson(f, a, b, panels);
    if (std::abs(cur - prev) <= rel_tol * std::max(std::abs(cur), 1e-300)) return cur;
    prev = cur;
  }
  throw NumericalError("quadrature did not converge under panel doubling");
}

}  // namespace

Lemma2Report verify_lemma2(const SemigroupEnvelope& env, double t, int n_max, double eq_tol,
                           double ineq_tol) {
  env.validate();
  if (t <= 0) throw ValidationError("verify_lemma2 needs t > 0");
  if (n_max < 1) throw ValidationError("verify_lemma2 needs n_max >= 1");

  Lemma2Report rep;
  rep.eq_tol = eq_tol;
  rep.ineq_tol = ineq_tol;
  auto M = [&](double s) { return env.value(s); };
  auto Mt = [&](double s) { return env.integral(s); };
  const double mt = env.integral(t);

  auto push = [&](std::string name, int n, double quadrature, double reference,
                  bool is_equality) {
    Lemma2Item item;
    item.name = std::move(name);
    item.n = n;
    item.quadrature = quadrature;
    item.reference = reference;
    item.ratio = reference != 0.0 ? quadrature / reference
                                  : (quadrature == 0.0 ? 0.0
                                                       : std::numeric_limits<double>::infinity());
    item.is_equality = is_equality;
    item.pass = is_equality
                    ? std::abs(quadrature - reference) <=
                          eq_tol * std::max(std::abs(reference), 1e-300)
                    : item.ratio <= 1.0 + ineq_tol;
    rep.pass = rep.pass && item.pass;
    rep.items.push_back(std::move(item));
  };

  for (int n = 0; n <= n_max; ++n) {
    double power_quad = quad([&](double s) { return M(s) * std::pow(Mt(s), n); }, 0.0, t);
    // antiderivative of M Mtilde^n is Mtilde^{n+1}/(n+1) since Mtilde' = M
    push("identity_M_Mtilde_pow", n, power_quad, std::pow(mt, n + 1) / (n + 1), true);
    push("bound_M_Mtilde_pow", n, power_quad, std::pow(mt, n + 1), false);
    double moment_quad = quad([&](double s) { return s * M(s) * std::pow(Mt(s), n); }, 0.0, t);
    push("bound_sM_Mtilde_pow", n, moment_quad, t * std::pow(mt, n + 1), false);
  }
  return rep;
}

Theorem1Report verify_theorem1_bound(const OperatorSpec& op, const SemigroupEnvelope& env,
                                     const GridField& q, const Trajectory& f,
                                     const GridField& g) {
  env.validate();
  double qmax = q.linf_norm();
  if (std::abs(env.q0_inf - qmax) > 1e-12 * std::max(1.0, qmax))
    throw ValidationError("envelope q0_inf does not match max|q| on the grid");

  Trajectory u = solve_deterministic(op, q, f, g);
  Theorem1Report rep;
  bool any_rhs = false;
  double gn = g.l2_norm();
  double force_integral = 0.0;
  double prev_fn = f.at(0).l2_norm();
  for (int k = 0; k <= op.steps; ++k) {
    if (k > 0) {
      double fn = f.at(k).l2_norm();
      force_integral += 0.5 * op.dt * (prev_fn + fn);
      prev_fn = fn;
    }
    double un = u.at(k).l2_norm();
    rep.sup_norm_u = std::max(rep.sup_norm_u, un);
    double denom = env.value(k * op.dt) * (gn + force_integral);
    double ratio;
    if (denom > 0.0) {
      any_rhs = true;
      ratio = un / denom;
    } else {
      ratio = un == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.argmax_step = k;
    }
  }
  rep.degenerate = !any_rhs;
  return rep;
}

SemigroupEnvelope make_envelope(const GridField& q) {
  return SemigroupEnvelope{1.0, 0.0, q.linf_norm()};
}

}  // namespace wickpde
