#pragma once

#include <span>
#include <string>
#include <vector>

#include "wickpde/grid.hpp"

namespace wickpde {

enum class Scheme { BackwardEuler, CrankNicolson };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

/// Discretized parabolic operator: 3-point Laplacian on [0,1] with the given
/// boundary handling, advanced by a theta scheme.  The horizon is exactly
/// steps * dt by construction.
struct OperatorSpec {
  Boundary boundary = Boundary::Dirichlet;
  int J = 3;
  Scheme scheme = Scheme::CrankNicolson;
  double dt = 0.0;
  int steps = 0;

  double theta() const { return scheme == Scheme::BackwardEuler ? 1.0 : 0.5; }
  double horizon() const { return dt * steps; }
  void validate() const;  // J >= 3, dt > 0, steps >= 1
};

/// Growth envelope M(t) = M exp(kappa t), kappa = w + M ||q_0||_inf, from the
/// semigroup estimate ||T_t|| <= M e^{wt} perturbed by the potential's mean
/// coefficient.
struct SemigroupEnvelope {
  double M = 1.0;
  double w = 0.0;
  double q0_inf = 0.0;

  double kappa() const { return w + M * q0_inf; }
  /// M(t)
  double value(double t) const;
  /// Mtilde(t) = integral of M over [0,t]: (M(t) - M)/kappa, with the exact
  /// limit M*t at kappa = 0 (computed via expm1 so the switch is smooth).
  double integral(double t) const;
  void validate() const;  // M >= 1, q0_inf >= 0
};

double envelope_M(const SemigroupEnvelope& env, double t);
double envelope_Mtilde(const SemigroupEnvelope& env, double t);

/// Solver for constant-coefficient tridiagonal systems with equal sub- and
/// super-diagonal entries, optionally with periodic corner coupling
/// (Sherman-Morrison on top of the Thomas factorization).  Factored once,
/// then solved repeatedly.
class TridiagonalSolver {
 public:
  TridiagonalSolver(std::vector<double> diag, double off, bool cyclic);

  void solve_in_place(std::span<double> rhs) const;
  int size() const { return static_cast<int>(diag_.size()); }

 private:
  void factor();
  void thomas_solve(std::span<double> rhs) const;

  std::vector<double> diag_;   // modified pivots after factoring
  std::vector<double> lower_;  // elimination multipliers
  std::vector<double> z_;      // T^{-1} u for the cyclic correction
  double off_ = 0.0;
  double gamma_ = 0.0;
  bool cyclic_ = false;
};

/// One theta-scheme time stepper for (d/dt - A + q) u = f with the implicit
/// matrix factored once; reusable across right-hand sides that share q.
class ThetaScheme {
 public:
  ThetaScheme(const OperatorSpec& op, const GridField& q);

  const OperatorSpec& op() const { return op_; }

  /// Advances one step: u at time t_k together with the effective force
  /// sample for this step (f^{k+1} for BackwardEuler, the endpoint average
  /// for CrankNicolson) to u at t_{k+1}.
  GridField step(const GridField& u, const GridField& f_eff) const;

  /// Effective force sample entering the step k -> k+1.
  GridField effective_force(const Trajectory& f, int k) const;

  /// Full sweep from initial data g with force trajectory f (frames at every
  /// step, f.steps == op.steps).
  Trajectory run(const Trajectory& f, const GridField& g) const;

 private:
  OperatorSpec op_;
  GridField q_;
  TridiagonalSolver solver_;
  int n_ = 0;       // unknowns per step
  int base_ = 0;    // grid index of unknown 0 (1 for Dirichlet, 0 for Periodic)
};

/// theta-scheme solve of (d/dt - A + q) u = f, u(0) = g.
Trajectory solve_deterministic(const OperatorSpec& op, const GridField& q, const Trajectory& f,
                               const GridField& g);

struct Lemma2Item {
  std::string name;
  int n = 0;
  double quadrature = 0.0;
  double reference = 0.0;  // closed form for equalities, bound for inequalities
  double ratio = 0.0;      // quadrature / reference
  bool is_equality = false;
  bool pass = false;
};

struct Lemma2Report {
  bool pass = true;
  double eq_tol = 0.0;
  double ineq_tol = 0.0;
  std::vector<Lemma2Item> items;
};

/// Quadrature check of the envelope integrals: the Mtilde identity, the
/// moment bound on s M(s), the power bounds on M Mtilde^n and s M Mtilde^n
/// for n = 1..n_max, and the exact identity
/// integral(M Mtilde^n) = Mtilde^{n+1}/(n+1).
Lemma2Report verify_lemma2(const SemigroupEnvelope& env, double t, int n_max,
                           double eq_tol = 1e-8, double ineq_tol = 1e-6);

struct Theorem1Report {
  double max_ratio = 0.0;  // max over steps of ||u(t_k)|| / envelope rhs(t_k)
  int argmax_step = 0;
  bool degenerate = false;  // rhs identically zero (and so is u)
  double sup_norm_u = 0.0;
};

/// Solves and compares against the envelope bound
/// ||u(t)|| <= M(t) (||g|| + integral_0^t ||f||) with a trapezoid rule for
/// the force integral.  Requires env.q0_inf to equal max|q| on the grid.
Theorem1Report verify_theorem1_bound(const OperatorSpec& op, const SemigroupEnvelope& env,
                                     const GridField& q, const Trajectory& f,
                                     const GridField& g);

/// Envelope with the sharp discrete stability constants (M, w) = (1, 0) and
/// q0_inf = max|q|.
SemigroupEnvelope make_envelope(const GridField& q);

}  // namespace wickpde
