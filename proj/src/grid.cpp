#include "wickpde/grid.hpp"

#include <algorithm>
#include <cmath>

#include "wickpde/util.hpp"

namespace wickpde {

std::string boundary_name(Boundary bc) {
  return bc == Boundary::Dirichlet ? "dirichlet" : "periodic";
}

Boundary boundary_from_name(const std::string& name) {
  if (name == "dirichlet") return Boundary::Dirichlet;
  if (name == "periodic") return Boundary::Periodic;
  throw ValidationError("unknown boundary '" + name + "' (expected dirichlet or periodic)");
}

GridField::GridField(int J, Boundary bc) : bc_(bc) {
  if (J < 1) throw ValidationError("grid needs J >= 1");
  values_.assign(static_cast<std::size_t>(J) + 1, 0.0);
}

GridField GridField::from_values(Boundary bc, std::vector<double> values) {
  if (values.size() < 2) throw ValidationError("grid field needs at least 2 points");
  for (double v : values)
    if (!std::isfinite(v)) throw ValidationError("grid field values must be finite");
  if (bc == Boundary::Dirichlet) {
    if (values.front() != 0.0 || values.back() != 0.0)
      throw ValidationError("dirichlet field must vanish at both endpoints");
  } else if (values.front() != values.back()) {
    throw ValidationError("periodic field must repeat its first value at the last point");
  }
  return GridField(bc, std::move(values));
}

GridField GridField::sample(int J, Boundary bc, const std::function<double(double)>& f) {
  GridField g(J, bc);
  for (int j = 0; j <= J; ++j) g[j] = f(g.x(j));
  if (bc == Boundary::Dirichlet) {
    g[0] = 0.0;
    g[J] = 0.0;
  } else {
    g[J] = g[0];
  }
  return g;
}

double GridField::l2_norm_sq() const {
  // Periodic grids carry x=1 as a duplicate of x=0; count it once.
  int upto = bc_ == Boundary::Periodic ? J() : J() + 1;
  double s = 0.0;
  for (int j = 0; j < upto; ++j) s += values_[static_cast<std::size_t>(j)] *
                                      values_[static_cast<std::size_t>(j)];
  return h() * s;
}

double GridField::l2_norm() const { return std::sqrt(l2_norm_sq()); }

double GridField::linf_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

GridField& GridField::axpy(double a, const GridField& other) {
  require_same_grid(*this, other, "axpy");
  for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += a * other.values_[j];
  return *this;
}

GridField& GridField::scale(double a) {
  for (double& v : values_) v *= a;
  return *this;
}

GridField mul_pointwise(const GridField& a, const GridField& b) {
  require_same_grid(a, b, "pointwise product");
  GridField out(a.J(), a.boundary());
  for (int j = 0; j <= a.J(); ++j) out[j] = a[j] * b[j];
  return out;
}

GridField add_fields(const GridField& a, double coef_b, const GridField& b) {
  GridField out = a;
  out.axpy(coef_b, b);
  return out;
}

void require_same_grid(const GridField& a, const GridField& b, const char* what) {
  if (a.J() != b.J())
    throw ValidationError(std::string(what) + ": grid sizes differ (" + std::to_string(a.J()) +
                          " vs " + std::to_string(b.J()) + ")");
  if (a.boundary() != b.boundary())
    throw ValidationError(std::string(what) + ": boundary tags differ");
}

Trajectory::Trajectory(double dt, std::vector<GridField> frames) : dt_(dt), frames_(std::move(frames)) {
  if (dt_ <= 0) throw ValidationError("trajectory needs dt > 0");
  if (frames_.empty()) throw ValidationError("trajectory needs at least the t=0 frame");
  for (const auto& f : frames_) require_same_grid(frames_.front(), f, "trajectory frames");
}

Trajectory Trajectory::constant(double dt, int steps, const GridField& f) {
  if (steps < 0) throw ValidationError("trajectory needs steps >= 0");
  return Trajectory(dt, std::vector<GridField>(static_cast<std::size_t>(steps) + 1, f));
}

Trajectory Trajectory::sample(int J, Boundary bc, double dt, int steps,
                              const std::function<double(double, double)>& f) {
  if (steps < 0) throw ValidationError("trajectory needs steps >= 0");
  std::vector<GridField> frames;
  frames.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    double t = k * dt;
    frames.push_back(GridField::sample(J, bc, [&](double x) { return f(t, x); }));
  }
  return Trajectory(dt, std::move(frames));
}

double Trajectory::sup_l2_norm() const {
  double m = 0.0;
  for (const auto& f : frames_) m = std::max(m, f.l2_norm());
  return m;
}

}  // namespace wickpde
