#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace wickpde {

enum class Boundary { Dirichlet, Periodic };

std::string boundary_name(Boundary bc);
Boundary boundary_from_name(const std::string& name);

/// Real-valued field on the uniform grid x_j = j/J, j = 0..J, over [0,1].
/// Dirichlet fields carry exact zeros at both endpoints; Periodic fields
/// duplicate the wrap-around value (v[J] == v[0]).  Both invariants are
/// validated on construction and preserved by the arithmetic here.
class GridField {
 public:
  GridField() = default;
  GridField(int J, Boundary bc);  // zero field

  /// Takes ownership of J+1 values; throws ValidationError when the boundary
  /// invariant does not hold.
  static GridField from_values(Boundary bc, std::vector<double> values);

  /// Samples f on the grid, then imposes the boundary tag (zeroed endpoints
  /// for Dirichlet, wrap-around copy for Periodic).
  static GridField sample(int J, Boundary bc, const std::function<double(double)>& f);

  int J() const { return static_cast<int>(values_.size()) - 1; }
  double h() const { return 1.0 / J(); }
  double x(int j) const { return static_cast<double>(j) / J(); }
  Boundary boundary() const { return bc_; }
  bool empty() const { return values_.empty(); }

  std::span<const double> values() const { return values_; }
  double operator[](int j) const { return values_[static_cast<std::size_t>(j)]; }
  double& operator[](int j) { return values_[static_cast<std::size_t>(j)]; }

  /// Discrete L2(0,1) norm with uniform weight h; the duplicated Periodic
  /// endpoint is counted once so constants have unit norm.
  double l2_norm_sq() const;
  double l2_norm() const;
  double linf_norm() const;

  GridField& axpy(double a, const GridField& other);  // this += a * other
  GridField& scale(double a);

 private:
  GridField(Boundary bc, std::vector<double> values) : bc_(bc), values_(std::move(values)) {}

  Boundary bc_ = Boundary::Dirichlet;
  std::vector<double> values_;
};

/// Elementwise product; shares grid and boundary tag with the operands.
GridField mul_pointwise(const GridField& a, const GridField& b);
GridField add_fields(const GridField& a, double coef_b, const GridField& b);

/// Throws ValidationError unless both fields live on the same grid with the
/// same boundary tag.
void require_same_grid(const GridField& a, const GridField& b, const char* what);

/// Time-indexed field: frames[k] at t = k*dt, k = 0..steps.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(double dt, std::vector<GridField> frames);

  static Trajectory constant(double dt, int steps, const GridField& f);
  static Trajectory sample(int J, Boundary bc, double dt, int steps,
                           const std::function<double(double, double)>& f);  // f(t, x)

  double dt() const { return dt_; }
  int steps() const { return static_cast<int>(frames_.size()) - 1; }
  double horizon() const { return dt_ * steps(); }
  bool empty() const { return frames_.empty(); }

  const GridField& at(int k) const { return frames_[static_cast<std::size_t>(k)]; }
  GridField& at(int k) { return frames_[static_cast<std::size_t>(k)]; }
  const std::vector<GridField>& frames() const { return frames_; }

  /// max over frames of the spatial L2 norm
  double sup_l2_norm() const;

 private:
  double dt_ = 0.0;
  std::vector<GridField> frames_;
};

}  // namespace wickpde
