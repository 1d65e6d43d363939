#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "wickpde/grid.hpp"
#include "wickpde/multiindex.hpp"

namespace wickpde {

/// Chaos-expanded field at a fixed time: finitely many coefficients
/// f_gamma on a shared grid, keyed by admitted multi-indices in canonical
/// order.  A missing key is the zero coefficient.
class ChaosField {
 public:
  using CoefficientMap = std::map<MultiIndex, GridField, CanonicalLess>;

  ChaosField(TruncationSpec trunc, int J, Boundary bc);

  void set(const MultiIndex& idx, GridField f);
  const GridField* find(const MultiIndex& idx) const;
  GridField zero_field() const { return GridField(J_, bc_); }

  const CoefficientMap& coefficients() const { return coeffs_; }
  const TruncationSpec& truncation() const { return trunc_; }
  int J() const { return J_; }
  Boundary boundary() const { return bc_; }

 private:
  TruncationSpec trunc_;
  int J_;
  Boundary bc_;
  CoefficientMap coeffs_;
};

/// Chaos-expanded evolving field: one time-indexed trajectory per
/// coefficient, all sharing dt and step count.
class ChaosTrajectory {
 public:
  using CoefficientMap = std::map<MultiIndex, Trajectory, CanonicalLess>;

  ChaosTrajectory(TruncationSpec trunc, int J, Boundary bc, double dt, int steps);

  void set(const MultiIndex& idx, Trajectory traj);
  const Trajectory* find(const MultiIndex& idx) const;

  const CoefficientMap& coefficients() const { return coeffs_; }
  const TruncationSpec& truncation() const { return trunc_; }
  int J() const { return J_; }
  Boundary boundary() const { return bc_; }
  double dt() const { return dt_; }
  int steps() const { return steps_; }
  double horizon() const { return dt_ * steps_; }

  /// The field at time step k.
  ChaosField slice(int k) const;

 private:
  TruncationSpec trunc_;
  int J_;
  Boundary bc_;
  double dt_;
  int steps_;
  CoefficientMap coeffs_;
};

struct WickDiagnostics {
  std::uint64_t pairs_total = 0;    // coefficient pairs visited
  std::uint64_t pairs_kept = 0;     // pairs whose sum index is admitted
  double dropped_mass_sq = 0.0;     // squared L2 mass accumulated outside the truncation
};

/// Wick product: (F <> G)_gamma = sum over alpha + beta = gamma of the
/// pointwise product f_alpha g_beta, truncated to the shared admitted set.
/// Contributions landing outside the truncation are dropped and reported in
/// diag.  Requires identical truncation, grid size and boundary.
ChaosField wick_product(const ChaosField& F, const ChaosField& G,
                        WickDiagnostics* diag = nullptr);

struct NormReport {
  double p = 0.0;
  double partial_sum = 0.0;
  std::vector<double> terms_by_level;  // grouped by |gamma|, level 0..max_order
  bool stabilized = false;             // last level <= stab_tol * partial_sum
  double stab_tol = 0.0;
};

/// Weighted norm sum_gamma ||f_gamma||^2 (2N)^{-p gamma}, levels grouped by
/// |gamma|; partial_sum is the exact sequential sum of terms_by_level.
NormReport kondratiev_norm_sq(const ChaosField& F, double p, double stab_tol = 1e-6);

/// Trajectory version: with at_step the norm of that time slice, otherwise
/// each coefficient enters through its sup-over-time spatial L2 norm.
NormReport kondratiev_norm_sq(const ChaosTrajectory& U, double p,
                              std::optional<int> at_step = std::nullopt,
                              double stab_tol = 1e-6);

/// Smallest p in the (ascending) grid whose level sums decay geometrically
/// across the last three levels (both consecutive ratios < 1 - stab_tol);
/// nullopt when no grid point qualifies, i.e. the truncation cannot resolve
/// convergence.
std::optional<double> estimate_critical_exponent(const ChaosField& F,
                                                 std::span<const double> p_grid,
                                                 double stab_tol);
std::optional<double> estimate_critical_exponent(const ChaosTrajectory& U,
                                                 std::span<const double> p_grid,
                                                 double stab_tol);

nlohmann::ordered_json chaos_to_json(const ChaosField& F);
ChaosField chaos_field_from_json(const nlohmann::json& j);

std::string shape_name(TruncationShape shape);
TruncationShape shape_from_name(const std::string& name);

}  // namespace wickpde
