#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wickpde/chaos.hpp"
#include "wickpde/pde.hpp"

namespace wickpde {

/// Everything one chaos solve needs: potential, force and initial-data
/// expansions on a shared truncation and grid, the time-stepping operator,
/// and the growth envelope derived from the mean potential.
struct ScenarioData {
  std::string name;
  TruncationSpec truncation;
  OperatorSpec op;
  SemigroupEnvelope env;
  ChaosField Q;
  ChaosTrajectory F;
  ChaosField G;

  /// sup |q_0| on the grid; zero when the mean coefficient is absent.
  double q0_sup() const;
  /// Mtilde(T) * ||q_0||_inf, the contraction factor of the coupling series.
  double coupling_product() const;

  void validate() const;
  /// Non-fatal hypothesis violations: coefficients dominating the mean
  /// (||q_gamma|| > ||q_0||) and a coupling product within 1e-6 of 1.
  std::vector<std::string> hypothesis_warnings() const;
};

struct SolveStats {
  int levels = 0;                       // number of processed levels (max |gamma| + 1)
  std::vector<int> per_level_counts;    // admitted indices per level
  std::int64_t dropped_couplings = 0;   // force terms q_{gamma-beta} u_beta outside the truncation
};

struct SolveOptions {
  int threads = 1;
  /// Process each level's indices in reverse. The result must be bitwise
  /// identical either way; exposed only to let tests pin that down.
  bool reverse_within_level = false;
};

struct SolveResult {
  ChaosTrajectory U;
  SolveStats stats;
};

/// Triangular chaos recursion: levels in increasing |gamma|, each coefficient
/// solved with the mean potential and the effective force
/// f_gamma - sum_{beta < gamma} q_{gamma-beta} u_beta built from already
/// finished levels.
SolveResult solve_chaos_system(const ScenarioData& sc, const SolveOptions& opts = {});

/// Independent verification path: assembles the fully coupled block system
/// over all coefficients at once (mean potential on the diagonal blocks,
/// -q_{gamma-beta} couplings below) and time-steps it with the same theta
/// scheme via a sparse LU factorization.
ChaosTrajectory solve_block_oracle(const ScenarioData& sc);

struct TrajectoryComparison {
  double max_rel = 0.0;     // worst ||a-b|| / max(sup ||a||, sup ||b||) over coefficients
  double max_abs = 0.0;
  MultiIndex argmax;
  int argmax_step = 0;
};

TrajectoryComparison compare_trajectories(const ChaosTrajectory& a, const ChaosTrajectory& b);

struct BoundRecord {
  MultiIndex gamma;
  int level = 0;
  double lhs = 0.0;          // ||u_gamma(t)||
  double rhs_exact = 0.0;    // envelope bound with exact decomposition sums
  double rhs_coarse = 0.0;   // 2^{k|gamma-beta|} ||q_0||^k relaxation
  double ratio_exact = 0.0;
  double ratio_coarse = 0.0;
  bool exact_skipped = false;  // enumeration budget exceeded; only the coarse bound stands
};

struct BoundReport {
  double t = 0.0;
  int step = 0;
  double tol = 0.0;
  bool pass = true;
  double max_ratio_exact = 0.0;
  double max_ratio_coarse = 0.0;
  std::int64_t skipped = 0;
  std::vector<BoundRecord> records;
};

/// Checks every solved coefficient at grid time t against the per-coefficient
/// envelope bound
///   ||u_gamma(t)|| <= M(t) { a_gamma + sum_k Mtilde(t)^k
///                            sum_{beta < gamma} a_beta W(gamma-beta, k) }
/// where a_beta = ||g_beta|| + t sup_s ||f_beta(s)|| and W sums the products
/// of ||q_theta||_inf over ordered nonzero decompositions.  rhs_coarse
/// relaxes W(delta, k) to 2^{k |delta|} ||q_0||_inf^k.
BoundReport verify_eq3_bounds(const ScenarioData& sc, const ChaosTrajectory& U, double t,
                              double tol = 1e-6);

struct SummabilityEntry {
  double p = 0.0;
  double S1 = 0.0;               // sum ||g_gamma||^2 (2N)^{-p gamma}
  double S2 = 0.0;               // sum (sup_t ||f_gamma||)^2 (2N)^{-p gamma}
  double S1_plus_T2_S2 = 0.0;
  NormReport u_norm;             // weighted solution norm with per-level sums
  double max_level_ratio = 0.0;  // worst consecutive level-sum ratio of u_norm
  bool decays = false;           // max_level_ratio <= 0.5
};

struct SummabilityReport {
  double product = 0.0;          // Mtilde(T) ||q_0||_inf
  double distance_from_1 = 0.0;
  double s = 0.0;                // exponent folding 4^{k|delta|} into a (2N) weight
  double s1 = 0.0;               // surrogate exponent for |gamma| c^{|gamma|}, c = product^2
  double p_threshold = 0.0;      // max(s + 3, 3 s1 + 6)
  std::vector<SummabilityEntry> entries;
};

/// Weighted-norm summability scan of a solved system over the given exponents.
SummabilityReport summability_report(const ScenarioData& sc, const ChaosTrajectory& U,
                                     std::span<const double> p_list);

nlohmann::ordered_json bound_report_to_json(const BoundReport& rep);
std::string bound_report_to_csv(const BoundReport& rep);
nlohmann::ordered_json summability_report_to_json(const SummabilityReport& rep);
std::string summability_report_to_csv(const SummabilityReport& rep);

}  // namespace wickpde
