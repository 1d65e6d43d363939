#include "wickpde/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wickpde/util.hpp"

namespace wickpde {

ChaosField::ChaosField(TruncationSpec trunc, int J, Boundary bc)
    : trunc_(trunc), J_(J), bc_(bc) {
  trunc_.validate();
  if (J < 1) throw ValidationError("chaos field needs J >= 1");
}

void ChaosField::set(const MultiIndex& idx, GridField f) {
  if (!trunc_.admits(idx))
    throw ValidationError("coefficient index " + idx.str() + " is outside the truncation");
  if (f.J() != J_ || f.boundary() != bc_)
    throw ValidationError("coefficient grid does not match the chaos field grid");
  coeffs_.insert_or_assign(idx, std::move(f));
}

const GridField* ChaosField::find(const MultiIndex& idx) const {
  auto it = coeffs_.find(idx);
  return it == coeffs_.end() ? nullptr : &it->second;
}

ChaosTrajectory::ChaosTrajectory(TruncationSpec trunc, int J, Boundary bc, double dt, int steps)
    : trunc_(trunc), J_(J), bc_(bc), dt_(dt), steps_(steps) {
  trunc_.validate();
  if (J < 1) throw ValidationError("chaos trajectory needs J >= 1");
  if (dt <= 0) throw ValidationError("chaos trajectory needs dt > 0");
  if (steps < 0) throw ValidationError("chaos trajectory needs steps >= 0");
}

void ChaosTrajectory::set(const MultiIndex& idx, Trajectory traj) {
  if (!trunc_.admits(idx))
    throw ValidationError("coefficient index " + idx.str() + " is outside the truncation");
  if (traj.empty() || traj.steps() != steps_ || traj.dt() != dt_)
    throw ValidationError("coefficient trajectory does not match dt/steps");
  if (traj.at(0).J() != J_ || traj.at(0).boundary() != bc_)
    throw ValidationError("coefficient grid does not match the chaos trajectory grid");
  coeffs_.insert_or_assign(idx, std::move(traj));
}

const Trajectory* ChaosTrajectory::find(const MultiIndex& idx) const {
  auto it = coeffs_.find(idx);
  return it == coeffs_.end() ? nullptr : &it->second;
}

ChaosField ChaosTrajectory::slice(int k) const {
  if (k < 0 || k > steps_) throw ValidationError("slice step out of range");
  ChaosField out(trunc_, J_, bc_);
  for (const auto& [idx, traj] : coeffs_) out.set(idx, traj.at(k));
  return out;
}

ChaosField wick_product(const ChaosField& F, const ChaosField& G, WickDiagnostics* diag) {
  if (!(F.truncation() == G.truncation()))
    throw ValidationError("wick product operands use different truncations");
  if (F.J() != G.J() || F.boundary() != G.boundary())
    throw ValidationError("wick product operands live on different grids");

  ChaosField out(F.truncation(), F.J(), F.boundary());
  ChaosField::CoefficientMap kept, dropped;
  WickDiagnostics d;
  for (const auto& [alpha, fa] : F.coefficients()) {
    for (const auto& [beta, gb] : G.coefficients()) {
      MultiIndex gamma = alpha + beta;
      ++d.pairs_total;
      bool admitted = F.truncation().admits(gamma);
      auto& target = admitted ? kept : dropped;
      if (admitted) ++d.pairs_kept;
      auto [it, inserted] = target.try_emplace(gamma, F.zero_field());
      GridField& acc = it->second;
      for (int j = 0; j <= F.J(); ++j) acc[j] += fa[j] * gb[j];
    }
  }
  for (auto& [gamma, field] : kept) out.set(gamma, std::move(field));
  for (const auto& [gamma, field] : dropped) d.dropped_mass_sq += field.l2_norm_sq();
  if (diag) *diag = d;
  return out;
}

namespace {

NormReport norm_from_terms(const std::vector<std::pair<const MultiIndex*, double>>& sq_norms,
                           int max_order, double p, double stab_tol) {
  NormReport rep;
  rep.p = p;
  rep.stab_tol = stab_tol;
  rep.terms_by_level.assign(static_cast<std::size_t>(max_order) + 1, 0.0);
  for (const auto& [idx, nsq] : sq_norms)
    rep.terms_by_level[static_cast<std::size_t>(idx->order())] += nsq * idx->weight_2n_pow(-p);
  for (double lv : rep.terms_by_level) rep.partial_sum += lv;
  double last = rep.terms_by_level.back();
  rep.stabilized = rep.partial_sum == 0.0 || last <= stab_tol * rep.partial_sum;
  return rep;
}

std::vector<std::pair<const MultiIndex*, double>> field_sq_norms(const ChaosField& F) {
  std::vector<std::pair<const MultiIndex*, double>> v;
  v.reserve(F.coefficients().size());
  for (const auto& [idx, f] : F.coefficients()) v.emplace_back(&idx, f.l2_norm_sq());
  return v;
}

std::vector<std::pair<const MultiIndex*, double>> trajectory_sq_norms(
    const ChaosTrajectory& U, std::optional<int> at_step) {
  std::vector<std::pair<const MultiIndex*, double>> v;
  v.reserve(U.coefficients().size());
  for (const auto& [idx, traj] : U.coefficients()) {
    double n = at_step ? traj.at(*at_step).l2_norm() : traj.sup_l2_norm();
    v.emplace_back(&idx, n * n);
  }
  return v;
}

// Decay ratio of consecutive level sums; 0/0 counts as fully decayed.
double level_ratio(double from, double to) {
  if (from > 0.0) return to / from;
  return to == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

std::optional<double> critical_from_sq_norms(
    const std::vector<std::pair<const MultiIndex*, double>>& sq_norms, int max_order,
    std::span<const double> p_grid, double stab_tol) {
  if (!std::is_sorted(p_grid.begin(), p_grid.end()))
    throw ValidationError("critical exponent p grid must be ascending");
  if (stab_tol <= 0 || stab_tol >= 1)
    throw ValidationError("critical exponent stab_tol must lie in (0,1)");
  for (double p : p_grid) {
    NormReport rep = norm_from_terms(sq_norms, max_order, p, stab_tol);
    const auto& lv = rep.terms_by_level;
    std::size_t L = lv.size() - 1;
    bool ok = true;
    // the two ratios across the last three levels (one ratio when only two
    // levels exist, vacuous for a single level)
    for (std::size_t k = (L >= 2 ? L - 2 : 0); ok && k < L; ++k)
      ok = level_ratio(lv[k], lv[k + 1]) < 1.0 - stab_tol;
    if (ok) return p;
  }
  return std::nullopt;
}

}  // namespace

NormReport kondratiev_norm_sq(const ChaosField& F, double p, double stab_tol) {
  if (p < 0) throw ValidationError("kondratiev norm needs p >= 0");
  return norm_from_terms(field_sq_norms(F), F.truncation().max_order(), p, stab_tol);
}

NormReport kondratiev_norm_sq(const ChaosTrajectory& U, double p, std::optional<int> at_step,
                              double stab_tol) {
  if (p < 0) throw ValidationError("kondratiev norm needs p >= 0");
  if (at_step && (*at_step < 0 || *at_step > U.steps()))
    throw ValidationError("kondratiev norm time step out of range");
  return norm_from_terms(trajectory_sq_norms(U, at_step), U.truncation().max_order(), p,
                         stab_tol);
}

std::optional<double> estimate_critical_exponent(const ChaosField& F,
                                                 std::span<const double> p_grid,
                                                 double stab_tol) {
  return critical_from_sq_norms(field_sq_norms(F), F.truncation().max_order(), p_grid, stab_tol);
}

std::optional<double> estimate_critical_exponent(const ChaosTrajectory& U,
                                                 std::span<const double> p_grid,
                                                 double stab_tol) {
  return critical_from_sq_norms(trajectory_sq_norms(U, std::nullopt),
                                U.truncation().max_order(), p_grid, stab_tol);
}

std::string shape_name(TruncationShape shape) {
  return shape == TruncationShape::TotalDegree ? "total_degree" : "box";
}

TruncationShape shape_from_name(const std::string& name) {
  if (name == "total_degree" || name == "total") return TruncationShape::TotalDegree;
  if (name == "box") return TruncationShape::Box;
  throw ValidationError("unknown truncation shape '" + name +
                        "' (expected total_degree or box)");
}

nlohmann::ordered_json chaos_to_json(const ChaosField& F) {
  nlohmann::ordered_json j;
  j["truncation"] = {{"m", F.truncation().m},
                     {"n", F.truncation().n},
                     {"shape", shape_name(F.truncation().shape)}};
  j["grid"] = {{"J", F.J()}, {"boundary", boundary_name(F.boundary())}};
  auto coeffs = nlohmann::ordered_json::array();
  for (const auto& [idx, f] : F.coefficients()) {
    nlohmann::ordered_json c;
    c["index"] = idx.dense(F.truncation().m);
    c["values"] = std::vector<double>(f.values().begin(), f.values().end());
    coeffs.push_back(std::move(c));
  }
  j["coefficients"] = std::move(coeffs);
  return j;
}

ChaosField chaos_field_from_json(const nlohmann::json& j) {
  try {
    TruncationSpec trunc{j.at("truncation").at("m").get<int>(),
                         j.at("truncation").at("n").get<int>(),
                         shape_from_name(j.at("truncation").at("shape").get<std::string>())};
    int J = j.at("grid").at("J").get<int>();
    Boundary bc = boundary_from_name(j.at("grid").at("boundary").get<std::string>());
    ChaosField out(trunc, J, bc);
    for (const auto& c : j.at("coefficients")) {
      auto dense = c.at("index").get<std::vector<int>>();
      auto values = c.at("values").get<std::vector<double>>();
      out.set(MultiIndex::from_dense(dense), GridField::from_values(bc, std::move(values)));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("chaos field json: ") + e.what());
  }
}

}  // namespace wickpde
