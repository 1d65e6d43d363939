#include "wickpde/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>
#include <utility>

#include <Eigen/Sparse>

#include "wickpde/util.hpp"

namespace wickpde {

double ScenarioData::q0_sup() const {
  const GridField* q0 = Q.find(MultiIndex{});
  return q0 ? q0->linf_norm() : 0.0;
}

double ScenarioData::coupling_product() const { return env.integral(op.horizon()) * q0_sup(); }

void ScenarioData::validate() const {
  truncation.validate();
  op.validate();
  env.validate();
  auto check_grid = [&](int J, Boundary bc, const char* what) {
    if (J != op.J || bc != op.boundary)
      throw ValidationError(std::string(what) + " grid does not match the operator");
  };
  check_grid(Q.J(), Q.boundary(), "potential");
  check_grid(G.J(), G.boundary(), "initial data");
  check_grid(F.J(), F.boundary(), "force");
  auto same_trunc = [&](const TruncationSpec& t) {
    return t.m == truncation.m && t.n == truncation.n && t.shape == truncation.shape;
  };
  if (!same_trunc(Q.truncation()) || !same_trunc(F.truncation()) || !same_trunc(G.truncation()))
    throw ValidationError("potential, force and initial data must share the scenario truncation");
  if (F.dt() != op.dt || F.steps() != op.steps)
    throw ValidationError("force trajectory does not match the operator's dt/steps");
  double q0 = q0_sup();
  if (std::abs(env.q0_inf - q0) > 1e-12 * std::max(1.0, q0))
    throw ValidationError("envelope q0_inf does not match sup|q_0|");
}

std::vector<std::string> ScenarioData::hypothesis_warnings() const {
  std::vector<std::string> warnings;
  const double q0 = q0_sup();
  for (const auto& [idx, field] : Q.coefficients()) {
    if (idx.is_zero()) continue;
    double qn = field.linf_norm();
    if (qn > q0) {
      std::ostringstream os;
      os << "potential coefficient " << idx.str() << " has sup " << qn
         << " exceeding the mean's " << q0;
      warnings.push_back(os.str());
    }
  }
  double product = coupling_product();
  if (std::abs(product - 1.0) < 1e-6) {
    std::ostringstream os;
    os << "coupling product Mtilde(T)*sup|q_0| = " << product
       << " is within 1e-6 of 1; the geometric summability bound degenerates";
    warnings.push_back(os.str());
  }
  return warnings;
}

namespace {

Trajectory zero_trajectory(const ScenarioData& sc) {
  return Trajectory::constant(sc.op.dt, sc.op.steps, GridField(sc.op.J, sc.op.boundary));
}

/// Effective force trajectory for gamma: the scenario force coefficient minus
/// q_{gamma-beta} u_beta over all finished beta < gamma.  `lower` holds
/// exactly the coefficients of levels below |gamma|, so the componentwise
/// test beta < gamma never sees an unfinished coefficient.
Trajectory assemble_force(const ScenarioData& sc, const MultiIndex& gamma,
                          const ChaosTrajectory::CoefficientMap& lower,
                          std::int64_t* dropped) {
  const Trajectory* f = sc.F.find(gamma);
  Trajectory out = f ? *f : zero_trajectory(sc);
  for (const auto& [beta, u_beta] : lower) {
    if (!(leq(beta, gamma)) || beta == gamma) continue;
    auto theta = try_subtract(gamma, beta);
    if (!theta || theta->is_zero()) continue;
    if (!sc.Q.truncation().admits(*theta)) {
      if (dropped) ++*dropped;
      continue;
    }
    const GridField* q = sc.Q.find(*theta);
    if (!q) continue;
    for (int k = 0; k <= out.steps(); ++k) out.at(k).axpy(-1.0, mul_pointwise(*q, u_beta.at(k)));
  }
  return out;
}

}  // namespace

SolveResult solve_chaos_system(const ScenarioData& sc, const SolveOptions& opts) {
  sc.validate();
  if (opts.threads < 1) throw ValidationError("solver needs threads >= 1");

  std::vector<MultiIndex> order = enumerate_indices(sc.truncation);
  const GridField* q0 = sc.Q.find(MultiIndex{});
  GridField mean_q = q0 ? *q0 : GridField(sc.op.J, sc.op.boundary);
  ThetaScheme scheme(sc.op, mean_q);

  SolveResult result{ChaosTrajectory(sc.truncation, sc.op.J, sc.op.boundary, sc.op.dt, sc.op.steps),
                     SolveStats{}};
  ChaosTrajectory::CoefficientMap done;

  std::size_t pos = 0;
  while (pos < order.size()) {
    const int level = order[pos].order();
    std::size_t end = pos;
    while (end < order.size() && order[end].order() == level) ++end;

    std::vector<MultiIndex> batch(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                  order.begin() + static_cast<std::ptrdiff_t>(end));
    if (opts.reverse_within_level) std::reverse(batch.begin(), batch.end());

    std::vector<Trajectory> solved(batch.size());
    std::vector<std::int64_t> dropped(batch.size(), 0);
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        try {
          const MultiIndex& gamma = batch[i];
          Trajectory force = assemble_force(sc, gamma, done, &dropped[i]);
          const GridField* g = sc.G.find(gamma);
          solved[i] = scheme.run(force, g ? *g : GridField(sc.op.J, sc.op.boundary));
        } catch (const ValidationError& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure)
            failure = std::make_exception_ptr(
                ValidationError("while solving coefficient " + batch[i].str() + ": " + e.what()));
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure)
            failure = std::make_exception_ptr(
                NumericalError("while solving coefficient " + batch[i].str() + ": " + e.what()));
        }
      }
    };

    const std::size_t nthreads =
        std::min<std::size_t>(static_cast<std::size_t>(opts.threads), batch.size());
    if (nthreads <= 1) {
      work(0, batch.size());
    } else {
      std::vector<std::thread> pool;
      std::size_t chunk = (batch.size() + nthreads - 1) / nthreads;
      for (std::size_t t = 0; t < nthreads; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(batch.size(), lo + chunk);
        if (lo < hi) pool.emplace_back(work, lo, hi);
      }
      for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t i = 0; i < batch.size(); ++i) {
      result.stats.dropped_couplings += dropped[i];
      done.emplace(batch[i], std::move(solved[i]));
    }
    result.stats.per_level_counts.push_back(static_cast<int>(batch.size()));
    ++result.stats.levels;
    pos = end;
  }

  for (auto& [idx, traj] : done) result.U.set(idx, std::move(traj));
  return result;
}

ChaosTrajectory solve_block_oracle(const ScenarioData& sc) {
  sc.validate();
  std::vector<MultiIndex> order = enumerate_indices(sc.truncation);
  const bool cyclic = sc.op.boundary == Boundary::Periodic;
  const int n = cyclic ? sc.op.J : sc.op.J - 1;
  const int base = cyclic ? 0 : 1;
  const std::size_t blocks = order.size();
  const std::size_t dim = blocks * static_cast<std::size_t>(n);
  if (order.size() * static_cast<std::size_t>(sc.op.J + 1) > 100000)
    throw ValidationError("block oracle size limit exceeded");

  std::map<MultiIndex, std::size_t, CanonicalLess> block_of;
  for (std::size_t b = 0; b < blocks; ++b) block_of.emplace(order[b], b);

  // Row-major triplets of the spatial operator L = -Laplacian + couplings.
  const double h2inv = static_cast<double>(sc.op.J) * sc.op.J;
  std::vector<Eigen::Triplet<double>> trip;
  auto add = [&](std::size_t r, std::size_t c, double v) {
    trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  };
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t off = b * static_cast<std::size_t>(n);
    for (int i = 0; i < n; ++i) {
      add(off + static_cast<std::size_t>(i), off + static_cast<std::size_t>(i), 2.0 * h2inv);
      int left = i - 1, right = i + 1;
      if (cyclic) {
        left = (i + n - 1) % n;
        right = (i + 1) % n;
      }
      if (left >= 0)
        add(off + static_cast<std::size_t>(i), off + static_cast<std::size_t>(left), -h2inv);
      if (right < n)
        add(off + static_cast<std::size_t>(i), off + static_cast<std::size_t>(right), -h2inv);
    }
    // couplings q_{gamma - beta} for beta <= gamma (beta = gamma is the mean)
    const MultiIndex& gamma = order[b];
    for (const auto& [theta, q] : sc.Q.coefficients()) {
      auto beta = try_subtract(gamma, theta);
      if (!beta) continue;
      const std::size_t bb = block_of.at(*beta);
      for (int i = 0; i < n; ++i)
        add(off + static_cast<std::size_t>(i), bb * static_cast<std::size_t>(n) + static_cast<std::size_t>(i),
            q[base + i]);
    }
  }

  Eigen::SparseMatrix<double> L(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  L.setFromTriplets(trip.begin(), trip.end());
  const double th = sc.op.theta();
  Eigen::SparseMatrix<double> ident(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  ident.setIdentity();
  Eigen::SparseMatrix<double> impl = ident + (th * sc.op.dt) * L;
  Eigen::SparseMatrix<double> expl = ident - ((1.0 - th) * sc.op.dt) * L;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(impl);
  if (lu.info() != Eigen::Success) throw NumericalError("block oracle factorization failed");

  Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
  x.setZero();
  for (std::size_t b = 0; b < blocks; ++b) {
    const GridField* g = sc.G.find(order[b]);
    if (!g) continue;
    for (int i = 0; i < n; ++i)
      x[static_cast<Eigen::Index>(b * static_cast<std::size_t>(n) + static_cast<std::size_t>(i))] =
          (*g)[base + i];
  }

  auto stack_force = [&](int k) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(dim));
    f.setZero();
    for (std::size_t b = 0; b < blocks; ++b) {
      const Trajectory* traj = sc.F.find(order[b]);
      if (!traj) continue;
      for (int i = 0; i < n; ++i) {
        double v = th == 1.0 ? traj->at(k + 1)[base + i]
                             : 0.5 * (traj->at(k)[base + i] + traj->at(k + 1)[base + i]);
        f[static_cast<Eigen::Index>(b * static_cast<std::size_t>(n) + static_cast<std::size_t>(i))] = v;
      }
    }
    return f;
  };

  std::vector<Eigen::VectorXd> states;
  states.reserve(static_cast<std::size_t>(sc.op.steps) + 1);
  states.push_back(x);
  for (int k = 0; k < sc.op.steps; ++k) {
    Eigen::VectorXd rhs = expl * states.back() + sc.op.dt * stack_force(k);
    Eigen::VectorXd next = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw NumericalError("block oracle solve failed");
    states.push_back(std::move(next));
  }

  ChaosTrajectory U(sc.truncation, sc.op.J, sc.op.boundary, sc.op.dt, sc.op.steps);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::vector<GridField> frames;
    frames.reserve(states.size());
    for (const Eigen::VectorXd& state : states) {
      GridField fr(sc.op.J, sc.op.boundary);
      for (int i = 0; i < n; ++i)
        fr[base + i] = state[static_cast<Eigen::Index>(b * static_cast<std::size_t>(n) +
                                                       static_cast<std::size_t>(i))];
      if (cyclic) fr[sc.op.J] = fr[0];
      frames.push_back(std::move(fr));
    }
    U.set(order[b], Trajectory(sc.op.dt, std::move(frames)));
  }
  return U;
}

TrajectoryComparison compare_trajectories(const ChaosTrajectory& a, const ChaosTrajectory& b) {
  if (a.J() != b.J() || a.boundary() != b.boundary() || a.steps() != b.steps() ||
      a.dt() != b.dt())
    throw ValidationError("trajectory comparison needs matching grids and clocks");
  TrajectoryComparison cmp;
  auto visit = [&](const MultiIndex& idx) {
    const Trajectory* ta = a.find(idx);
    const Trajectory* tb = b.find(idx);
    double denom = std::max(ta ? ta->sup_l2_norm() : 0.0, tb ? tb->sup_l2_norm() : 0.0);
    for (int k = 0; k <= a.steps(); ++k) {
      GridField diff = ta ? ta->at(k) : GridField(a.J(), a.boundary());
      if (tb) diff.axpy(-1.0, tb->at(k));
      double abs_err = diff.l2_norm();
      double rel = denom > 0.0 ? abs_err / denom : (abs_err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      if (abs_err > cmp.max_abs) cmp.max_abs = abs_err;
      if (rel > cmp.max_rel) {
        cmp.max_rel = rel;
        cmp.argmax = idx;
        cmp.argmax_step = k;
      }
    }
  };
  for (const auto& kv : a.coefficients()) visit(kv.first);
  for (const auto& kv : b.coefficients())
    if (!a.find(kv.first)) visit(kv.first);
  return cmp;
}

namespace {

/// Weighted ordered-decomposition sum
///   W(delta, k) = sum over theta_1 + ... + theta_k = delta, theta_i != 0,
///                 of prod_i ||q_{theta_i}||_inf,
/// restricted to the potential's support.  Memoized across the whole report.
class DecompositionWeights {
 public:
  explicit DecompositionWeights(const ChaosField& Q) {
    for (const auto& [idx, field] : Q.coefficients())
      if (!idx.is_zero()) support_.emplace_back(idx, field.linf_norm());
  }

  double operator()(const MultiIndex& delta, int k) {
    if (k == 0) return delta.is_zero() ? 1.0 : 0.0;
    if (delta.is_zero() || delta.order() < k) return 0.0;
    auto key = std::make_pair(delta, k);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    double total = 0.0;
    for (const auto& [theta, norm] : support_) {
      auto rest = try_subtract(delta, theta);
      if (!rest) continue;
      total += norm * (*this)(*rest, k - 1);
    }
    memo_.emplace(std::move(key), total);
    return total;
  }

 private:
  struct KeyLess {
    bool operator()(const std::pair<MultiIndex, int>& a,
                    const std::pair<MultiIndex, int>& b) const {
      if (a.second != b.second) return a.second < b.second;
      return CanonicalLess{}(a.first, b.first);
    }
  };
  std::vector<std::pair<MultiIndex, double>> support_;
  std::map<std::pair<MultiIndex, int>, double, KeyLess> memo_;
};

constexpr std::uint64_t kTupleBudget = 1000000;

}  // namespace

BoundReport verify_eq3_bounds(const ScenarioData& sc, const ChaosTrajectory& U, double t,
                              double tol) {
  sc.validate();
  if (U.dt() != sc.op.dt || U.steps() != sc.op.steps || U.J() != sc.op.J ||
      U.boundary() != sc.op.boundary)
    throw ValidationError("solution does not match the scenario operator");
  const double T = sc.op.horizon();
  long step = std::lround(t / sc.op.dt);
  if (step < 0 || step > sc.op.steps || std::abs(t - static_cast<double>(step) * sc.op.dt) >
                                            1e-9 * std::max(1.0, T))
    throw ValidationError("bound evaluation time must be a step boundary inside [0, T]");

  BoundReport rep;
  rep.t = static_cast<double>(step) * sc.op.dt;
  rep.step = static_cast<int>(step);
  rep.tol = tol;

  const double M_t = sc.env.value(rep.t);
  const double Mt_t = sc.env.integral(rep.t);
  const double q0 = sc.q0_sup();

  std::vector<MultiIndex> order = enumerate_indices(sc.truncation);
  std::map<MultiIndex, double, CanonicalLess> a;  // ||g|| + t sup||f||
  for (const MultiIndex& idx : order) {
    const GridField* g = sc.G.find(idx);
    const Trajectory* f = sc.F.find(idx);
    a.emplace(idx, (g ? g->l2_norm() : 0.0) + rep.t * (f ? f->sup_l2_norm() : 0.0));
  }

  DecompositionWeights W(sc.Q);

  for (const MultiIndex& gamma : order) {
    BoundRecord rec;
    rec.gamma = gamma;
    rec.level = gamma.order();
    const Trajectory* u = U.find(gamma);
    rec.lhs = u ? u->at(rep.step).l2_norm() : 0.0;

    double exact_sum = a.at(gamma);
    double coarse_sum = a.at(gamma);
    for (const MultiIndex& beta : order) {
      if (beta == gamma || !leq(beta, gamma)) continue;
      auto delta_opt = try_subtract(gamma, beta);
      const MultiIndex& delta = *delta_opt;
      const int dorder = delta.order();
      double mt_pow = 1.0;
      for (int k = 1; k <= dorder; ++k) {
        mt_pow *= Mt_t;
        if (!rec.exact_skipped) {
          if (count_decompositions(delta, k, DecompositionMode::Nonzero) > kTupleBudget) {
            rec.exact_skipped = true;
            ++rep.skipped;
          } else {
            exact_sum += mt_pow * a.at(beta) * W(delta, k);
          }
        }
        coarse_sum +=
            mt_pow * a.at(beta) * std::ldexp(1.0, k * dorder) * std::pow(q0, k);
      }
    }
    rec.rhs_exact = rec.exact_skipped ? 0.0 : M_t * exact_sum;
    rec.rhs_coarse = M_t * coarse_sum;

    auto ratio = [](double lhs, double rhs) {
      if (rhs > 0.0) return lhs / rhs;
      return lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    };
    rec.ratio_exact = rec.exact_skipped ? 0.0 : ratio(rec.lhs, rec.rhs_exact);
    rec.ratio_coarse = ratio(rec.lhs, rec.rhs_coarse);

    if (rec.exact_skipped) {
      rep.pass = rep.pass && rec.ratio_coarse <= 1.0 + tol;
    } else {
      rep.pass = rep.pass && rec.ratio_exact <= 1.0 + tol;
      rep.max_ratio_exact = std::max(rep.max_ratio_exact, rec.ratio_exact);
    }
    rep.max_ratio_coarse = std::max(rep.max_ratio_coarse, rec.ratio_coarse);
    rep.records.push_back(std::move(rec));
  }
  return rep;
}

SummabilityReport summability_report(const ScenarioData& sc, const ChaosTrajectory& U,
                                     std::span<const double> p_list) {
  sc.validate();
  SummabilityReport rep;
  rep.product = sc.coupling_product();
  rep.distance_from_1 = std::abs(rep.product - 1.0);
  rep.s = find_s(4.0);
  const double c = rep.product * rep.product;
  rep.s1 = c > 0.0 ? find_s(c * std::numbers::e) : 0.0;
  rep.p_threshold = std::max(rep.s + 3.0, 3.0 * rep.s1 + 6.0);
  const double T = sc.op.horizon();

  for (double p : p_list) {
    SummabilityEntry entry;
    entry.p = p;
    // Deliberately a flat, coefficient-by-coefficient accumulation; the
    // level-grouped kondratiev_norm_sq serves as the independent cross-check.
    for (const auto& [idx, g] : sc.G.coefficients()) {
      double norm = g.l2_norm();
      entry.S1 += norm * norm * std::exp(-p * idx.log_weight_2n());
    }
    for (const auto& [idx, f] : sc.F.coefficients()) {
      double norm = f.sup_l2_norm();
      entry.S2 += norm * norm * std::exp(-p * idx.log_weight_2n());
    }
    entry.S1_plus_T2_S2 = entry.S1 + T * T * entry.S2;
    entry.u_norm = kondratiev_norm_sq(U, p);

    const std::vector<double>& levels = entry.u_norm.terms_by_level;
    for (std::size_t l = 1; l < levels.size(); ++l) {
      double ratio;
      if (levels[l - 1] > 0.0)
        ratio = levels[l] / levels[l - 1];
      else
        ratio = levels[l] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      entry.max_level_ratio = std::max(entry.max_level_ratio, ratio);
    }
    entry.decays = entry.max_level_ratio <= 0.5;
    rep.entries.push_back(std::move(entry));
  }
  return rep;
}

nlohmann::ordered_json bound_report_to_json(const BoundReport& rep) {
  nlohmann::ordered_json j;
  j["t"] = rep.t;
  j["step"] = rep.step;
  j["tol"] = rep.tol;
  j["pass"] = rep.pass;
  j["max_ratio_exact"] = rep.max_ratio_exact;
  j["max_ratio_coarse"] = rep.max_ratio_coarse;
  j["skipped"] = rep.skipped;
  j["records"] = nlohmann::ordered_json::array();
  for (const BoundRecord& rec : rep.records) {
    nlohmann::ordered_json r;
    r["index"] = rec.gamma.str();
    r["level"] = rec.level;
    r["lhs"] = rec.lhs;
    r["rhs_exact"] = rec.rhs_exact;
    r["rhs_coarse"] = rec.rhs_coarse;
    r["ratio_exact"] = rec.ratio_exact;
    r["ratio_coarse"] = rec.ratio_coarse;
    r["exact_skipped"] = rec.exact_skipped;
    j["records"].push_back(std::move(r));
  }
  return j;
}

std::string bound_report_to_csv(const BoundReport& rep) {
  std::string out = "index,level,lhs,rhs_exact,rhs_coarse,ratio_exact,ratio_coarse\n";
  for (const BoundRecord& rec : rep.records) {
    out += '"' + rec.gamma.str() + '"';
    out += ',' + std::to_string(rec.level);
    out += ',' + format_double(rec.lhs);
    out += ',' + format_double(rec.rhs_exact);
    out += ',' + format_double(rec.rhs_coarse);
    out += ',' + format_double(rec.ratio_exact);
    out += ',' + format_double(rec.ratio_coarse);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json summability_report_to_json(const SummabilityReport& rep) {
  nlohmann::ordered_json j;
  j["product"] = rep.product;
  j["distance_from_1"] = rep.distance_from_1;
  j["s"] = rep.s;
  j["s1"] = rep.s1;
  j["p_threshold"] = rep.p_threshold;
  j["entries"] = nlohmann::ordered_json::array();
  for (const SummabilityEntry& e : rep.entries) {
    nlohmann::ordered_json r;
    r["p"] = e.p;
    r["S1"] = e.S1;
    r["S2"] = e.S2;
    r["S1_plus_T2_S2"] = e.S1_plus_T2_S2;
    r["u_norm"] = e.u_norm.partial_sum;
    r["levels"] = e.u_norm.terms_by_level;
    r["max_level_ratio"] = e.max_level_ratio;
    r["decays"] = e.decays;
    j["entries"].push_back(std::move(r));
  }
  return j;
}

std::string summability_report_to_csv(const SummabilityReport& rep) {
  std::string out = "p,level,level_sum,partial_sum,S1,S2,S1_plus_T2_S2,max_level_ratio,decays\n";
  for (const SummabilityEntry& e : rep.entries) {
    for (std::size_t l = 0; l < e.u_norm.terms_by_level.size(); ++l) {
      out += format_double(e.p);
      out += ',' + std::to_string(l);
      out += ',' + format_double(e.u_norm.terms_by_level[l]);
      out += ',' + format_double(e.u_norm.partial_sum);
      out += ',' + format_double(e.S1);
      out += ',' + format_double(e.S2);
      out += ',' + format_double(e.S1_plus_T2_S2);
      out += ',' + format_double(e.max_level_ratio);
      out += ',' + (e.decays ? std::string("1") : std::string("0"));
      out += '\n';
    }
  }
  return out;
}

}  // namespace wickpde
