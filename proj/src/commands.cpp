#include "wickpde/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "wickpde/hermite.hpp"
#include "wickpde/util.hpp"

namespace wickpde {

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write output file '" + path + "'");
  out << content;
  if (!out) throw ValidationError("failed writing output file '" + path + "'");
}

void make_output_dir(const std::string& dir) {
  try {
    fs::create_directories(dir);
  } catch (const fs::filesystem_error& e) {
    throw ValidationError("cannot create output directory '" + dir + "': " + e.code().message());
  }
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string now_iso8601() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string norms_csv(const ChaosTrajectory& U) {
  std::string csv = "index,level,sup_l2,final_l2\n";
  for (const auto& [idx, traj] : U.coefficients()) {
    csv += '"' + idx.str() + '"';
    csv += ',' + std::to_string(idx.order());
    csv += ',' + format_double(traj.sup_l2_norm());
    csv += ',' + format_double(traj.at(U.steps()).l2_norm());
    csv += '\n';
  }
  return csv;
}

struct CheckOutcome {
  std::string name;
  bool pass = true;
  std::vector<std::string> lines;
  nlohmann::ordered_json details;
};

void print_outcome(const CheckOutcome& outcome, std::ostream& log) {
  for (const std::string& line : outcome.lines)
    log << (outcome.pass ? "PASS" : "FAIL") << "  " << outcome.name << ": " << line << "\n";
}

/// Shared lazy solve so verify checks reuse one recursion result.
struct VerifyContext {
  LoadedScenario& loaded;
  int threads = 1;
  std::optional<SolveResult> solved;

  const SolveResult& solution() {
    if (!solved) solved = solve_chaos_system(loaded.data, SolveOptions{threads, false});
    return *solved;
  }
};

CheckOutcome check_lemma1(VerifyContext&) {
  CheckOutcome out;
  out.name = "lemma1";
  TruncationSpec spec{3, 6, TruncationShape::TotalDegree};
  Lemma1Report rep = verify_lemma1a(spec);
  out.pass = rep.pass;
  std::ostringstream os;
  os << "ordered decomposition counts vs 2^{k|alpha|} on TotalDegree(3,6): " << rep.checks
     << " checks, worst ratio " << rep.worst_ratio << " at alpha=" << rep.worst.alpha.str()
     << " k=" << rep.worst.k;
  out.lines.push_back(os.str());
  out.details["truncation"] = {{"m", spec.m}, {"n", spec.n}, {"shape", shape_name(spec.shape)}};
  out.details["checks"] = rep.checks;
  out.details["worst_ratio"] = rep.worst_ratio;
  out.details["worst_alpha"] = rep.worst.alpha.str();
  out.details["worst_k"] = rep.worst.k;
  out.details["violations"] = rep.violations.size();
  return out;
}

nlohmann::ordered_json lemma2_items_json(const Lemma2Report& rep) {
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const Lemma2Item& item : rep.items) {
    items.push_back({{"name", item.name},
                     {"n", item.n},
                     {"quadrature", item.quadrature},
                     {"reference", item.reference},
                     {"ratio", item.ratio},
                     {"is_equality", item.is_equality},
                     {"pass", item.pass}});
  }
  return items;
}

CheckOutcome check_lemma2(VerifyContext& ctx) {
  CheckOutcome out;
  out.name = "lemma2";
  const double T = ctx.loaded.data.op.horizon();
  const std::pair<const char*, SemigroupEnvelope> envelopes[] = {
      {"scenario", ctx.loaded.data.env}, {"flat", SemigroupEnvelope{1.0, 0.0, 0.0}}};
  for (const auto& [label, env] : envelopes) {
    Lemma2Report rep = verify_lemma2(env, T, 5);
    out.pass = out.pass && rep.pass;
    double worst_eq = 0.0, worst_ineq = 0.0;
    for (const Lemma2Item& item : rep.items) {
      if (item.is_equality)
        worst_eq = std::max(worst_eq, std::abs(item.quadrature - item.reference) /
                                          std::max(std::abs(item.reference), 1e-300));
      else
        worst_ineq = std::max(worst_ineq, item.ratio);
    }
    std::ostringstream os;
    os << label << " envelope (kappa=" << env.kappa() << "): worst identity deviation "
       << worst_eq << ", worst bound ratio " << worst_ineq;
    out.lines.push_back(os.str());
    out.details[label] = {{"kappa", env.kappa()},
                          {"pass", rep.pass},
                          {"items", lemma2_items_json(rep)}};
  }
  return out;
}

CheckOutcome check_thm1(VerifyContext& ctx) {
  CheckOutcome out;
  out.name = "thm1";
  const ScenarioData& sc = ctx.loaded.data;
  const GridField* q0 = sc.Q.find(MultiIndex{});
  GridField q = q0 ? *q0 : GridField(sc.op.J, sc.op.boundary);
  const Trajectory* f0 = sc.F.find(MultiIndex{});
  Trajectory f = f0 ? *f0
                    : Trajectory::constant(sc.op.dt, sc.op.steps,
                                           GridField(sc.op.J, sc.op.boundary));
  const GridField* g0 = sc.G.find(MultiIndex{});
  GridField g = g0 ? *g0 : GridField(sc.op.J, sc.op.boundary);

  Theorem1Report rep = verify_theorem1_bound(sc.op, sc.env, q, f, g);
  out.pass = rep.degenerate || rep.max_ratio <= 1.0 + 1e-8;
  std::ostringstream os;
  if (rep.degenerate)
    os << "mean equation has zero data; bound degenerate and trivially satisfied";
  else
    os << "mean solution vs envelope: max ratio " << rep.max_ratio << " at step "
       << rep.argmax_step << ", sup norm " << rep.sup_norm_u;
  out.lines.push_back(os.str());
  out.details["max_ratio"] = rep.max_ratio;
  out.details["argmax_step"] = rep.argmax_step;
  out.details["degenerate"] = rep.degenerate;
  out.details["sup_norm_u"] = rep.sup_norm_u;
  return out;
}

std::vector<int> quarter_steps(int steps) {
  std::vector<int> ks;
  for (int k : {steps / 4, steps / 2, steps}) {
    if (k < 1) k = 1;
    if (ks.empty() || ks.back() != k) ks.push_back(k);
  }
  return ks;
}

CheckOutcome check_eq3(VerifyContext& ctx, const std::string& out_dir) {
  CheckOutcome out;
  out.name = "eq3";
  const ScenarioData& sc = ctx.loaded.data;
  const ChaosTrajectory& U = ctx.solution().U;
  out.details["reports"] = nlohmann::ordered_json::array();
  for (int k : quarter_steps(sc.op.steps)) {
    BoundReport rep = verify_eq3_bounds(sc, U, k * sc.op.dt);
    std::int64_t ordering_violations = 0;
    for (const BoundRecord& rec : rep.records)
      if (!rec.exact_skipped && rec.rhs_exact > rec.rhs_coarse * (1.0 + 1e-12))
        ++ordering_violations;
    out.pass = out.pass && rep.pass && ordering_violations == 0;
    std::ostringstream os;
    os << "t=" << rep.t << ": max exact ratio " << rep.max_ratio_exact << ", max coarse ratio "
       << rep.max_ratio_coarse << ", skipped " << rep.skipped << ", ordering violations "
       << ordering_violations;
    out.lines.push_back(os.str());
    out.details["reports"].push_back(bound_report_to_json(rep));
    if (!out_dir.empty())
      write_file(out_dir + "/eq3_step" + std::to_string(k) + ".csv", bound_report_to_csv(rep));
  }
  return out;
}

CheckOutcome check_summability(VerifyContext& ctx, const std::string& out_dir) {
  CheckOutcome out;
  out.name = "summability";
  const ScenarioData& sc = ctx.loaded.data;
  const ChaosTrajectory& U = ctx.solution().U;
  SummabilityReport rep = summability_report(sc, U, ctx.loaded.p_list);

  const double T = sc.op.horizon();
  bool cross_ok = true;
  bool decay_ok = true;
  for (const SummabilityEntry& e : rep.entries) {
    double oracle = kondratiev_norm_sq(sc.G, e.p).partial_sum +
                    T * T * kondratiev_norm_sq(sc.F, e.p).partial_sum;
    if (std::abs(e.S1_plus_T2_S2 - oracle) > 1e-12 * std::max(1.0, oracle)) cross_ok = false;
    if (e.p >= rep.p_threshold - 1e-12 && !e.decays) decay_ok = false;
  }
  out.pass = cross_ok && decay_ok;
  std::ostringstream os;
  os << "coupling product " << rep.product << " (|product-1|=" << rep.distance_from_1
     << "), s=" << rep.s << ", s1=" << rep.s1 << ", threshold p=" << rep.p_threshold
     << "; data-norm cross-check " << (cross_ok ? "consistent" : "INCONSISTENT")
     << ", level decay past threshold " << (decay_ok ? "holds" : "VIOLATED");
  out.lines.push_back(os.str());
  for (const SummabilityEntry& e : rep.entries) {
    std::ostringstream ol;
    ol << "p=" << e.p << ": S1+T^2 S2=" << e.S1_plus_T2_S2 << ", |U| sum "
       << e.u_norm.partial_sum << ", max level ratio " << e.max_level_ratio
       << (e.decays ? " (geometric)" : "");
    out.lines.push_back(ol.str());
  }
  out.details = summability_report_to_json(rep);
  out.details["cross_check_consistent"] = cross_ok;
  out.details["decay_past_threshold"] = decay_ok;
  if (!out_dir.empty())
    write_file(out_dir + "/summability.csv", summability_report_to_csv(rep));
  return out;
}

CheckOutcome check_oracle(VerifyContext& ctx) {
  CheckOutcome out;
  out.name = "oracle";
  const ScenarioData& sc = ctx.loaded.data;
  const ChaosTrajectory& recur = ctx.solution().U;
  ChaosTrajectory block = solve_block_oracle(sc);
  TrajectoryComparison cmp = compare_trajectories(recur, block);
  out.pass = cmp.max_rel <= 1e-10;
  std::ostringstream os;
  os << "recursion vs block solve: max relative deviation " << cmp.max_rel << " at "
     << cmp.argmax.str() << " step " << cmp.argmax_step;
  out.lines.push_back(os.str());
  out.details["max_rel"] = cmp.max_rel;
  out.details["max_abs"] = cmp.max_abs;
  out.details["argmax_index"] = cmp.argmax.str();
  out.details["argmax_step"] = cmp.argmax_step;
  return out;
}

CheckOutcome check_mc(VerifyContext& ctx) {
  CheckOutcome out;
  out.name = "mc";
  RngConfig cfg;
  cfg.seed = ctx.loaded.seed;
  constexpr std::int64_t kSamples = 1000000;
  OrthogonalityReport rep = mc_orthogonality(2, 3, kSamples, cfg);
  out.pass = rep.pass;
  std::ostringstream os;
  os << "Hermite orthogonality over " << rep.checks.size() << " pairs at N=" << rep.samples
     << ": worst sigma " << rep.worst_sigma;
  out.lines.push_back(os.str());
  out.details["pairs"] = rep.checks.size();
  out.details["samples"] = rep.samples;
  out.details["worst_sigma"] = rep.worst_sigma;
  out.details["seed"] = ctx.loaded.seed;
  return out;
}

}  // namespace

int cmd_solve(const std::string& scenario_path, const CommandOptions& opts, std::ostream& log) {
  std::string text = read_file(scenario_path);
  LoadedScenario loaded = load_scenario_string(text, scenario_path);
  if (opts.seed) loaded.seed = *opts.seed;
  if (!opts.out_dir.empty()) loaded.output_dir = opts.out_dir;

  auto start = std::chrono::steady_clock::now();
  SolveResult res = solve_chaos_system(loaded.data, SolveOptions{opts.threads, false});
  double wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();

  make_output_dir(loaded.output_dir);
  write_file(loaded.output_dir + "/norms.csv", norms_csv(res.U));
  write_file(loaded.output_dir + "/u_final.json",
             chaos_to_json(res.U.slice(res.U.steps())).dump(2) + "\n");

  nlohmann::ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = "solve";
  manifest["scenario"] = loaded.data.name;
  manifest["scenario_path"] = scenario_path;
  manifest["input_hash"] = hex64(fnv1a64(text));
  manifest["seed"] = loaded.seed;
  manifest["threads"] = opts.threads;
  manifest["coefficients"] = res.U.coefficients().size();
  manifest["levels"] = res.stats.levels;
  manifest["per_level_counts"] = res.stats.per_level_counts;
  manifest["dropped_couplings"] = res.stats.dropped_couplings;
  manifest["warnings"] = loaded.warnings;
  manifest["wall_ms"] = wall_ms;
  manifest["timestamp"] = now_iso8601();
  write_file(loaded.output_dir + "/manifest.json", manifest.dump(2) + "\n");

  for (const std::string& w : loaded.warnings) log << "warning: " << w << "\n";
  log << "solved '" << loaded.data.name << "': " << res.U.coefficients().size()
      << " coefficients over " << loaded.data.op.steps << " steps -> " << loaded.output_dir
      << "\n";
  return 0;
}

int cmd_verify(const std::string& scenario_path, const std::string& check,
               const CommandOptions& opts, std::ostream& log) {
  std::string text = read_file(scenario_path);
  LoadedScenario loaded = load_scenario_string(text, scenario_path);
  if (opts.seed) loaded.seed = *opts.seed;
  if (!opts.out_dir.empty()) loaded.output_dir = opts.out_dir;
  make_output_dir(loaded.output_dir);
  for (const std::string& w : loaded.warnings) log << "warning: " << w << "\n";

  VerifyContext ctx{loaded, opts.threads, std::nullopt};

  const std::vector<std::string> all{"lemma1", "lemma2",      "thm1", "eq3",
                                     "summability", "oracle", "mc"};
  std::vector<std::string> selected;
  if (check == "all")
    selected = all;
  else if (std::find(all.begin(), all.end(), check) != all.end())
    selected = {check};
  else
    throw ValidationError("unknown check '" + check +
                          "' (expected lemma1, lemma2, thm1, eq3, summability, oracle, mc or all)");

  bool pass = true;
  nlohmann::ordered_json report;
  report["scenario"] = loaded.data.name;
  report["scenario_path"] = scenario_path;
  report["input_hash"] = hex64(fnv1a64(text));
  report["check"] = check;
  report["warnings"] = loaded.warnings;
  report["results"] = nlohmann::ordered_json::array();

  for (const std::string& name : selected) {
    CheckOutcome outcome;
    if (name == "lemma1")
      outcome = check_lemma1(ctx);
    else if (name == "lemma2")
      outcome = check_lemma2(ctx);
    else if (name == "thm1")
      outcome = check_thm1(ctx);
    else if (name == "eq3")
      outcome = check_eq3(ctx, loaded.output_dir);
    else if (name == "summability")
      outcome = check_summability(ctx, loaded.output_dir);
    else if (name == "oracle")
      outcome = check_oracle(ctx);
    else
      outcome = check_mc(ctx);
    pass = pass && outcome.pass;
    print_outcome(outcome, log);
    nlohmann::ordered_json entry;
    entry["name"] = outcome.name;
    entry["pass"] = outcome.pass;
    entry["details"] = outcome.details;
    report["results"].push_back(std::move(entry));
  }
  report["pass"] = pass;
  write_file(loaded.output_dir + "/verify_" + check + ".json", report.dump(2) + "\n");
  log << (pass ? "all checks passed" : "CHECK FAILURES (see report)") << "\n";
  return pass ? 0 : 1;
}

int cmd_series(const std::vector<double>& ps, int m_max, int n, TruncationShape shape,
               const std::string& out_dir, std::ostream& log) {
  if (ps.empty()) throw ValidationError("series needs at least one p value");
  if (m_max < 1) throw ValidationError("series needs m >= 1");
  if (n < 0) throw ValidationError("series needs n >= 0");

  std::string csv = "p,m,n,shape,partial_sum,closed_form\n";
  for (double p : ps) {
    for (int m = 1; m <= m_max; ++m) {
      TruncationSpec spec{m, n, shape};
      double partial = zeta_sum(p, spec);
      csv += format_double(p);
      csv += ',' + std::to_string(m);
      csv += ',' + std::to_string(n);
      csv += ',' + shape_name(shape);
      csv += ',' + format_double(partial);
      csv += ',';
      if (shape == TruncationShape::Box) csv += format_double(zeta_box_product(p, m, n));
      csv += '\n';
      log << "p=" << p << " m=" << m << " n=" << n << " sum=" << partial << "\n";
    }
  }
  if (!out_dir.empty()) {
    make_output_dir(out_dir);
    write_file(out_dir + "/series.csv", csv);
    log << "wrote " << out_dir << "/series.csv\n";
  }
  return 0;
}

}  // namespace wickpde
