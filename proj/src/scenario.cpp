#include "wickpde/scenario.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "wickpde/util.hpp"

namespace wickpde {

namespace {

std::string path_join(const std::string& ctx, const std::string& key) {
  return ctx.empty() ? key : ctx + "." + key;
}

const nlohmann::json& require_key(const nlohmann::json& j, const std::string& key,
                                  const std::string& ctx) {
  if (!j.is_object())
    throw ValidationError("scenario: '" + (ctx.empty() ? std::string("<root>") : ctx) +
                          "' must be an object");
  auto it = j.find(key);
  if (it == j.end())
    throw ValidationError("scenario: missing key '" + path_join(ctx, key) + "'");
  return *it;
}

double as_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number())
    throw ValidationError("scenario: '" + where + "' must be a number");
  return j.get<double>();
}

int as_int(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer())
    throw ValidationError("scenario: '" + where + "' must be an integer");
  return j.get<int>();
}

std::string as_string(const nlohmann::json& j, const std::string& where) {
  if (!j.is_string())
    throw ValidationError("scenario: '" + where + "' must be a string");
  return j.get<std::string>();
}

double get_number(const nlohmann::json& j, const std::string& key, const std::string& ctx) {
  return as_number(require_key(j, key, ctx), path_join(ctx, key));
}

int get_int(const nlohmann::json& j, const std::string& key, const std::string& ctx) {
  return as_int(require_key(j, key, ctx), path_join(ctx, key));
}

std::string get_string(const nlohmann::json& j, const std::string& key, const std::string& ctx) {
  return as_string(require_key(j, key, ctx), path_join(ctx, key));
}

MultiIndex index_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array())
    throw ValidationError("scenario: '" + where + "' must be an array of exponents");
  std::vector<int> dense;
  for (const auto& v : j) dense.push_back(as_int(v, where));
  for (int e : dense)
    if (e < 0) throw ValidationError("scenario: '" + where + "' has a negative exponent");
  return MultiIndex::from_dense(dense);
}

double shape_value(const std::string& kind, double amplitude, int mode, double center,
                   double width, double x, const std::string& where) {
  if (kind == "constant") return amplitude;
  if (kind == "sine") return amplitude * std::sin(mode * M_PI * x);
  if (kind == "bump") {
    double z = (x - center) / width;
    return amplitude * std::exp(-z * z);
  }
  throw ValidationError("scenario: '" + where + "' has unknown kind '" + kind +
                        "' (expected constant, sine, bump or values)");
}

FieldEntrySpec entry_from_json(const nlohmann::json& j, const std::string& where) {
  FieldEntrySpec spec;
  spec.index = index_from_json(require_key(j, "index", where), path_join(where, "index"));
  if (j.contains("values")) {
    spec.kind = "values";
    const nlohmann::json& vals = j.at("values");
    if (!vals.is_array())
      throw ValidationError("scenario: '" + path_join(where, "values") + "' must be an array");
    for (const auto& v : vals) spec.values.push_back(as_number(v, path_join(where, "values")));
    return spec;
  }
  spec.kind = get_string(j, "kind", where);
  spec.amplitude = get_number(j, "amplitude", where);
  if (j.contains("mode")) spec.mode = as_int(j.at("mode"), path_join(where, "mode"));
  if (j.contains("center")) spec.center = as_number(j.at("center"), path_join(where, "center"));
  if (j.contains("width")) spec.width = as_number(j.at("width"), path_join(where, "width"));
  if (spec.kind == "bump" && spec.width <= 0.0)
    throw ValidationError("scenario: '" + path_join(where, "width") + "' must be positive");
  return spec;
}

FieldSpec field_from_json(const nlohmann::json& j, const std::string& ctx) {
  FieldSpec spec;
  if (j.contains("entries")) {
    const nlohmann::json& entries = j.at("entries");
    if (!entries.is_array())
      throw ValidationError("scenario: '" + path_join(ctx, "entries") + "' must be an array");
    int i = 0;
    for (const auto& e : entries)
      spec.entries.push_back(
          entry_from_json(e, path_join(ctx, "entries[" + std::to_string(i++) + "]")));
  }
  if (j.contains("decay")) {
    const nlohmann::json& d = j.at("decay");
    const std::string where = path_join(ctx, "decay");
    DecaySpec decay;
    decay.a = get_number(d, "a", where);
    if (d.contains("r")) decay.r = as_number(d.at("r"), path_join(where, "r"));
    if (d.contains("rho")) decay.rho = as_number(d.at("rho"), path_join(where, "rho"));
    if (d.contains("kind")) decay.kind = as_string(d.at("kind"), path_join(where, "kind"));
    if (d.contains("mode")) decay.mode = as_int(d.at("mode"), path_join(where, "mode"));
    if (d.contains("center")) decay.center = as_number(d.at("center"), path_join(where, "center"));
    if (d.contains("width")) decay.width = as_number(d.at("width"), path_join(where, "width"));
    if (decay.r <= 0.0)
      throw ValidationError("scenario: '" + path_join(where, "r") + "' must be positive");
    spec.decay = decay;
  }
  return spec;
}

}  // namespace

GridField realize_entry(const FieldEntrySpec& spec, int J, Boundary bc) {
  if (spec.kind == "values") {
    if (static_cast<int>(spec.values.size()) != J + 1)
      throw ValidationError("scenario: inline values for " + spec.index.str() + " need exactly " +
                            std::to_string(J + 1) + " samples");
    return GridField::from_values(bc, spec.values);
  }
  return GridField::sample(J, bc, [&](double x) {
    return shape_value(spec.kind, spec.amplitude, spec.mode, spec.center, spec.width, x,
                       "entry " + spec.index.str());
  });
}

ChaosField realize_field(const FieldSpec& spec, const TruncationSpec& trunc, int J, Boundary bc) {
  ChaosField field(trunc, J, bc);
  for (const FieldEntrySpec& entry : spec.entries) {
    if (!trunc.admits(entry.index))
      throw ValidationError("scenario: index " + entry.index.str() +
                            " lies outside the truncation");
    field.set(entry.index, realize_entry(entry, J, bc));
  }
  if (spec.decay) {
    const DecaySpec& d = *spec.decay;
    for (const MultiIndex& idx : enumerate_indices(trunc)) {
      if (field.find(idx)) continue;  // explicit entries win
      double amplitude = d.a * std::pow(d.r, idx.order()) * idx.weight_2n_pow(-d.rho);
      if (amplitude == 0.0) continue;
      FieldEntrySpec e;
      e.index = idx;
      e.kind = d.kind;
      e.amplitude = amplitude;
      e.mode = d.mode;
      e.center = d.center;
      e.width = d.width;
      field.set(idx, realize_entry(e, J, bc));
    }
  }
  return field;
}

LoadedScenario scenario_from_json(const nlohmann::json& j) {
  std::vector<std::string> warnings;
  std::string name = get_string(j, "name", "");
  if (name.empty()) throw ValidationError("scenario: 'name' must not be empty");

  const nlohmann::json& jt = require_key(j, "truncation", "");
  TruncationSpec trunc;
  trunc.m = get_int(jt, "m", "truncation");
  trunc.n = get_int(jt, "n", "truncation");
  trunc.shape = shape_from_name(get_string(jt, "shape", "truncation"));
  trunc.validate();

  const nlohmann::json& jg = require_key(j, "grid", "");
  int J = get_int(jg, "J", "grid");
  Boundary bc = boundary_from_name(get_string(jg, "boundary", "grid"));

  const nlohmann::json& jtime = require_key(j, "time", "");
  OperatorSpec op;
  op.boundary = bc;
  op.J = J;
  op.scheme = scheme_from_name(get_string(jtime, "scheme", "time"));
  op.dt = get_number(jtime, "dt", "time");
  double T = get_number(jtime, "T", "time");
  if (op.dt <= 0.0) throw ValidationError("scenario: 'time.dt' must be positive");
  if (T <= 0.0) throw ValidationError("scenario: 'time.T' must be positive");
  long steps = std::lround(T / op.dt);
  if (steps < 1 || std::abs(static_cast<double>(steps) * op.dt - T) > 1e-9 * std::max(1.0, T))
    throw ValidationError("scenario: 'time.T' must be a whole number of dt steps");
  op.steps = static_cast<int>(steps);
  op.validate();

  SemigroupEnvelope env;
  if (j.contains("envelope")) {
    const nlohmann::json& je = j.at("envelope");
    if (je.contains("M")) env.M = as_number(je.at("M"), "envelope.M");
    if (je.contains("w")) env.w = as_number(je.at("w"), "envelope.w");
  }

  ChaosField Q = j.contains("potential")
                     ? realize_field(field_from_json(j.at("potential"), "potential"), trunc, J, bc)
                     : ChaosField(trunc, J, bc);

  // Enforce the dominance hypothesis on generated potentials: coefficients
  // are clipped down to the mean's sup, never silently accepted.
  {
    const GridField* q0 = Q.find(MultiIndex{});
    double q0sup = q0 ? q0->linf_norm() : 0.0;
    ChaosField clipped(trunc, J, bc);
    for (const auto& [idx, f] : Q.coefficients()) {
      double sup = f.linf_norm();
      if (!idx.is_zero() && sup > q0sup) {
        GridField g = f;
        g.scale(sup > 0.0 ? q0sup / sup : 0.0);
        std::ostringstream os;
        os << "potential coefficient " << idx.str() << " clipped from sup " << sup
           << " to the mean's " << q0sup;
        warnings.push_back(os.str());
        clipped.set(idx, std::move(g));
      } else {
        clipped.set(idx, f);
      }
    }
    Q = std::move(clipped);
  }

  ChaosField G = j.contains("initial")
                     ? realize_field(field_from_json(j.at("initial"), "initial"), trunc, J, bc)
                     : ChaosField(trunc, J, bc);

  // Force entries are stationary shapes; the trajectory repeats them at every
  // step boundary.
  ChaosTrajectory F(trunc, J, bc, op.dt, op.steps);
  if (j.contains("force")) {
    ChaosField stationary = realize_field(field_from_json(j.at("force"), "force"), trunc, J, bc);
    for (const auto& [idx, f] : stationary.coefficients())
      F.set(idx, Trajectory::constant(op.dt, op.steps, f));
  }

  ScenarioData data{name, trunc, op, env, std::move(Q), std::move(F), std::move(G)};
  data.env.q0_inf = data.q0_sup();
  data.validate();
  for (std::string& w : data.hypothesis_warnings()) warnings.push_back(std::move(w));

  LoadedScenario loaded{std::move(data), 123456789, "", {2.0, 4.0, 6.0, 8.0}, std::move(warnings)};

  if (j.contains("seed")) {
    long long seed = j.at("seed").is_number_integer()
                         ? j.at("seed").get<long long>()
                         : throw ValidationError("scenario: 'seed' must be an integer");
    if (seed < 0) throw ValidationError("scenario: 'seed' must be nonnegative");
    loaded.seed = static_cast<std::uint64_t>(seed);
  }
  loaded.output_dir = j.contains("output") ? as_string(j.at("output"), "output") : "out/" + name;
  if (j.contains("p_list")) {
    const nlohmann::json& ps = j.at("p_list");
    if (!ps.is_array() || ps.empty())
      throw ValidationError("scenario: 'p_list' must be a non-empty array");
    loaded.p_list.clear();
    for (const auto& p : ps) loaded.p_list.push_back(as_number(p, "p_list"));
  }
  return loaded;
}

LoadedScenario load_scenario_string(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min(e.byte, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ValidationError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

LoadedScenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario_string(buf.str(), path);
}

ScenarioData random_chaos_scenario(std::uint64_t seed, const TruncationSpec& trunc,
                                   const OperatorSpec& op) {
  trunc.validate();
  op.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mean_amp(0.4, 0.9);
  std::uniform_real_distribution<double> amp(0.05, 0.35);
  std::uniform_int_distribution<int> mode(1, 3);
  std::bernoulli_distribution keep(0.6);

  ChaosField Q(trunc, op.J, op.boundary);
  ChaosField G(trunc, op.J, op.boundary);
  ChaosTrajectory F(trunc, op.J, op.boundary, op.dt, op.steps);

  auto sine = [&](double a, int k) {
    return GridField::sample(op.J, op.boundary,
                             [&](double x) { return a * std::sin(k * M_PI * x); });
  };
  Q.set(MultiIndex{}, GridField::sample(op.J, op.boundary,
                                        [v = mean_amp(rng)](double) { return v; }));
  for (const MultiIndex& idx : enumerate_indices(trunc)) {
    if (!idx.is_zero() && keep(rng)) Q.set(idx, sine(amp(rng), mode(rng)));
    if (keep(rng)) G.set(idx, sine(amp(rng), mode(rng)));
    if (keep(rng)) F.set(idx, Trajectory::constant(op.dt, op.steps, sine(amp(rng), mode(rng))));
  }

  ScenarioData sc{"random-" + std::to_string(seed), trunc,        op, SemigroupEnvelope{},
                  std::move(Q),                     std::move(F), std::move(G)};
  sc.env = SemigroupEnvelope{1.0, 0.0, sc.q0_sup()};
  sc.validate();
  return sc;
}

}  // namespace wickpde
