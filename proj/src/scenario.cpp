#include "fpoc/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "fpoc/errors.hpp"

namespace fpoc {

using nlohmann::json;

namespace {

/// Typed access to one JSON object. Records the keys it reads so unknown
/// keys can be reported.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ScenarioError(path_, fmt::format("'{}' must be an object", path_));
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) {
    used_.insert(key);
    return node_.contains(key);
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? as_number(key) : fallback;
  }
  double number(const std::string& key) {
    if (!has(key)) throw ScenarioError(field(key), fmt::format("missing required field '{}'", field(key)));
    return as_number(key);
  }
  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ScenarioError(field(key), fmt::format("'{}' must be a non-negative integer", field(key)));
    }
    return v.get<std::size_t>();
  }
  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_boolean()) throw ScenarioError(field(key), fmt::format("'{}' must be true or false", field(key)));
    return v.get<bool>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_string()) throw ScenarioError(field(key), fmt::format("'{}' must be a string", field(key)));
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::size_t n) {
    const json& v = node_.at(key);
    if (!v.is_array() || v.size() != n) {
      throw ScenarioError(field(key), fmt::format("'{}' must be an array of {} numbers", field(key), n));
    }
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ScenarioError(field(key), fmt::format("'{}' must contain numbers", field(key)));
      out.push_back(x.get<double>());
    }
    return out;
  }
  Section child(const std::string& key) {
    used_.insert(key);
    return Section(node_.at(key), field(key));
  }

  void reject_unknown() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!used_.count(it.key())) {
        throw ScenarioError(field(it.key()), fmt::format("unknown field '{}'", field(it.key())));
      }
    }
  }

 private:
  double as_number(const std::string& key) const {
    const json& v = node_.at(key);
    if (!v.is_number()) throw ScenarioError(field(key), fmt::format("'{}' must be a number", field(key)));
    return v.get<double>();
  }

  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

const std::vector<std::string>& base_parameter_names() {
  static const std::vector<std::string> names = {
      "a", "b", "c", "e", "f", "p", "m", "j", "k", "q", "r1", "r2",
      "alpha", "beta", "chemo_kill", "beta_N", "beta_L"};
  return names;
}

/// Throws one error listing every missing key.
void require_all(Section& sec, const std::vector<std::string>& names) {
  std::vector<std::string> missing;
  for (const auto& n : names) {
    if (!sec.has(n)) missing.push_back(n);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + sec.field(m);
    throw ScenarioError(sec.field(missing.front()),
                        fmt::format("missing mandatory base parameters: {}", list));
  }
}

template <class Fn>
void checked(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const ScenarioError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ScenarioError(field, fmt::format("{}: {}", field, e.what()));
  }
}

struct ModelBlock {
  NonDimParams params;
  ScalingConstants scaling;
};

ModelBlock read_model(Section& model) {
  ModelBlock out;
  const std::string form_name = model.text("kill_term", "consistent");
  KillTermForm form;
  if (form_name == "consistent") {
    form = KillTermForm::consistent;
  } else if (form_name == "printed") {
    form = KillTermForm::printed;
  } else {
    throw ScenarioError(model.field("kill_term"), "kill_term must be 'consistent' or 'printed'");
  }

  const bool dimensional = model.has("dimensional");
  const bool direct = model.has("nondimensional");
  if (dimensional == direct) {
    throw ScenarioError(model.field("dimensional"),
                        "model needs exactly one of 'dimensional' or 'nondimensional'");
  }
  if (dimensional) {
    Section dim = model.child("dimensional");
    require_all(dim, base_parameter_names());
    DimensionalParams p;
    p.a = dim.number("a");
    p.b = dim.number("b");
    p.c = dim.number("c");
    p.e = dim.number("e");
    p.f = dim.number("f");
    p.p = dim.number("p");
    p.m = dim.number("m");
    p.j = dim.number("j");
    p.k = dim.number("k");
    p.q = dim.number("q");
    p.r1 = dim.number("r1");
    p.r2 = dim.number("r2");
    p.alpha = dim.number("alpha");
    p.beta = dim.number("beta");
    const auto kill = dim.numbers("chemo_kill", kDim);
    std::copy(kill.begin(), kill.end(), p.chemo_kill.begin());
    p.immuno_nk = dim.number("beta_N");
    p.immuno_cd8 = dim.number("beta_L");
    // d, l, s are overwritten by the patient triple.
    p.d = dim.number("d", 0.0);
    p.l = dim.number("l", 0.0);
    p.s = dim.number("s", 1.0);
    dim.reject_unknown();

    if (!model.has("scaling")) throw ScenarioError(model.field("scaling"), "missing required field 'model.scaling'");
    Section sc = model.child("scaling");
    require_all(sc, {"k1", "k2", "k3", "k4", "k5"});
    out.scaling = {sc.number("k1"), sc.number("k2"), sc.number("k3"), sc.number("k4"), sc.number("k5")};
    sc.reject_unknown();
    checked(model.field("scaling"), [&] { out.scaling.validate(); });
    checked(model.field("dimensional"), [&] { p.validate(); });
    out.params = nondimensionalize(p, out.scaling, form);
  } else {
    Section nd = model.child("nondimensional");
    auto names = base_parameter_names();
    names.push_back("tumor_cd8_scale");
    require_all(nd, names);
    NonDimParams& q = out.params;
    q.a = nd.number("a");
    q.b = nd.number("b");
    q.c = nd.number("c");
    q.e = nd.number("e");
    q.f = nd.number("f");
    q.p = nd.number("p");
    q.m = nd.number("m");
    q.j = nd.number("j");
    q.k = nd.number("k");
    q.q = nd.number("q");
    q.r1 = nd.number("r1");
    q.r2 = nd.number("r2");
    q.alpha = nd.number("alpha");
    q.beta = nd.number("beta");
    const auto kill = nd.numbers("chemo_kill", kDim);
    std::copy(kill.begin(), kill.end(), q.chemo_kill.begin());
    q.immuno_nk = nd.number("beta_N");
    q.immuno_cd8 = nd.number("beta_L");
    q.tumor_cd8_scale = nd.number("tumor_cd8_scale");
    q.kill_form = form;
    nd.reject_unknown();
    if (model.has("scaling")) {
      Section sc = model.child("scaling");
      out.scaling = {sc.number("k1"), sc.number("k2"), sc.number("k3"), sc.number("k4"), sc.number("k5")};
      sc.reject_unknown();
      checked(model.field("scaling"), [&] { out.scaling.validate(); });
    }
    checked(model.field("nondimensional"), [&] { dimensionalize(q, out.scaling).validate(); });
    if (!(q.tumor_cd8_scale > 0.0)) {
      throw ScenarioError(nd.field("tumor_cd8_scale"), "tumor_cd8_scale must be positive");
    }
  }
  model.reject_unknown();
  return out;
}

PatientTriple read_patient(Section sec) {
  require_all(sec, {"d", "l", "s"});
  PatientTriple p{sec.number("d"), sec.number("l"), sec.number("s")};
  sec.reject_unknown();
  if (!(p.d >= 0.0) || !(p.l >= 0.0) || !(p.s > 0.0)) {
    throw ScenarioError(sec.field("s"), fmt::format("invalid patient triple ({}, {}, {}) in '{}'",
                                                    p.d, p.l, p.s, sec.field("")));
  }
  return p;
}

void require_positive(Section& sec, const std::string& key, double v) {
  if (!(v > 0.0)) throw ScenarioError(sec.field(key), fmt::format("'{}' must be positive", sec.field(key)));
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

}  // namespace

Grid4D Scenario::make_grid() const { return Grid4D(grid.lower, grid.upper, grid.points); }

NonDimParams Scenario::target_params() const {
  return params.with_patient(target.patient.d, target.patient.l, target.patient.s);
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ScenarioError("", fmt::format("{}: syntax error on line {}: {}", source,
                                        line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what()));
  }
  Scenario s;
  Section root(doc, "");
  s.name = root.text("name", source);

  if (!root.has("model")) throw ScenarioError("model", "missing required field 'model'");
  Section model = root.child("model");
  const ModelBlock mb = read_model(model);
  s.scaling = mb.scaling;

  if (!root.has("patient")) throw ScenarioError("patient", "missing required field 'patient'");
  s.patient = read_patient(root.child("patient"));
  s.params = mb.params.with_patient(s.patient.d, s.patient.l, s.patient.s);

  if (!root.has("initial_state")) throw ScenarioError("initial_state", "missing required field 'initial_state'");
  const auto x0 = root.numbers("initial_state", kDim);
  std::copy(x0.begin(), x0.end(), s.initial_state.x.begin());
  s.initial_variance = root.number("initial_variance", s.initial_variance);
  require_positive(root, "initial_variance", s.initial_variance);

  if (root.has("grid")) {
    Section g = root.child("grid");
    s.grid.lower = g.number("lower", s.grid.lower);
    s.grid.upper = g.number("upper", s.grid.upper);
    s.grid.points = g.count("points", s.grid.points);
    g.reject_unknown();
    if (s.grid.points < 3) throw ScenarioError("grid.points", "grid.points must be at least 3");
    if (!(s.grid.upper > s.grid.lower) || s.grid.lower < 0.0) {
      throw ScenarioError("grid.upper", "grid bounds must satisfy 0 <= lower < upper");
    }
  }
  for (std::size_t a = 0; a < kDim; ++a) {
    if (!(s.initial_state[a] >= s.grid.lower && s.initial_state[a] <= s.grid.upper)) {
      throw ScenarioError("initial_state", "initial_state lies outside the grid box");
    }
  }

  if (root.has("time")) {
    Section t = root.child("time");
    s.time.final_time = t.number("final", s.time.final_time);
    s.time.steps = t.count("steps", s.time.steps);
    s.time.substeps = t.count("substeps", s.time.substeps);
    s.checkpoint_every = t.count("checkpoint_every", s.checkpoint_every);
    t.reject_unknown();
    checked("time", [&] { s.time.validate(); });
    if (s.checkpoint_every < 1) throw ScenarioError("time.checkpoint_every", "time.checkpoint_every must be >= 1");
  }

  if (root.has("dispersion")) {
    Section d = root.child("dispersion");
    s.dispersion.scale = d.number("scale", s.dispersion.scale);
    s.dispersion.exponent = d.number("exponent", s.dispersion.exponent);
    s.dispersion.floor = d.number("floor", s.dispersion.floor);
    d.reject_unknown();
    require_positive(d, "scale", s.dispersion.scale);
    require_positive(d, "floor", s.dispersion.floor);
    if (!(s.dispersion.exponent >= 0.0)) throw ScenarioError("dispersion.exponent", "dispersion.exponent must be >= 0");
  }

  if (root.has("objective")) {
    Section o = root.child("objective");
    s.weights.alpha = o.number("alpha", s.weights.alpha);
    s.weights.nu_chemo = o.number("nu_chemo", s.weights.nu_chemo);
    s.weights.nu_immuno = o.number("nu_immuno", s.weights.nu_immuno);
    o.reject_unknown();
    checked("objective", [&] { s.weights.validate(); });
  }

  if (root.has("doses")) {
    Section d = root.child("doses");
    s.doses.chemo_bound = d.number("chemo_bound", s.doses.chemo_bound);
    s.doses.immuno_bound = d.number("immuno_bound", s.doses.immuno_bound);
    s.doses.chemo_scale = d.number("chemo_scale", s.doses.chemo_scale);
    s.doses.immuno_scale = d.number("immuno_scale", s.doses.immuno_scale);
    d.reject_unknown();
    require_positive(d, "chemo_bound", s.doses.chemo_bound);
    require_positive(d, "immuno_bound", s.doses.immuno_bound);
    require_positive(d, "chemo_scale", s.doses.chemo_scale);
    require_positive(d, "immuno_scale", s.doses.immuno_scale);
  }

  if (root.has("target")) {
    Section t = root.child("target");
    if (t.has("patient")) s.target.patient = read_patient(t.child("patient"));
    s.target.anchors = t.count("anchors", s.target.anchors);
    s.target.variance = t.number("variance", s.target.variance);
    s.target.ode_steps = t.count("ode_steps", s.target.ode_steps);
    t.reject_unknown();
    if (s.target.anchors < 2) throw ScenarioError("target.anchors", "target.anchors must be at least 2");
    require_positive(t, "variance", s.target.variance);
    if (s.target.ode_steps < 1) throw ScenarioError("target.ode_steps", "target.ode_steps must be >= 1");
  }

  if (root.has("optimizer")) {
    Section o = root.child("optimizer");
    auto& c = s.optimizer;
    c.max_iterations = o.count("max_iterations", c.max_iterations);
    c.tolerance = o.number("tolerance", c.tolerance);
    c.initial_step = o.number("initial_step", c.initial_step);
    c.backtracking = o.number("backtracking", c.backtracking);
    c.sufficient_decrease = o.number("sufficient_decrease", c.sufficient_decrease);
    c.max_backtracks = o.count("max_backtracks", c.max_backtracks);
    c.smoothing = o.number("smoothing", c.smoothing);
    const std::string rep = o.text("gradient", "h1");
    if (rep == "h1") {
      c.representation = GradientRepresentation::h1;
    } else if (rep == "l2") {
      c.representation = GradientRepresentation::l2;
    } else {
      throw ScenarioError("optimizer.gradient", "optimizer.gradient must be 'h1' or 'l2'");
    }
    o.reject_unknown();
    checked("optimizer", [&] { c.validate(); });
  }

  if (root.has("oracle")) {
    Section o = root.child("oracle");
    s.oracle.paths = o.count("paths", s.oracle.paths);
    s.oracle.steps = o.count("steps", s.oracle.steps);
    s.oracle.noise_induced_drift = o.flag("noise_induced_drift", s.oracle.noise_induced_drift);
    o.reject_unknown();
    if (s.oracle.paths < 1 || s.oracle.steps < 1) throw ScenarioError("oracle", "oracle paths and steps must be >= 1");
  }

  if (root.has("gradcheck")) {
    Section g = root.child("gradcheck");
    s.gradcheck.directions = g.count("directions", s.gradcheck.directions);
    s.gradcheck.epsilon = g.number("epsilon", s.gradcheck.epsilon);
    s.gradcheck.tolerance = g.number("tolerance", s.gradcheck.tolerance);
    g.reject_unknown();
    require_positive(g, "epsilon", s.gradcheck.epsilon);
    require_positive(g, "tolerance", s.gradcheck.tolerance);
  }

  s.output_dir = root.text("output", s.output_dir);
  if (root.has("seed")) s.seed = root.count("seed", 0);
  root.reject_unknown();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("", fmt::format("cannot open scenario file {}", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

DimensionalDoses dimensionalize_controls(const ControlSchedule& u, const DoseSpec& doses) {
  DimensionalDoses out;
  for (double v : u.channel(0)) out.chemo.push_back(v * doses.chemo_scale);
  for (double v : u.channel(1)) out.immuno.push_back(v * doses.immuno_scale);
  return out;
}

}  // namespace fpoc
