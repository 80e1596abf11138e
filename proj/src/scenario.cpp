#include "fpt/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fpt {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& why) { throw ConfigError(path + ": " + why); }

/// One JSON object being read. Every key must be consumed before finish(), so typos surface as
/// unknown fields instead of silently taking defaults.
class Fields {
 public:
  Fields(const Json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) fail(label(), "expected an object");
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    if (!object_.contains(key)) fail(child(key), "required field missing");
    return object_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number()) fail(child(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  long long integer(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number_integer()) fail(child(key), "expected an integer");
    return v.get<long long>();
  }
  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const long long v = integer(key);
    if (v < -2147483647LL || v > 2147483647LL) fail(child(key), "out of range");
    return static_cast<int>(v);
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_number_unsigned()) fail(child(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_boolean()) fail(child(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_string()) fail(child(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) { return has(key) ? string(key) : fallback; }

  Vec2 vec2(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      fail(child(key), "expected [x, y]");
    return Vec2(v[0].get<double>(), v[1].get<double>());
  }
  Vec2 vec2(const std::string& key, const Vec2& fallback) { return has(key) ? vec2(key) : fallback; }

  Fields object(const std::string& key) { return Fields(at(key), child(key)); }

  const Json& array(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_array()) fail(child(key), "expected an array");
    return v;
  }

  void finish() const {
    for (const auto& item : object_.items())
      if (!seen_.count(item.key())) fail(child(item.key()), "unknown field");
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string label() const { return path_.empty() ? "scenario" : path_; }

 private:
  const Json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Make>
auto guarded(const std::string& path, Make&& make) {
  try {
    return make();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

Json vec2_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

ReferenceBoundary parse_boundary(Fields f) {
  const std::string kind = f.string("kind");
  const std::string path = f.label();
  ReferenceBoundary b;
  if (kind == "circle") {
    const double r = f.number("radius");
    const Vec2 c = f.vec2("center", Vec2::Zero());
    b = guarded(path, [&] { return ReferenceBoundary::circle(r, c); });
  } else if (kind == "ellipse") {
    const double a = f.number("a"), bb = f.number("b");
    const Vec2 c = f.vec2("center", Vec2::Zero());
    b = guarded(path, [&] { return ReferenceBoundary::ellipse(a, bb, c); });
  } else if (kind == "star") {
    const double r = f.number("radius"), eps = f.number("eps");
    const int k = f.integer("k", 0);
    const Vec2 c = f.vec2("center", Vec2::Zero());
    b = guarded(path, [&] { return ReferenceBoundary::star(r, eps, k, c); });
  } else if (kind == "superellipse") {
    const double a = f.number("a"), bb = f.number("b");
    const int n = f.integer("n", 0);
    const Vec2 c = f.vec2("center", Vec2::Zero());
    b = guarded(path, [&] { return ReferenceBoundary::superellipse(a, bb, n, c); });
  } else {
    fail(f.child("kind"), "expected circle, ellipse, star or superellipse, got \"" + kind + "\"");
  }
  f.finish();
  return b;
}

Json boundary_json(const ReferenceBoundary& b) {
  Json j;
  switch (b.family()) {
    case ReferenceBoundary::Family::circle:
      j = {{"kind", "circle"}, {"radius", b.a()}};
      break;
    case ReferenceBoundary::Family::ellipse:
      j = {{"kind", "ellipse"}, {"a", b.a()}, {"b", b.b()}};
      break;
    case ReferenceBoundary::Family::star:
      j = {{"kind", "star"}, {"radius", b.a()}, {"eps", b.eps()}, {"k", b.k()}};
      break;
    case ReferenceBoundary::Family::superellipse:
      j = {{"kind", "superellipse"}, {"a", b.a()}, {"b", b.b()}, {"n", b.k()}};
      break;
  }
  j["center"] = vec2_json(b.center());
  return j;
}

VelocityField parse_velocity(Fields f) {
  const std::string kind = f.string("kind");
  VelocityField v;
  if (kind == "zero") {
    v = VelocityField::zero();
  } else if (kind == "translation") {
    v = VelocityField::translation(f.vec2("vector"));
  } else if (kind == "rotation") {
    const double omega = f.number("omega");
    v = VelocityField::rotation(omega, f.vec2("center", Vec2::Zero()));
  } else if (kind == "scaling") {
    const Json& raw = f.array("coeffs");
    std::vector<double> coeffs;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (!raw[i].is_number()) fail(f.child("coeffs") + "[" + std::to_string(i) + "]", "expected a number");
      coeffs.push_back(raw[i].get<double>());
    }
    if (coeffs.empty()) fail(f.child("coeffs"), "needs at least one coefficient");
    v = VelocityField::scaling(std::move(coeffs), f.vec2("center", Vec2::Zero()));
  } else if (kind == "composite") {
    const Json& raw = f.array("terms");
    std::vector<VelocityField> terms;
    for (std::size_t i = 0; i < raw.size(); ++i)
      terms.push_back(parse_velocity(Fields(raw[i], f.child("terms") + "[" + std::to_string(i) + "]")));
    v = guarded(f.label(), [&] { return VelocityField::composite(std::move(terms)); });
  } else {
    fail(f.child("kind"), "expected zero, translation, rotation, scaling or composite, got \"" + kind + "\"");
  }
  f.finish();
  return v;
}

Json velocity_json(const VelocityField& v) {
  switch (v.kind()) {
    case VelocityField::Kind::zero:
      return {{"kind", "zero"}};
    case VelocityField::Kind::translation:
      return {{"kind", "translation"}, {"vector", vec2_json(v.vector())}};
    case VelocityField::Kind::rotation:
      return {{"kind", "rotation"}, {"omega", v.omega()}, {"center", vec2_json(v.center())}};
    case VelocityField::Kind::scaling:
      return {{"kind", "scaling"}, {"coeffs", v.coeffs()}, {"center", vec2_json(v.center())}};
    case VelocityField::Kind::composite: {
      Json terms = Json::array();
      for (const VelocityField& t : v.terms()) terms.push_back(velocity_json(t));
      return {{"kind", "composite"}, {"terms", terms}};
    }
  }
  return {};
}

SourceSpec parse_source(Fields f) {
  const std::string kind = f.string("kind");
  SourceSpec s;
  if (kind == "point") {
    s = SourceSpec::point(f.vec2("position"));
  } else if (kind == "bump") {
    const Vec2 c = f.vec2("center");
    const double m = f.number("m");
    if (!(m > 0.0)) fail(f.child("m"), "must be positive");
    s = SourceSpec::bump(c, m);
  } else {
    fail(f.child("kind"), "expected point or bump, got \"" + kind + "\"");
  }
  f.finish();
  return s;
}

Json source_json(const SourceSpec& s) {
  if (s.is_point()) return {{"kind", "point"}, {"position", vec2_json(s.as_point().position)}};
  return {{"kind", "bump"}, {"center", vec2_json(s.as_bump().center)}, {"m", s.as_bump().m}};
}

template <typename Enum>
Enum parse_enum(Fields& f, const std::string& key, Enum fallback,
                const std::vector<std::pair<const char*, Enum>>& names) {
  if (!f.has(key)) return fallback;
  const std::string value = f.string(key);
  std::string expected;
  for (const auto& [name, e] : names) {
    if (value == name) return e;
    expected += expected.empty() ? name : std::string(" | ") + name;
  }
  fail(f.child(key), "expected " + expected + ", got \"" + value + "\"");
}

template <typename Enum>
const char* enum_name(Enum e, const std::vector<std::pair<const char*, Enum>>& names) {
  for (const auto& [name, v] : names)
    if (v == e) return name;
  return "";
}

const std::vector<std::pair<const char*, SolveMode>> kModes = {{"march", SolveMode::march},
                                                              {"picard", SolveMode::picard}};
const std::vector<std::pair<const char*, TimeQuadrature>> kQuadratures = {{"product", TimeQuadrature::product},
                                                                         {"rectangle", TimeQuadrature::rectangle}};
const std::vector<std::pair<const char*, PicardSeed>> kSeeds = {
    {"march", PicardSeed::march}, {"zero", PicardSeed::zero}, {"rhs", PicardSeed::rhs}};
const std::vector<std::pair<const char*, OracleKind>> kOracles = {
    {"none", OracleKind::none}, {"disk", OracleKind::disk}, {"halfplane", OracleKind::halfplane}};

SolverConfig parse_solver(Fields f) {
  SolverConfig c;
  c.dt = f.number("dt", c.dt);
  c.nodes = f.integer("nodes", c.nodes);
  c.gamma = f.number("gamma", c.gamma);
  c.mode = parse_enum(f, "mode", c.mode, kModes);
  c.quadrature = parse_enum(f, "quadrature", c.quadrature, kQuadratures);
  c.window = f.number("window", c.window);
  c.picard_tol = f.number("picard_tol", c.picard_tol);
  c.picard_max_iters = f.integer("picard_max_iters", c.picard_max_iters);
  c.seed = parse_enum(f, "picard_seed", c.seed, kSeeds);
  f.finish();
  return c;
}

Json solver_json(const SolverConfig& c) {
  return {{"dt", c.dt},
          {"nodes", c.nodes},
          {"gamma", c.gamma},
          {"mode", enum_name(c.mode, kModes)},
          {"quadrature", enum_name(c.quadrature, kQuadratures)},
          {"window", c.window},
          {"picard_tol", c.picard_tol},
          {"picard_max_iters", c.picard_max_iters},
          {"picard_seed", enum_name(c.seed, kSeeds)}};
}

McConfig parse_montecarlo(Fields f) {
  McConfig c;
  c.paths = f.integer("paths", c.paths);
  c.step = f.number("step", c.step);
  c.seed = f.unsigned_integer("seed", c.seed);
  c.bridge_correction = f.boolean("bridge_correction", c.bridge_correction);
  f.finish();
  return c;
}

Json montecarlo_json(const McConfig& c) {
  return {{"paths", c.paths}, {"step", c.step}, {"seed", c.seed}, {"bridge_correction", c.bridge_correction}};
}

Json scenario_json(const Scenario& s) {
  Json domain = {{"boundary", boundary_json(s.boundary)},
                 {"marker", vec2_json(s.marker)},
                 {"velocity", velocity_json(s.velocity)},
                 {"flow_step", s.flow_step},
                 {"horizon", s.horizon}};
  return {{"format", kScenarioFormat},
          {"name", s.name},
          {"domain", domain},
          {"source", source_json(s.source)},
          {"solver", solver_json(s.solver)},
          {"montecarlo", montecarlo_json(s.montecarlo)},
          {"survival_stride", s.survival_stride},
          {"oracle", enum_name(s.oracle, kOracles)},
          {"output", s.output}};
}

}  // namespace

MovingDomain Scenario::domain() const { return MovingDomain(boundary, marker, FlowMap(velocity, flow_step), horizon); }

void Scenario::validate() const {
  if (!(horizon > 0.0)) fail("domain.horizon", "must be positive");
  if (!(flow_step > 0.0)) fail("domain.flow_step", "must be positive");
  if (survival_stride < 1) fail("survival_stride", "must be at least 1");
  solver.validate(horizon);
  McConfig mc = montecarlo;
  mc.horizon = horizon;
  mc.validate();
  MovingDomain d = [&] {
    try {
      return domain();
    } catch (const Error& e) {
      fail("domain", e.what());
    } catch (const std::invalid_argument& e) {
      fail("domain", e.what());
    }
  }();
  try {
    source.validate(d);
  } catch (const Error& e) {
    fail("source", e.what());
  }
  const bool still = velocity.kind() == VelocityField::Kind::zero;
  if (oracle == OracleKind::disk) {
    if (boundary.family() != ReferenceBoundary::Family::circle || !still)
      fail("oracle", "the disk oracle needs a static circle");
    if (!source.is_point() || (source.as_point().position - boundary.center()).norm() > 1e-12)
      fail("oracle", "the disk oracle needs a point source at the centre");
  }
  if (oracle == OracleKind::halfplane) {
    if (boundary.family() != ReferenceBoundary::Family::superellipse || !still)
      fail("oracle", "the half-plane oracle needs a static superellipse");
    if (!source.is_point()) fail("oracle", "the half-plane oracle needs a point source");
  }
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    // locate the failing byte; e.byte is 1-based
    int line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    // drop nlohmann's "[json.exception...] parse error at line L, column C: " preamble
    const std::size_t at_column = what.find("column ");
    const std::size_t cut = at_column == std::string::npos ? at_column : what.find(": ", at_column);
    if (cut != std::string::npos) what = what.substr(cut + 2);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what);
  }

  Fields top(doc, "");
  Scenario s;
  const std::string format = top.string("format", kScenarioFormat);
  if (format != kScenarioFormat) fail("format", "unsupported \"" + format + "\", expected \"" + kScenarioFormat + "\"");
  s.name = top.string("name");
  {
    Fields d = top.object("domain");
    s.boundary = parse_boundary(d.object("boundary"));
    s.marker = d.vec2("marker", s.boundary.center());
    s.velocity = d.has("velocity") ? parse_velocity(d.object("velocity")) : VelocityField::zero();
    s.flow_step = d.number("flow_step", s.flow_step);
    s.horizon = d.number("horizon");
    d.finish();
  }
  s.source = parse_source(top.object("source"));
  if (top.has("solver")) s.solver = parse_solver(top.object("solver"));
  if (top.has("montecarlo")) s.montecarlo = parse_montecarlo(top.object("montecarlo"));
  s.montecarlo.horizon = s.horizon;
  s.survival_stride = top.integer("survival_stride", s.survival_stride);
  s.oracle = parse_enum(top, "oracle", s.oracle, kOracles);
  s.output = top.string("output", s.output);
  top.finish();
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str(), path);
}

std::string serialize(const Scenario& scenario) { return scenario_json(scenario).dump(2) + "\n"; }

std::string serialize_compact(const Scenario& scenario) { return scenario_json(scenario).dump(); }

}  // namespace fpt
