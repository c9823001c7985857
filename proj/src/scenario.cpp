#include "ptrack/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>

namespace ptrack {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }
}

const json& require_object(const json& parent, const char* key, const std::string& path) {
  if (!parent.contains(key)) throw ConfigError(path, "missing required section");
  const json& v = parent.at(key);
  if (!v.is_object()) throw ConfigError(path, "must be an object");
  return v;
}

double get_number(const json& obj, const char* key, const std::string& path, double fallback,
                  bool required = false) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(path, "missing required value");
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
  return d;
}

int get_int(const json& obj, const char* key, const std::string& path, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(path, "must be an integer");
  return v.get<int>();
}

bool get_bool(const json& obj, const char* key, const std::string& path, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(path, "must be true or false");
  return v.get<bool>();
}

VecX get_vector(const json& v, const std::string& path, std::initializer_list<int> sizes) {
  if (!v.is_array()) throw ConfigError(path, "must be an array");
  bool size_ok = false;
  for (int s : sizes) size_ok = size_ok || static_cast<int>(v.size()) == s;
  if (!size_ok) throw ConfigError(path, "has the wrong number of entries");
  VecX out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path, "entries must be numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    if (!std::isfinite(out[static_cast<Eigen::Index>(i)]))
      throw ConfigError(path, "entries must be finite");
  }
  return out;
}

Mat6 get_matrix6(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 6) throw ConfigError(path, "must be a 6x6 nested array");
  Mat6 m;
  for (int r = 0; r < 6; ++r) m.row(r) = get_vector(v[r], path, {6}).transpose();
  return m;
}

Mat6 covariance_from(const json& obj, const std::string& path, const char* diag_key,
                     const char* full_key) {
  const bool has_diag = obj.contains(diag_key);
  const bool has_full = obj.contains(full_key);
  if (has_diag == has_full)
    throw ConfigError(path, std::string("exactly one of ") + diag_key + " or " + full_key +
                                " is required");
  if (has_diag) {
    const VecX d = get_vector(obj.at(diag_key), path + "." + diag_key, {6});
    if ((d.array() < 0.0).any()) throw ConfigError(path + "." + diag_key, "entries must be >= 0");
    return Mat6(d.asDiagonal());
  }
  return get_matrix6(obj.at(full_key), path + "." + full_key);
}

Vec3 planar_or_3d(const json& v, const std::string& path, double z) {
  const VecX p = get_vector(v, path, {2, 3});
  return Vec3(p[0], p[1], p.size() == 3 ? p[2] : z);
}

GoalRegion parse_goal(const json& g, const std::string& path) {
  if (!g.is_object()) throw ConfigError(path, "must be an object");
  reject_unknown(g, path, {"center", "half_extents"});
  if (!g.contains("center") || !g.contains("half_extents"))
    throw ConfigError(path, "needs center and half_extents");
  GoalRegion goal;
  goal.center = planar_or_3d(g.at("center"), path + ".center", 0.0);
  goal.half_extents = get_vector(g.at("half_extents"), path + ".half_extents", {2});
  return goal;
}

Cuboid parse_obstacle(const json& o, const std::string& path) {
  if (!o.is_object()) throw ConfigError(path, "must be an object");
  if (o.contains("faces")) {
    reject_unknown(o, path, {"faces"});
    const json& fs = o.at("faces");
    if (!fs.is_array() || fs.size() != Cuboid::kFaces)
      throw ConfigError(path + ".faces", "must list exactly 6 faces");
    std::array<Face, Cuboid::kFaces> faces;
    for (std::size_t i = 0; i < Cuboid::kFaces; ++i) {
      const std::string fp = path + ".faces[" + std::to_string(i) + "]";
      if (!fs[i].is_object()) throw ConfigError(fp, "must be an object");
      reject_unknown(fs[i], fp, {"normal", "offset"});
      if (!fs[i].contains("normal")) throw ConfigError(fp, "missing normal");
      faces[i].normal = get_vector(fs[i].at("normal"), fp + ".normal", {3});
      faces[i].offset = get_number(fs[i], "offset", fp + ".offset", 0.0, true);
    }
    try {
      return Cuboid::from_faces(faces);
    } catch (const ConfigError& e) {
      throw ConfigError(path, e.what());
    }
  }
  reject_unknown(o, path, {"min", "max"});
  if (!o.contains("min") || !o.contains("max"))
    throw ConfigError(path, "needs min and max corners (or faces)");
  const VecX lo = get_vector(o.at("min"), path + ".min", {3});
  const VecX hi = get_vector(o.at("max"), path + ".max", {3});
  try {
    return Cuboid::axis_aligned(lo, hi);
  } catch (const ConfigError& e) {
    throw ConfigError(path, e.what());
  }
}

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(field, what);
}

json vec_json(const Eigen::Ref<const VecX>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_json(const Mat6& m) {
  json a = json::array();
  for (int r = 0; r < 6; ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

}  // namespace

void validate_scenario(const ScenarioConfig& c) {
  require((c.environment.hi.array() > c.environment.lo.array()).all(), "environment",
          "max must exceed min on every axis");
  // Dynamics re-validated through the builder.
  (void)build_dynamics(c.dynamics.dt, c.dynamics.friction, c.dynamics.mass, c.dynamics.Q);
  require(!c.targets.empty(), "targets", "at least one target is required");
  for (std::size_t j = 0; j < c.targets.size(); ++j) {
    const std::string p = "targets[" + std::to_string(j) + "]";
    const TargetSpec& t = c.targets[j];
    if (!t.mean.allFinite()) throw ConfigError(p + ".mean", "must be finite");
    if (!c.environment.contains(t.mean.head<3>()))
      throw ConfigError(p + ".mean", "initial position lies outside the environment");
    if (!is_psd(t.cov, 1e-12, 1e-12)) throw ConfigError(p + ".cov", "must be symmetric PSD");
    if (!((t.goal.half_extents.array() > 0.0).all()))
      throw ConfigError(p + ".goal.half_extents", "must be > 0");
    if (t.goal.center.z() != 0.0) throw ConfigError(p + ".goal.center", "z must be 0");
  }
  require(c.sensor.sigma_phi > 0.0, "sensor.sigma_phi", "must be > 0");
  require(c.sensor.p_detect >= 0.0 && c.sensor.p_detect <= 1.0, "sensor.p_detect",
          "must lie in [0, 1]");
  require(c.sensor.clutter_rate >= 0.0, "sensor.clutter_rate", "must be >= 0");
  const AgentMotionModel& m = c.agent.motion;
  require(m.radial_step > 0.0, "agent.radial_step", "must be > 0");
  require(m.n_radial >= 1, "agent.n_radial", "must be >= 1");
  require(m.n_theta >= 1, "agent.n_theta", "must be >= 1");
  require(m.altitude > 0.0, "agent.altitude", "must be > 0");
  require(c.environment.contains_planar(c.agent.initial.x(), c.agent.initial.y()),
          "agent.initial", "must lie inside the environment footprint");
  require(c.agent.initial.z() == m.altitude, "agent.initial", "z must equal the altitude");
  const PlannerParams& pl = c.planner;
  require(pl.horizon >= 1, "planner.horizon", "must be >= 1");
  require(pl.u_max > 0.0, "planner.u_max", "must be > 0");
  require(pl.speed_max > 0.0, "planner.speed_max", "must be > 0");
  require(pl.big_m > 0.0, "planner.big_m", "must be > 0");
  require(pl.margin > 0.0, "planner.margin", "must be > 0");
  require(pl.clearance >= 0.0, "planner.clearance", "must be >= 0");
  require(pl.max_outer >= 1, "planner.max_outer", "must be >= 1");
  require(pl.qp_tol > 0.0, "planner.qp_tol", "must be > 0");
  require(pl.qp_max_iter >= 1, "planner.qp_max_iter", "must be >= 1");
  require(c.filter.particles >= 100, "filter.particles", "must be >= 100");
  require(c.filter.ess_threshold > 0.0 && c.filter.ess_threshold <= 1.0, "filter.ess_threshold",
          "must lie in (0, 1]");
  require(c.filter.jitter >= 0.0, "filter.jitter", "must be >= 0");
  require(c.episode.steps >= 0, "episode.steps", "must be >= 0");
}

ScenarioConfig load_scenario(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    // nlohmann reports "at line L, column C" in the message.
    throw ConfigError("", std::string("parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "document must be an object");
  reject_unknown(doc, "",
                 {"schema", "environment", "dynamics", "targets", "obstacles", "sensor", "agent",
                  "planner", "filter", "episode"});
  if (doc.contains("schema") && doc.at("schema") != "scenario_v1")
    throw ConfigError("schema", "unsupported schema (expected scenario_v1)");

  ScenarioConfig c;

  const json& env = require_object(doc, "environment", "environment");
  reject_unknown(env, "environment", {"min", "max"});
  if (!env.contains("min") || !env.contains("max"))
    throw ConfigError("environment", "needs min and max");
  c.environment.lo = get_vector(env.at("min"), "environment.min", {3});
  c.environment.hi = get_vector(env.at("max"), "environment.max", {3});

  const json& dyn = require_object(doc, "dynamics", "dynamics");
  reject_unknown(dyn, "dynamics", {"dt", "friction", "mass", "q_diag", "q"});
  const double dt = get_number(dyn, "dt", "dynamics.dt", 0.0, true);
  const double fr = get_number(dyn, "friction", "dynamics.friction", 0.0, true);
  const double mass = get_number(dyn, "mass", "dynamics.mass", 0.0, true);
  if (dyn.contains("q_diag") == dyn.contains("q"))
    throw ConfigError("dynamics", "exactly one of q_diag or q is required");
  if (dyn.contains("q_diag"))
    c.dynamics = build_dynamics(dt, fr, mass, Vec6(get_vector(dyn.at("q_diag"), "dynamics.q_diag", {6})));
  else
    c.dynamics = build_dynamics(dt, fr, mass, get_matrix6(dyn.at("q"), "dynamics.q"));

  if (!doc.contains("targets") || !doc.at("targets").is_array())
    throw ConfigError("targets", "must be an array");
  const json& targets = doc.at("targets");
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const std::string p = "targets[" + std::to_string(j) + "]";
    const json& t = targets[j];
    if (!t.is_object()) throw ConfigError(p, "must be an object");
    reject_unknown(t, p, {"mean", "cov_diag", "cov", "goal"});
    TargetSpec spec;
    if (!t.contains("mean")) throw ConfigError(p + ".mean", "missing");
    const VecX mu = get_vector(t.at("mean"), p + ".mean", {3, 6});
    spec.mean.setZero();
    spec.mean.head(mu.size()) = mu;
    spec.cov = covariance_from(t, p, "cov_diag", "cov");
    if (!t.contains("goal")) throw ConfigError(p + ".goal", "missing");
    spec.goal = parse_goal(t.at("goal"), p + ".goal");
    c.targets.push_back(spec);
  }

  if (doc.contains("obstacles")) {
    const json& obs = doc.at("obstacles");
    if (!obs.is_array()) throw ConfigError("obstacles", "must be an array");
    for (std::size_t n = 0; n < obs.size(); ++n)
      c.obstacles.push_back(parse_obstacle(obs[n], "obstacles[" + std::to_string(n) + "]"));
  }

  if (doc.contains("sensor")) {
    const json& s = require_object(doc, "sensor", "sensor");
    reject_unknown(s, "sensor",
                   {"sigma_phi", "sigma_phi_deg", "p_detect", "clutter_rate", "baseline_sensors"});
    if (s.contains("sigma_phi") && s.contains("sigma_phi_deg"))
      throw ConfigError("sensor", "give sigma_phi or sigma_phi_deg, not both");
    if (s.contains("sigma_phi_deg"))
      c.sensor.sigma_phi = kDeg * get_number(s, "sigma_phi_deg", "sensor.sigma_phi_deg", 1.0);
    else
      c.sensor.sigma_phi = get_number(s, "sigma_phi", "sensor.sigma_phi", c.sensor.sigma_phi);
    c.sensor.p_detect = get_number(s, "p_detect", "sensor.p_detect", c.sensor.p_detect);
    c.sensor.clutter_rate = get_number(s, "clutter_rate", "sensor.clutter_rate", c.sensor.clutter_rate);
    if (s.contains("baseline_sensors")) {
      const json& bs = s.at("baseline_sensors");
      if (!bs.is_array()) throw ConfigError("sensor.baseline_sensors", "must be an array");
      for (std::size_t i = 0; i < bs.size(); ++i)
        c.baseline_sensors.push_back(
            get_vector(bs[i], "sensor.baseline_sensors[" + std::to_string(i) + "]", {2}));
    }
  }

  if (doc.contains("agent")) {
    const json& a = require_object(doc, "agent", "agent");
    reject_unknown(a, "agent",
                   {"radial_step", "n_radial", "n_theta", "altitude", "initial", "randomize_initial"});
    AgentMotionModel& m = c.agent.motion;
    m.radial_step = get_number(a, "radial_step", "agent.radial_step", m.radial_step);
    m.n_radial = get_int(a, "n_radial", "agent.n_radial", m.n_radial);
    m.n_theta = get_int(a, "n_theta", "agent.n_theta", m.n_theta);
    m.altitude = get_number(a, "altitude", "agent.altitude", m.altitude);
    if (a.contains("initial")) {
      c.agent.initial = planar_or_3d(a.at("initial"), "agent.initial", m.altitude);
    }
    c.agent.randomize_initial = get_bool(a, "randomize_initial", "agent.randomize_initial", false);
  }
  c.agent.initial.z() = c.agent.motion.altitude;

  if (doc.contains("planner")) {
    const json& p = require_object(doc, "planner", "planner");
    reject_unknown(p, "planner",
                   {"horizon", "u_max", "speed_max", "big_m", "margin", "clearance", "max_outer",
                    "qp_tol", "qp_max_iter"});
    PlannerParams& pl = c.planner;
    pl.horizon = get_int(p, "horizon", "planner.horizon", pl.horizon);
    pl.u_max = get_number(p, "u_max", "planner.u_max", pl.u_max);
    pl.speed_max = get_number(p, "speed_max", "planner.speed_max", pl.speed_max);
    pl.big_m = get_number(p, "big_m", "planner.big_m", pl.big_m);
    pl.margin = get_number(p, "margin", "planner.margin", pl.margin);
    pl.clearance = get_number(p, "clearance", "planner.clearance", pl.clearance);
    pl.max_outer = get_int(p, "max_outer", "planner.max_outer", pl.max_outer);
    pl.qp_tol = get_number(p, "qp_tol", "planner.qp_tol", pl.qp_tol);
    pl.qp_max_iter = get_int(p, "qp_max_iter", "planner.qp_max_iter", pl.qp_max_iter);
  }

  if (doc.contains("filter")) {
    const json& f = require_object(doc, "filter", "filter");
    reject_unknown(f, "filter", {"particles", "ess_threshold", "jitter", "trace_block"});
    c.filter.particles = get_int(f, "particles", "filter.particles", c.filter.particles);
    c.filter.ess_threshold =
        get_number(f, "ess_threshold", "filter.ess_threshold", c.filter.ess_threshold);
    c.filter.jitter = get_number(f, "jitter", "filter.jitter", c.filter.jitter);
    if (f.contains("trace_block")) {
      const json& tb = f.at("trace_block");
      if (tb == "full")
        c.filter.trace_block = TraceBlock::Full;
      else if (tb == "position")
        c.filter.trace_block = TraceBlock::Position;
      else
        throw ConfigError("filter.trace_block", "must be \"full\" or \"position\"");
    }
  }

  if (doc.contains("episode")) {
    const json& e = require_object(doc, "episode", "episode");
    reject_unknown(e, "episode", {"steps", "seed"});
    c.episode.steps = get_int(e, "steps", "episode.steps", c.episode.steps);
    if (e.contains("seed")) {
      if (!e.at("seed").is_number_unsigned()) throw ConfigError("episode.seed", "must be a non-negative integer");
      c.episode.seed = e.at("seed").get<std::uint64_t>();
    }
  }

  validate_scenario(c);
  return c;
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& c) {
  json doc;
  doc["schema"] = "scenario_v1";
  doc["environment"] = {{"min", vec_json(c.environment.lo)}, {"max", vec_json(c.environment.hi)}};
  doc["dynamics"] = {{"dt", c.dynamics.dt},
                     {"friction", c.dynamics.friction},
                     {"mass", c.dynamics.mass},
                     {"q", mat_json(c.dynamics.Q)}};
  json targets = json::array();
  for (const TargetSpec& t : c.targets) {
    targets.push_back({{"mean", vec_json(t.mean)},
                       {"cov", mat_json(t.cov)},
                       {"goal",
                        {{"center", vec_json(t.goal.center)},
                         {"half_extents", vec_json(t.goal.half_extents)}}}});
  }
  doc["targets"] = targets;
  json obstacles = json::array();
  for (const Cuboid& ob : c.obstacles) {
    json faces = json::array();
    for (const Face& f : ob.faces())
      faces.push_back({{"normal", vec_json(f.normal)}, {"offset", f.offset}});
    obstacles.push_back({{"faces", faces}});
  }
  doc["obstacles"] = obstacles;
  json base = json::array();
  for (const Vec2& s : c.baseline_sensors) base.push_back(vec_json(s));
  doc["sensor"] = {{"sigma_phi", c.sensor.sigma_phi},
                   {"p_detect", c.sensor.p_detect},
                   {"clutter_rate", c.sensor.clutter_rate},
                   {"baseline_sensors", base}};
  doc["agent"] = {{"radial_step", c.agent.motion.radial_step},
                  {"n_radial", c.agent.motion.n_radial},
                  {"n_theta", c.agent.motion.n_theta},
                  {"altitude", c.agent.motion.altitude},
                  {"initial", vec_json(c.agent.initial)},
                  {"randomize_initial", c.agent.randomize_initial}};
  doc["planner"] = {{"horizon", c.planner.horizon},       {"u_max", c.planner.u_max},
                    {"speed_max", c.planner.speed_max},   {"big_m", c.planner.big_m},
                    {"margin", c.planner.margin},         {"clearance", c.planner.clearance},
                    {"max_outer", c.planner.max_outer},   {"qp_tol", c.planner.qp_tol},
                    {"qp_max_iter", c.planner.qp_max_iter}};
  doc["filter"] = {{"particles", c.filter.particles},
                   {"ess_threshold", c.filter.ess_threshold},
                   {"jitter", c.filter.jitter},
                   {"trace_block", c.filter.trace_block == TraceBlock::Full ? "full" : "position"}};
  doc["episode"] = {{"steps", c.episode.steps}, {"seed", c.episode.seed}};
  return doc.dump(2);
}

std::string scenario_hash(const ScenarioConfig& config) {
  const std::string text = scenario_to_json(config);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ptrack
