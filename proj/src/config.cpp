#include "escape/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "escape/errors.hpp"

namespace escape {

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  double num(const char* key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_number()) fail(std::string(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(std::string(key) + " must be finite");
    return d;
  }

  double required_num(const char* key) {
    if (!j_.contains(key)) fail(std::string("missing ") + key);
    return num(key, 0.0);
  }

  int integer(const char* key, int fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) fail(std::string(key) + " must be an integer");
    return v.get<int>();
  }

  bool flag(const char* key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) fail(std::string(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_string()) fail(std::string(key) + " must be a string");
    return v.get<std::string>();
  }

  const Json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail("unknown key " + item.key());
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Vec vec_from_json(const Json& j, int dim, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw ConfigError(std::string(what) + " must be an array of " + std::to_string(dim) +
                      " numbers");
  }
  Vec v(dim);
  for (int k = 0; k < dim; ++k) {
    if (!j[k].is_number()) throw ConfigError(std::string(what) + " entries must be numbers");
    v(k) = j[k].get<double>();
  }
  return v;
}

struct PowerLaw {
  std::string kind;
  double coef = 0.0, exponent = 0.0;
};

PowerLaw power_law(const Json& j, const char* where, std::initializer_list<const char*> kinds) {
  Fields f(j, where);
  PowerLaw p;
  p.kind = f.text("kind", "");
  bool ok = false;
  for (const char* k : kinds) ok = ok || p.kind == k;
  if (!ok) f.fail("unsupported kind '" + p.kind + "'");
  if (p.kind != "zero") {
    p.coef = f.required_num("coef");
    p.exponent = f.num("exponent", 0.0);
  }
  f.finish();
  return p;
}

Profile alpha_profile(const PowerLaw& p) {
  const double c = p.coef, e = p.exponent;
  if (p.kind == "shifted_power") return [c, e](double r) { return c * std::pow(r, e) - 1.0 / r; };
  return [c, e](double r) { return c * std::pow(r, e); };
}

Profile q_profile(const Json* j) {
  if (!j) return [](double) { return 0.0; };
  const PowerLaw p = power_law(*j, "q_field", {"zero", "scalar_profile"});
  if (p.kind == "zero") return [](double) { return 0.0; };
  if (p.coef < 0.0) throw ConfigError("q_field: coef must be nonnegative");
  const double c = p.coef, e = p.exponent;
  return [c, e](double r) { return c * std::pow(r, e); };
}

Domain parse_domain(Fields& f, Domain fallback) {
  const std::string d = f.text("domain", fallback == Domain::full ? "full" : "exterior");
  if (d == "full") return Domain::full;
  if (d == "exterior") return Domain::exterior;
  f.fail("domain must be full or exterior");
}

}  // namespace

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

MetricField metric_from_json(const Json& spec, const std::string& base_dir) {
  if (spec.is_string()) {
    const std::filesystem::path p = std::filesystem::path(base_dir) / spec.get<std::string>();
    return metric_from_json(load_json_file(p.string()), p.parent_path().string());
  }
  Fields f(spec, "metric");
  const int dim = f.integer("dim", 2);
  if (dim < 2) f.fail("dim must be at least 2");
  Family fam;
  try {
    fam = parse_family(f.text("family", ""));
  } catch (const std::exception& e) {
    f.fail(e.what());
  }
  const double r_c = f.num("r_c", 1.0);
  if (!(r_c > 0.0)) f.fail("r_c must be positive");

  std::map<std::string, double> params;
  if (f.has("params")) {
    const Json& pj = f.raw("params");
    if (!pj.is_object()) f.fail("params must be an object");
    for (const auto& item : pj.items()) {
      if (!item.value().is_number()) f.fail("params." + item.key() + " must be a number");
      params[item.key()] = item.value().get<double>();
    }
  }
  std::set<std::string> used;
  auto param = [&](const char* key, double fallback) {
    used.insert(key);
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  auto required = [&](const char* key) {
    if (!params.count(key)) f.fail(std::string("params.") + key + " is required");
    return param(key, 0.0);
  };

  std::optional<PowerLaw> alpha;
  if (f.has("alpha")) alpha = power_law(f.raw("alpha"), "alpha", {"power", "shifted_power"});
  const Json* q = f.has("q_field") ? &f.raw("q_field") : nullptr;

  MetricField g = make_euclidean(dim);
  switch (fam) {
    case Family::euclidean:
      g = make_euclidean(dim);
      break;
    case Family::radial_power:
      g = make_radial_power(dim, required("m1"), r_c, parse_domain(f, Domain::full));
      break;
    case Family::radial_exp:
      g = make_radial_exp(dim, required("m1"), required("m2"), required("s1"), required("s2"), r_c,
                          parse_domain(f, Domain::exterior));
      break;
    case Family::cylinder:
      g = make_cylinder(dim, param("R0", 2.0), r_c, parse_domain(f, Domain::full));
      break;
    case Family::prop21_general:
      if (!alpha) f.fail("prop21_general needs alpha");
      g = build_escape_metric_radial(alpha_profile(*alpha), q_profile(q), r_c, dim);
      alpha.reset();
      break;
    case Family::prop22_exterior: {
      if (!alpha) f.fail("prop22_exterior needs alpha");
      const double pb = f.num("p_boundary", 1.0);
      if (!(pb > 0.0)) f.fail("p_boundary must be positive");
      g = build_exterior_escape_metric_radial(alpha_profile(*alpha), q_profile(q), pb, r_c, dim);
      alpha.reset();
      break;
    }
    case Family::tabulated: {
      if (!f.has("table")) f.fail("tabulated needs a table");
      Fields t(f.raw("table"), "table");
      const double r_start = t.num("r_start", 0.0);
      const double dr = t.required_num("dr");
      if (!t.has("phi") || !t.raw("phi").is_array()) t.fail("phi must be an array");
      std::vector<double> phi;
      for (const auto& v : t.raw("phi")) {
        if (!v.is_number()) t.fail("phi entries must be numbers");
        phi.push_back(v.get<double>());
      }
      t.finish();
      g = make_tabulated(dim, r_start, dr, std::move(phi), r_c, parse_domain(f, Domain::full));
      break;
    }
  }
  if (fam != Family::prop21_general && fam != Family::prop22_exterior && q) {
    f.fail("q_field only applies to the constructed families");
  }
  for (const auto& kv : params) {
    if (!used.count(kv.first)) f.fail("unknown parameter params." + kv.first);
  }
  f.has("domain");
  f.finish();
  if (alpha) {
    const Profile a = alpha_profile(*alpha);
    g = g.with_alpha([a](double r, const Vec&) { return a(r); });
  }
  return g;
}

RadialConfig radial_config_from_json(const Json& j) {
  Fields f(j, "wave-radial");
  const double m = f.num("m", 2.0);
  RadialConfig c = f.text("preset", "") == "decay" ? decay_config(m) : RadialConfig{};
  c.m = m;
  c.r0 = f.num("r0", c.r0);
  c.a = f.num("a", c.a);
  c.R0_support = f.num("R0_support", c.R0_support);
  c.T = f.num("T", c.T);
  c.N = f.integer("N", c.N);
  c.cfl = f.num("cfl", c.cfl);
  c.sample_dt = f.num("sample_dt", c.sample_dt);
  c.R_max = f.num("R_max", c.R_max);
  c.bump_a1 = f.num("bump_a1", c.bump_a1);
  c.bump_a2 = f.num("bump_a2", c.bump_a2);
  c.bump_power = f.integer("bump_power", c.bump_power);
  c.bump_in_velocity = f.flag("bump_in_velocity", c.bump_in_velocity);
  f.finish();
  c.validate();
  return c;
}

GeneralConfig general_config_from_json(const Json& j) {
  Fields f(j, "wave grid");
  GeneralConfig c;
  c.r0 = f.num("r0", c.r0);
  c.R0_support = f.num("R0_support", c.R0_support);
  c.T = f.num("T", c.T);
  c.N_r = f.integer("N_r", c.N_r);
  c.N_theta = f.integer("N_theta", c.N_theta);
  c.R_max = f.num("R_max", c.R_max);
  c.a = f.num("a", c.a);
  c.s1 = f.num("s1", c.s1);
  c.cfl = f.num("cfl", c.cfl);
  c.sample_dt = f.num("sample_dt", c.sample_dt);
  c.bump_power = f.integer("bump_power", c.bump_power);
  c.angular = f.flag("angular", c.angular);
  f.finish();
  c.validate();
  return c;
}

DecayHypotheses decay_hypotheses_from_json(const Json& j) {
  Fields f(j, "hypotheses");
  DecayHypotheses p;
  p.s1 = f.num("s1", p.s1);
  p.s2 = f.num("s2", p.s2);
  p.m1 = f.num("m1", p.m1);
  p.m2 = f.num("m2", p.m2);
  p.r0 = f.num("r0", p.r0);
  f.finish();
  return p;
}

ShotConfig shot_config_from_json(const Json& j, int dim) {
  Fields f(j, "shots");
  ShotConfig s;
  if (f.has("x0")) {
    const Json& xs = f.raw("x0");
    if (!xs.is_array() || xs.empty()) f.fail("x0 must be a non-empty array of points");
    for (const auto& x : xs) s.x0.push_back(vec_from_json(x, dim, "x0"));
  }
  if (f.has("direction")) s.direction = vec_from_json(f.raw("direction"), dim, "direction");
  s.batch.directions = f.integer("directions", s.batch.directions);
  s.batch.T = f.num("T", s.batch.T);
  s.batch.integrate.dt = f.num("dt", s.batch.integrate.dt);
  s.batch.integrate.reflect = f.flag("reflect", false);
  s.batch.integrate.renormalize = f.flag("renormalize", false);
  s.batch.integrate.record_every = f.integer("record_every", s.batch.integrate.record_every);
  s.batch.rho0 = f.num("rho0", 0.0);
  s.batch.integral_bound = f.flag("integral_bound", false);
  s.tolerance = f.num("tolerance", s.tolerance);
  f.finish();
  if (s.batch.directions < 1) f.fail("directions must be positive");
  if (!(s.batch.T > 0.0)) f.fail("T must be positive");
  if (!(s.batch.integrate.dt > 0.0)) f.fail("dt must be positive");
  if (s.batch.integrate.record_every < 1) f.fail("record_every must be positive");
  if (s.tolerance < 0.0) f.fail("tolerance must be nonnegative");
  return s;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_hash(const Json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace escape
