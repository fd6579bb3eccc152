#include "escape/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "escape/certify.hpp"
#include "escape/config.hpp"
#include "escape/errors.hpp"
#include "escape/geodesic.hpp"
#include "escape/wave_general.hpp"
#include "escape/wave_radial.hpp"

namespace escape {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  bool quiet = false;
};

struct GeodesicFlags {
  std::string metric, x0, dir;
  double T = 0.0, dt = 0.0;
  bool reflect = false;
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Everything a command needs to stamp and place its outputs.
class Run {
 public:
  Run(std::string command, const Common& c, Json effective)
      : command_(std::move(command)), common_(c), effective_(std::move(effective)) {
    hash_ = config_hash(effective_);
    std::error_code ec;
    fs::create_directories(common_.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + common_.out);
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream f(fs::path(common_.out) / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (fs::path(common_.out) / name).string());
    return f;
  }

  /// CSV with the provenance comment lines and a column header.
  std::ofstream csv(const std::string& name, const std::string& columns) const {
    auto f = open(name);
    f << "# escape " << command_ << "\n# config_hash " << hash_ << "\n# seed " << common_.seed
      << "\n"
      << columns << "\n";
    return f;
  }

  void report(const std::string& name, Json body) const {
    body["command"] = command_;
    body["config_hash"] = hash_;
    body["seed"] = common_.seed;
    body["config"] = effective_;
    auto f = open(name);
    f << body.dump(2) << "\n";
  }

  const Common& common() const { return common_; }
  std::uint64_t seed() const { return common_.seed; }

 private:
  std::string command_;
  Common common_;
  Json effective_;
  std::string hash_;
};

Json load_config(const Common& c, bool required) {
  if (c.config.empty()) {
    if (required) throw ConfigError("--config is required");
    return Json::object();
  }
  return load_json_file(c.config);
}

std::string config_dir(const Common& c) {
  if (c.config.empty()) return ".";
  const auto p = fs::path(c.config).parent_path();
  return p.empty() ? "." : p.string();
}

Json take(Json& doc, const char* key) {
  if (!doc.contains(key)) return Json::object();
  Json v = doc[key];
  doc.erase(key);
  return v;
}

void reject_leftovers(const Json& doc, const char* command) {
  for (const auto& item : doc.items()) {
    throw ConfigError(std::string(command) + ": unknown key " + item.key());
  }
}

Vec parse_vec(const std::string& text, const char* what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": cannot parse '" + cell + "'");
    }
  }
  if (vals.size() < 2) throw ConfigError(std::string(what) + " needs at least two components");
  Vec v(static_cast<int>(vals.size()));
  for (std::size_t k = 0; k < vals.size(); ++k) v(k) = vals[k];
  return v;
}

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (int k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

// ------------------------------------------------------------------ certify

int cmd_certify(const Common& c, std::ostream& out) {
  Json doc = load_config(c, true);
  Json metric_spec, sampling = Json::object();
  if (doc.contains("family")) {
    metric_spec = doc;
  } else {
    Json rest = doc;
    metric_spec = take(rest, "metric");
    sampling = take(rest, "sampling");
    reject_leftovers(rest, "certify");
  }
  const MetricField g = metric_from_json(metric_spec, config_dir(c));
  SampleSpec spec;
  if (!sampling.is_object()) throw ConfigError("sampling must be an object");
  for (const auto& item : sampling.items()) {
    const auto& k = item.key();
    const Json& v = item.value();
    if (!v.is_number()) throw ConfigError("sampling." + k + " must be a number");
    if (k == "r_lo") spec.r_lo = v.get<double>();
    else if (k == "r_hi") spec.r_hi = v.get<double>();
    else if (k == "radial") spec.radial = v.get<int>();
    else if (k == "angular") spec.angular = v.get<int>();
    else if (k == "interior_radial") spec.interior_radial = v.get<int>();
    else if (k == "tol") spec.tol = v.get<double>();
    else throw ConfigError("sampling: unknown key " + k);
  }
  if (spec.radial < 1 || spec.angular < 1) throw ConfigError("sampling counts must be positive");
  spec.seed = c.seed;

  Run run("certify", c, Json{{"config", doc}});
  const CertificationReport rep = certify_escape(g, spec);
  {
    auto f = run.csv("certify.csv", "r,theta_index,margin_escape,margin_interior");
    for (const auto& p : rep.points) {
      f << num(p.r) << "," << p.theta_index << "," << num(p.margin_escape) << ","
        << num(p.margin_interior) << "\n";
    }
  }
  Json body{{"family", family_name(g.family())},
            {"pass", rep.pass},
            {"points", rep.points.size()},
            {"worst_escape", rep.worst_escape},
            {"worst_interior", rep.worst_interior},
            {"worst_admissibility", rep.worst_admissibility},
            {"max_radial_residual", rep.max_radial_residual},
            {"worst_kind", rep.worst_kind},
            {"notes", rep.notes}};
  if (rep.worst_point.size() > 0) body["worst_point"] = vec_json(rep.worst_point);
  run.report("certify.json", body);
  if (!c.quiet) {
    out << "certify " << family_name(g.family()) << ": " << (rep.pass ? "pass" : "fail")
        << " (worst escape margin " << num(rep.worst_escape) << ", " << rep.points.size()
        << " points)\n";
  }
  return rep.pass ? kExitPass : kExitFail;
}

// ------------------------------------------------------------------ geodesic

int cmd_geodesic(const Common& c, const GeodesicFlags& fl, std::ostream& out) {
  Json doc = load_config(c, fl.metric.empty());
  Json rest = doc;
  Json metric_spec = take(rest, "metric");
  Json shots = take(rest, "shots");
  reject_leftovers(rest, "geodesic");

  std::string base = config_dir(c);
  if (!fl.metric.empty()) {
    metric_spec = load_json_file(fl.metric);
    const auto p = fs::path(fl.metric).parent_path();
    base = p.empty() ? "." : p.string();
  }
  if (metric_spec.is_object() && metric_spec.empty()) throw ConfigError("geodesic: no metric given");
  const MetricField g = metric_from_json(metric_spec, base);
  ShotConfig sc = shot_config_from_json(shots, g.dim());

  Json overrides = Json::object();
  if (!fl.x0.empty()) {
    sc.x0 = {parse_vec(fl.x0, "--x0")};
    overrides["x0"] = fl.x0;
  }
  if (!fl.dir.empty()) {
    sc.direction = parse_vec(fl.dir, "--dir");
    overrides["dir"] = fl.dir;
  }
  if (fl.T > 0.0) {
    sc.batch.T = fl.T;
    overrides["T"] = fl.T;
  }
  if (fl.dt > 0.0) {
    sc.batch.integrate.dt = fl.dt;
    overrides["dt"] = fl.dt;
  }
  if (fl.reflect) {
    sc.batch.integrate.reflect = true;
    overrides["reflect"] = true;
  }
  if (sc.x0.empty()) throw ConfigError("geodesic: no starting point (x0)");
  for (const Vec& x : sc.x0) {
    if (x.size() != g.dim()) throw ConfigError("geodesic: x0 dimension differs from the metric");
  }
  if (sc.direction.size() > 0) {
    if (sc.direction.size() != g.dim()) throw ConfigError("geodesic: dir dimension differs");
    sc.batch.fixed_directions = {sc.direction};
  }
  sc.batch.seed = c.seed;

  Run run("geodesic", c,
          Json{{"config", doc}, {"metric_file", metric_spec}, {"overrides", overrides}});
  const int n = g.dim();
  std::string columns = "t";
  for (int k = 1; k <= n; ++k) columns += ",x" + std::to_string(k);
  for (int k = 1; k <= n; ++k) columns += ",v" + std::to_string(k);
  columns += ",r,h,speed_drift";
  sc.batch.on_trace = [&](std::size_t idx, const GeodesicTrace& tr) {
    char name[32];
    std::snprintf(name, sizeof name, "trace_%03zu.csv", idx);
    auto f = run.csv(name, columns);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      f << num(tr.t[i]);
      for (int k = 0; k < n; ++k) f << "," << num(tr.x[i](k));
      for (int k = 0; k < n; ++k) f << "," << num(tr.v[i](k));
      f << "," << num(tr.r[i]) << "," << num(tr.h[i]) << "," << num(tr.drift[i]) << "\n";
    }
  };
  const BatchSummary sum = batch_shoot(g, sc.x0, sc.batch);

  bool ok = true;
  Json traces = Json::array();
  for (std::size_t i = 0; i < sum.reports.size(); ++i) {
    const auto& r = sum.reports[i];
    for (double m : {r.velocity_margin, r.integral_margin}) {
      if (!std::isnan(m) && m < -sc.tolerance) ok = false;
    }
    traces.push_back({{"index", i},
                      {"x0", vec_json(r.x0)},
                      {"direction", vec_json(r.direction)},
                      {"verdict", verdict_name(r.verdict)},
                      {"final_r", r.final_r},
                      {"asymptotic_speed", r.asymptotic_speed},
                      {"max_drift", r.max_drift},
                      {"velocity_margin", r.velocity_margin},
                      {"integral_margin", r.integral_margin},
                      {"h_monotonicity", r.h_monotonicity},
                      {"t0", r.t0},
                      {"t1", r.t1},
                      {"t2", r.t2},
                      {"t_hit", r.t_hit},
                      {"notes", r.notes}});
  }
  run.report("escape_report.json",
             Json{{"family", family_name(g.family())},
                  {"pass", ok},
                  {"escaped", sum.escaped},
                  {"trapped", sum.trapped},
                  {"hit_inner_boundary", sum.hit},
                  {"min_asymptotic_speed", sum.min_asymptotic_speed},
                  {"min_velocity_margin", sum.min_velocity_margin},
                  {"min_integral_margin", sum.min_integral_margin},
                  {"max_h_monotonicity", sum.max_h_monotonicity},
                  {"max_drift", sum.max_drift},
                  {"tolerance", sc.tolerance},
                  {"traces", traces}});
  if (!c.quiet) {
    out << "geodesic " << family_name(g.family()) << ": " << sum.reports.size() << " shots, "
        << sum.escaped << " escaped, " << sum.trapped << " trapped, " << sum.hit
        << " hit the inner boundary; theorem margins " << (ok ? "ok" : "violated") << "\n";
  }
  return ok ? kExitPass : kExitFail;
}

// ------------------------------------------------------------------ waves

int cmd_wave_radial(const Common& c, std::ostream& out) {
  Json doc = load_config(c, true);
  Json rest = doc;
  const Json exp_j = take(rest, "experiment");
  const std::string experiment = exp_j.is_string() ? exp_j.get<std::string>() : "energy";
  const Json radial = take(rest, "radial");
  const Json expect_j = take(rest, "expect");
  const Json tol_j = take(rest, "energy_tolerance");
  reject_leftovers(rest, "wave-radial");
  const RadialConfig cfg = radial_config_from_json(radial);
  const double tol = tol_j.is_number() ? tol_j.get<double>() : 1e-3;

  Run run("wave-radial", c, Json{{"config", doc}});
  auto write_energy = [&](const RadialRun& rr) {
    auto f = run.csv("energy.csv", "t,E_total,E_local");
    for (std::size_t k = 0; k < rr.t.size(); ++k) {
      f << num(rr.t[k]) << "," << num(rr.E_total[k]) << "," << num(rr.E_local[k]) << "\n";
    }
  };

  bool ok = true;
  Json body{{"experiment", experiment}, {"m", cfg.m}, {"N", cfg.N}, {"T", cfg.T}};
  std::string line;
  if (experiment == "energy" || experiment == "decay") {
    const RadialRun rr = run_radial(cfg);
    write_energy(rr);
    body["max_energy_drift"] = rr.max_energy_drift;
    body["dt"] = rr.dt;
    if (experiment == "energy") {
      ok = rr.max_energy_drift <= tol;
      line = "energy drift " + num(rr.max_energy_drift);
    } else {
      const DecayFit fit = decay_classify(rr.t, rr.E_local, rr.E_total.front(), cfg.window_start());
      body["class"] = decay_class_name(fit.cls);
      body["rate"] = fit.rate;
      body["exponent"] = fit.exponent;
      body["r2_exp"] = fit.r2_exp;
      body["r2_poly"] = fit.r2_poly;
      body["t_start"] = fit.t_start;
      body["t_end"] = fit.t_end;
      body["t_zero"] = fit.t_zero;
      ok = fit.cls != DecayClass::inconclusive;
      if (expect_j.is_string()) {
        ok = ok && expect_j.get<std::string>() == decay_class_name(fit.cls);
        body["expect"] = expect_j;
      }
      line = std::string("class ") + decay_class_name(fit.cls);
    }
  } else if (experiment == "oracle") {
    const OracleCheck oc = m2_oracle_check(cfg);
    body["max_error"] = oc.max_error;
    body["bound"] = oc.bound();
    body["dr"] = oc.dr;
    ok = oc.max_error <= oc.bound();
    line = "oracle error " + num(oc.max_error) + " (bound " + num(oc.bound()) + ")";
  } else {
    throw ConfigError("wave-radial: unknown experiment " + experiment);
  }
  body["pass"] = ok;
  run.report("report.json", body);
  if (!c.quiet) out << "wave-radial " << experiment << ": " << line << ", " << (ok ? "pass" : "fail") << "\n";
  return ok ? kExitPass : kExitFail;
}

void write_general_energy(const Run& run, const GeneralRun& gr) {
  auto f = run.csv("energy.csv", "t,E_total,E_local_a,S_weighted,t_times_Elocal_over_E0");
  for (const auto& r : gr.records) {
    f << num(r.t) << "," << num(r.E_total) << "," << num(r.E_local) << "," << num(r.S) << ","
      << num(r.decay_stat) << "\n";
  }
}

int cmd_wave_general(const Common& c, std::ostream& out) {
  Json doc = load_config(c, true);
  Json rest = doc;
  const Json exp_j = take(rest, "experiment");
  const std::string experiment = exp_j.is_string() ? exp_j.get<std::string>() : "energy";
  const Json metric_spec = take(rest, "metric");
  const Json grid = take(rest, "grid");
  const Json m1_j = take(rest, "m1");
  const Json window_j = take(rest, "window_lo");
  const Json ab_j = take(rest, "hypotheses");
  const Json tol_j = take(rest, "energy_tolerance");
  const Json snap_j = take(rest, "snapshot");
  reject_leftovers(rest, "wave-general");
  const GeneralConfig cfg = general_config_from_json(grid);
  const double tol = tol_j.is_number() ? tol_j.get<double>() : 1e-3;

  Run run("wave-general", c, Json{{"config", doc}});
  Json body{{"experiment", experiment}, {"N_r", cfg.N_r}, {"N_theta", cfg.N_theta}, {"T", cfg.T}};
  bool ok = true;
  std::string line;
  const GeneralRun* gr = nullptr;
  UniformDecayReport ud;
  SpacetimeReport st;
  GeneralRun plain;
  if (experiment == "energy") {
    if (metric_spec.is_object() && metric_spec.empty()) throw ConfigError("wave-general: no metric");
    plain = run_general(metric_from_json(metric_spec, config_dir(c)), cfg);
    gr = &plain;
    ok = plain.max_energy_drift <= tol && plain.max_precursor <= 1e-10;
    line = "energy drift " + num(plain.max_energy_drift) + ", precursor " + num(plain.max_precursor);
  } else if (experiment == "uniform_decay") {
    if (!m1_j.is_number()) throw ConfigError("uniform_decay needs m1");
    const double lo = window_j.is_number() ? window_j.get<double>() : 20.0;
    ud = uniform_decay_experiment(m1_j.get<double>(), cfg, lo);
    gr = &ud.run;
    ok = ud.pass;
    body["m1"] = ud.m1;
    body["a"] = ud.a;
    body["window"] = {ud.window_lo, ud.window_hi};
    body["mid_max"] = ud.mid_max;
    body["last_max"] = ud.last_max;
    line = "last-quarter / mid-window max " + num(ud.mid_max > 0 ? ud.last_max / ud.mid_max : NAN);
  } else if (experiment == "spacetime") {
    const DecayHypotheses p = decay_hypotheses_from_json(ab_j.is_object() ? ab_j : Json::object());
    st = spacetime_bound_experiment(p, cfg);
    gr = &st.run;
    ok = st.pass;
    body["S_over_E0"] = st.total;
    body["last_quarter_increase"] = st.last_quarter_increase;
    line = "last-quarter increase " + num(st.last_quarter_increase);
  } else {
    throw ConfigError("wave-general: unknown experiment " + experiment);
  }
  write_general_energy(run, *gr);
  if (snap_j.is_boolean() && snap_j.get<bool>()) {
    auto f = run.open("snapshot_final.txt");
    write_snapshot(f, gr->grid, gr->final_field);
  }
  body["max_energy_drift"] = gr->max_energy_drift;
  body["max_precursor"] = gr->max_precursor;
  body["dt"] = gr->dt;
  body["pass"] = ok;
  run.report("report.json", body);
  if (!c.quiet) out << "wave-general " << experiment << ": " << line << ", " << (ok ? "pass" : "fail") << "\n";
  return ok ? kExitPass : kExitFail;
}

int cmd_morawetz(const Common& c, std::ostream& out) {
  Json doc = load_config(c, true);
  Json rest = doc;
  const Json metric_spec = take(rest, "metric");
  const Json grid = take(rest, "grid");
  const Json a_j = take(rest, "a");
  const Json levels_j = take(rest, "levels");
  const Json every_j = take(rest, "every");
  const Json min_j = take(rest, "min_ratio");
  reject_leftovers(rest, "morawetz");
  if (metric_spec.is_object() && metric_spec.empty()) throw ConfigError("morawetz: no metric");
  const MetricField g = metric_from_json(metric_spec, config_dir(c));
  const GeneralConfig cfg = general_config_from_json(grid);
  const double a = a_j.is_number() ? a_j.get<double>() : cfg.radius_a();
  const int levels = levels_j.is_number_integer() ? levels_j.get<int>() : 3;
  const int every = every_j.is_number_integer() ? every_j.get<int>() : 10;
  const double min_ratio = min_j.is_number() ? min_j.get<double>() : 1.8;
  if (levels < 2 || levels > 6) throw ConfigError("morawetz: levels must lie in [2, 6]");
  if (every < 1) throw ConfigError("morawetz: every must be positive");
  if (!(a > cfg.r0 && a < cfg.outer())) throw ConfigError("morawetz: a must lie in (r0, R_max)");

  Run run("morawetz", c, Json{{"config", doc}});
  const MorawetzStudy study = morawetz_refinement(g, cfg, a, levels, every);
  {
    auto f = run.csv("morawetz.csv",
                      "N_r,N_theta,a,boundary_flux,boundary_energy,X_T,X_0,DH,div_kinetic,"
                      "div_gradient,residual");
    for (std::size_t k = 0; k < study.terms.size(); ++k) {
      const auto& t = study.terms[k];
      f << study.N_r[k] << "," << study.N_theta[k] << "," << num(t.a) << ","
        << num(t.boundary_flux) << "," << num(t.boundary_energy) << "," << num(t.X_T) << ","
        << num(t.X_0) << "," << num(t.DH) << "," << num(t.div_kinetic) << ","
        << num(t.div_gradient) << "," << num(t.residual()) << "\n";
    }
  }
  bool ok = true;
  for (double r : study.ratios) ok = ok && r >= min_ratio;
  run.report("report.json", Json{{"family", family_name(g.family())},
                                 {"ratios", study.ratios},
                                 {"min_ratio", min_ratio},
                                 {"pass", ok}});
  if (!c.quiet) {
    out << "morawetz " << family_name(g.family()) << ": ratios";
    for (double r : study.ratios) out << " " << num(r);
    out << ", " << (ok ? "pass" : "fail") << "\n";
  }
  return ok ? kExitPass : kExitFail;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "seed recorded in every output")->capture_default_str();
  sub->add_flag("--quiet", c.quiet, "no summary on stdout");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Escape metrics: certification, geodesic shooting and wave experiments"};
  app.require_subcommand(1);
  Common common;
  GeodesicFlags gf;

  auto* certify = app.add_subcommand("certify", "sample the escape inequalities of a metric");
  auto* geodesic = app.add_subcommand("geodesic", "shoot geodesics and check the escape bounds");
  auto* radial = app.add_subcommand("wave-radial", "radial wave equation with coefficient m/r");
  auto* general = app.add_subcommand("wave-general", "2D wave equation on a polar grid");
  auto* morawetz = app.add_subcommand("morawetz", "multiplier identity under refinement");
  for (auto* s : {certify, geodesic, radial, general, morawetz}) add_common(s, common);
  geodesic->add_option("--metric", gf.metric, "metric spec file (overrides the config)");
  geodesic->add_option("--x0", gf.x0, "start point, comma separated");
  geodesic->add_option("--dir", gf.dir, "initial direction, comma separated");
  geodesic->add_option("--T", gf.T, "final time");
  geodesic->add_option("--dt", gf.dt, "RK4 step");
  geodesic->add_flag("--reflect", gf.reflect, "reflect at r_c of exterior metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (*certify) return cmd_certify(common, out);
    if (*geodesic) return cmd_geodesic(common, gf, out);
    if (*radial) return cmd_wave_radial(common, out);
    if (*general) return cmd_wave_general(common, out);
    return cmd_morawetz(common, out);
  } catch (const HypothesisViolation& e) {
    err << "hypothesis violated: " << e.what() << "\n";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const MetricError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const CFLViolation& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const Json::exception& e) {
    err << "config error: " << e.what() << "\n";
  }
  return kExitConfig;
}

}  // namespace escape
