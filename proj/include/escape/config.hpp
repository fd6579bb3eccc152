#pragma once

#include <cstdint>
#include <string>

#include "escape/geodesic.hpp"
#include "escape/metric.hpp"
#include "escape/wave_general.hpp"
#include "escape/wave_radial.hpp"
#include "json.hpp"

namespace escape {

using Json = nlohmann::json;

/// Throws ConfigError when the file is missing or not valid JSON.
Json load_json_file(const std::string& path);

/// Metric spec:
///   { "dim": 2, "family": "radial_power", "r_c": 1, "domain": "full",
///     "params": { "m1": 2 },
///     "alpha": { "kind": "power" | "shifted_power", "coef": c, "exponent": e },
///     "q_field": { "kind": "zero" | "scalar_profile", "coef": c, "exponent": e },
///     "p_boundary": 1,
///     "table": { "r_start": 0, "dr": 0.1, "phi": [...] } }
/// power gives alpha = c r^e, shifted_power gives c r^e - 1/r. For built-in
/// families an alpha entry replaces the declared one. A string is read as a
/// path relative to base_dir. Throws ConfigError on unknown keys or bad values.
MetricField metric_from_json(const Json& spec, const std::string& base_dir = ".");

/// Fields of RadialConfig by name; "preset": "decay" starts from decay_config(m).
RadialConfig radial_config_from_json(const Json& j);
/// Fields of GeneralConfig by name.
GeneralConfig general_config_from_json(const Json& j);
DecayHypotheses decay_hypotheses_from_json(const Json& j);

/// Shot set for the geodesic command.
struct ShotConfig {
  std::vector<Vec> x0;
  Vec direction;  // empty: `directions` equally spaced (n = 2) or seeded
  BatchOptions batch;
  double tolerance = 1e-3;  // theorem margins below -tolerance fail the run
};
ShotConfig shot_config_from_json(const Json& j, int dim);

std::uint64_t fnv1a64(const std::string& bytes);
/// 16 hex digits of fnv1a64 over the compact dump (keys sorted).
std::string config_hash(const Json& j);

}  // namespace escape
