// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/run_config.hpp"

#include "koopdmd/error.hpp"
#include "koopdmd/scenarios.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace koopdmd {

namespace {

using nlohmann::json;

Eigen::Vector3d vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::Format, std::string(what) + " must be a 3-element array");
  return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

ForcingSpec parse_forcing(const json& j) {
  ForcingSpec f;
  const std::string type = j.value("type", "none");
  if (type == "none") {
    f.kind = ForcingSpec::Kind::None;
  } else if (type == "gravity") {
    f.kind = ForcingSpec::Kind::Gravity;
    f.gravity = vec3(j.at("g"), "forcing.g");
  } else if (type == "impulse") {
    f.kind = ForcingSpec::Kind::Impulse;
    for (const json& imp : j.at("impulses")) {
      f.impulses.push_back(Impulse{imp.at("vertex").get<std::size_t>(), imp.value("step", std::size_t{0}),
                                   vec3(imp.at("velocity"), "impulse velocity")});
    }
  } else if (type == "pressure") {
    f.kind = ForcingSpec::Kind::Pressure;
    f.hold = j.value("hold", std::size_t{20});
    f.max_pressure = j.value("max", 1.0);
  } else {
    throw Error(ErrorCode::Format, "unknown forcing type '" + type + "'");
  }
  return f;
}

FitOptions parse_fit(const json& j) {
  FitOptions o;
  const std::string rank = j.value("rank", "energy");
  if (rank == "energy") {
    o.rank = RankPolicy::with_energy(j.value("energy", 0.9999));
  } else if (rank == "fixed") {
    o.rank = RankPolicy::fixed(j.at("value").get<std::size_t>());
  } else {
    throw Error(ErrorCode::Format, "fit.rank must be 'energy' or 'fixed'");
  }
  o.clamp_unit_disk = j.value("clamp", true);
  return o;
}

}  // namespace

void RunConfig::validate() const {
  if (mesh.empty()) throw Error(ErrorCode::Usage, "config has no mesh path");
  if (!std::filesystem::exists(mesh)) throw Error(ErrorCode::Io, "mesh file not found: " + mesh.string());
  if (!(h > 0.0)) throw Error(ErrorCode::Domain, "config h must be positive");
  if (steps < 2) throw Error(ErrorCode::Domain, "config steps must be >= 2");
  if (forcing.kind == ForcingSpec::Kind::Pressure && forcing.hold == 0) {
    throw Error(ErrorCode::Domain, "pressure hold must be >= 1");
  }
}

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  try {
    const json j = json::parse(json_text);
    RunConfig c;
    std::filesystem::path mesh = j.at("mesh").get<std::string>();
    c.mesh = (mesh.is_relative() && !base_dir.empty()) ? base_dir / mesh : mesh;
    c.h = j.at("h").get<double>();
    c.steps = j.at("steps").get<std::size_t>();
    c.linear_springs = j.value("linear_springs", false);
    if (j.contains("forcing")) c.forcing = parse_forcing(j.at("forcing"));
    if (j.contains("fit")) c.fit = parse_fit(j.at("fit"));
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("newton")) {
      c.newton.tolerance = j.at("newton").value("tolerance", c.newton.tolerance);
      c.newton.max_iterations = j.at("newton").value("max_iterations", c.newton.max_iterations);
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["mesh"] = c.mesh.string();
  j["h"] = c.h;
  j["steps"] = c.steps;
  j["linear_springs"] = c.linear_springs;
  json f;
  switch (c.forcing.kind) {
    case ForcingSpec::Kind::None:
      f["type"] = "none";
      break;
    case ForcingSpec::Kind::Gravity:
      f["type"] = "gravity";
      f["g"] = vec3_json(c.forcing.gravity);
      break;
    case ForcingSpec::Kind::Impulse:
      f["type"] = "impulse";
      f["impulses"] = json::array();
      for (const Impulse& imp : c.forcing.impulses) {
        f["impulses"].push_back({{"vertex", imp.vertex}, {"step", imp.step}, {"velocity", vec3_json(imp.velocity)}});
      }
      break;
    case ForcingSpec::Kind::Pressure:
      f["type"] = "pressure";
      f["hold"] = c.forcing.hold;
      f["max"] = c.forcing.max_pressure;
      break;
  }
  j["forcing"] = f;
  if (c.fit.rank.kind == RankPolicy::Kind::Energy) {
    j["fit"] = {{"rank", "energy"}, {"energy", c.fit.rank.energy}, {"clamp", c.fit.clamp_unit_disk}};
  } else {
    j["fit"] = {{"rank", "fixed"}, {"value", c.fit.rank.rank}, {"clamp", c.fit.clamp_unit_disk}};
  }
  j["seed"] = c.seed;
  j["newton"] = {{"tolerance", c.newton.tolerance}, {"max_iterations", c.newton.max_iterations}};
  return j.dump(2);
}

Mesh load_config_mesh(const RunConfig& config) {
  Mesh mesh = load_mesh(config.mesh);
  mesh.model.law = config.linear_springs ? SpringLaw::Linearized : SpringLaw::Nonlinear;
  if (config.forcing.kind == ForcingSpec::Kind::Gravity) mesh.model.gravity = config.forcing.gravity;
  return mesh;
}

SnapshotSet generate_snapshots(const RunConfig& config, const Mesh& mesh) {
  config.validate();
  const ElasticModel& model = mesh.model;
  const std::size_t n = model.n_vertices();
  ForceSchedule schedule;
  switch (config.forcing.kind) {
    case ForcingSpec::Kind::None:
    case ForcingSpec::Kind::Gravity:
      break;
    case ForcingSpec::Kind::Impulse: {
      for (const Impulse& imp : config.forcing.impulses) {
        if (imp.vertex >= n) throw Error(ErrorCode::Domain, "impulse vertex out of range");
      }
      const double h = config.h;
      schedule = [impulses = config.forcing.impulses, &model, n, h](std::size_t t, const FullState&) {
        Eigen::MatrixX3d f = Eigen::MatrixX3d::Zero(static_cast<Eigen::Index>(n), 3);
        for (const Impulse& imp : impulses) {
          if (imp.step != t) continue;
          const auto v = static_cast<Eigen::Index>(imp.vertex);
          f.row(v) += (model.vertex_masses[v] / h) * imp.velocity.transpose();
        }
        return f;
      };
      break;
    }
    case ForcingSpec::Kind::Pressure: {
      if (mesh.chambers.empty()) throw Error(ErrorCode::Domain, "pressure forcing needs chambers in the mesh");
      schedule = pressure_schedule_forces(
          mesh.chambers, random_pressure_schedule(mesh.chambers.size(), config.steps, config.forcing.hold,
                                                  config.forcing.max_pressure, config.seed));
      break;
    }
  }
  return simulate_trajectory(model, rest_state(model), config.h, config.steps, schedule, config.newton);
}

}  // namespace koopdmd
