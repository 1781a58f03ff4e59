// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/service.hpp"

#include "koopdmd/control.hpp"
#include "koopdmd/error.hpp"
#include "koopdmd/formats.hpp"
#include "koopdmd/koopstep.hpp"

#include <cmath>

namespace koopdmd {

namespace {

using nlohmann::json;

constexpr int kKeyframes = 8;

Eigen::Vector3d read_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::Protocol, std::string(what) + " must be [x, y, z]");
  Eigen::Vector3d v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!v.allFinite()) throw Error(ErrorCode::Protocol, std::string(what) + " must be finite");
  return v;
}

std::size_t read_index(const json& j, const char* what) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    throw Error(ErrorCode::Protocol, std::string(what) + " must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

VertexGoal read_target(const json& t) {
  if (t.is_object()) return VertexGoal{read_index(t.at("vertex"), "target vertex"), read_vec3(t.at("displacement"), "target")};
  if (t.is_array() && t.size() == 2) return VertexGoal{read_index(t[0], "target vertex"), read_vec3(t[1], "target")};
  throw Error(ErrorCode::Protocol, "target must be {vertex, displacement} or [vertex, [x, y, z]]");
}

}  // namespace

json error_reply(const std::string& code, const std::string& detail) {
  return json{{"type", "error"}, {"code", code}, {"detail", detail}};
}

Session::Session(ServiceDefaults defaults) : defaults_(std::move(defaults)) {}

std::vector<json> Session::handle(const json& msg) {
  try {
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      throw Error(ErrorCode::Protocol, "message must be an object with a string 'type'");
    }
    const std::string type = msg["type"].get<std::string>();
    json reply;
    if (type == "load") {
      reply = on_load(msg);
    } else if (type == "force") {
      reply = on_force(msg);
    } else if (type == "set_h") {
      reply = on_set_h(msg);
    } else if (type == "set_damping") {
      reply = on_set_damping(msg);
    } else if (type == "step") {
      reply = on_step(msg);
    } else if (type == "control") {
      reply = on_control(msg);
    } else if (type == "reset") {
      reply = on_reset();
    } else {
      throw Error(ErrorCode::Protocol, "unknown message type '" + type + "'");
    }
    if (reply.is_null()) return {};
    return {std::move(reply)};
  } catch (const Error& e) {
    return {error_reply(to_string(e.code()), e.what())};
  } catch (const json::exception& e) {
    return {error_reply("protocol", e.what())};
  } catch (const std::exception& e) {
    return {error_reply("internal", e.what())};
  }
}

std::vector<std::string> Session::handle_text(const std::string& text) {
  std::vector<std::string> out;
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::exception& e) {
    out.push_back(error_reply("protocol", std::string("invalid JSON: ") + e.what()).dump());
    return out;
  }
  for (const json& r : handle(msg)) out.push_back(r.dump());
  return out;
}

void Session::load(KoopmanModel model, std::optional<Mesh> mesh, std::vector<std::size_t> display) {
  if (!model.valid()) throw Error(ErrorCode::Domain, "cannot load an empty model");
  if (model.dim() % 6 != 0) throw Error(ErrorCode::Dimension, "session models need a lifted 6n state");
  const auto n = static_cast<std::size_t>(model.dim() / 6);
  if (mesh && mesh->model.n_vertices() != n) {
    throw Error(ErrorCode::Dimension, "mesh has " + std::to_string(mesh->model.n_vertices()) + " vertices, model expects " +
                                          std::to_string(n));
  }
  for (std::size_t v : display) {
    if (v >= n) throw Error(ErrorCode::Dimension, "display vertex out of range");
  }
  pristine_ = model;
  model_ = std::move(model);
  mesh_ = std::move(mesh);
  display_ = std::move(display);
  h_active_ = pristine_.h();
  mu_active_ = 0.0;
  current_ = LiftedState(n);
  pending_force_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * n));
}

std::vector<double> Session::positions() const { return positions_of(current_); }

std::vector<double> Session::positions_of(const LiftedState& x) const {
  const Eigen::Index n = x.values().size() / 6;
  Eigen::VectorXd p = x.displacement();
  if (mesh_) {
    for (Eigen::Index v = 0; v < n; ++v) p.segment<3>(3 * v) += mesh_->model.rest_positions.row(v).transpose();
  }
  std::vector<double> out;
  if (display_.empty()) {
    out.assign(p.data(), p.data() + p.size());
  } else {
    out.reserve(3 * display_.size());
    for (std::size_t v : display_) {
      for (int c = 0; c < 3; ++c) out.push_back(p[static_cast<Eigen::Index>(3 * v) + c]);
    }
  }
  return out;
}

json Session::broadcast() {
  return json{{"type", "state"}, {"version", ++version_}, {"positions", positions()}};
}

void Session::require_loaded() const {
  if (!loaded()) throw Error(ErrorCode::Protocol, "no model loaded; send a load message first");
}

void Session::rebuild_model() {
  KoopmanModel m = pristine_;
  if (h_active_ != pristine_.h()) m = rescale_timestep(m, h_active_);
  if (mu_active_ != 0.0) m = apply_damping(m, mu_active_);
  model_ = std::move(m);
}

json Session::on_load(const json& msg) {
  std::filesystem::path model_path = msg.contains("model") ? msg["model"].get<std::string>() : defaults_.model.string();
  if (model_path.empty()) throw Error(ErrorCode::Protocol, "load needs a model path");
  std::filesystem::path mesh_path = msg.contains("mesh") ? msg["mesh"].get<std::string>() : defaults_.mesh.string();
  std::vector<std::size_t> display;
  if (msg.contains("display")) {
    for (const json& v : msg["display"]) display.push_back(read_index(v, "display vertex"));
  }
  KoopmanModel model = load_model(model_path);
  std::optional<Mesh> mesh;
  if (!mesh_path.empty()) mesh = load_mesh(mesh_path);
  load(std::move(model), std::move(mesh), std::move(display));
  return broadcast();
}

json Session::on_force(const json& msg) {
  require_loaded();
  const std::size_t v = read_index(msg.at("vertex"), "vertex");
  const Eigen::Vector3d f = read_vec3(msg.at("vec"), "vec");
  const auto n = static_cast<std::size_t>(pending_force_.size() / 3);
  if (v >= n) throw Error(ErrorCode::Dimension, "force vertex out of range");
  double mass = 1.0;
  if (mesh_) {
    if (mesh_->model.is_fixed(v)) return nullptr;
    mass = mesh_->model.vertex_masses[static_cast<Eigen::Index>(v)];
  }
  pending_force_.segment<3>(static_cast<Eigen::Index>(3 * v)) += f / mass;
  return nullptr;
}

json Session::on_set_h(const json& msg) {
  require_loaded();
  const double h = msg.at("h").get<double>();
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::Domain, "h must be positive and finite");
  const double old = h_active_;
  h_active_ = h;
  try {
    rebuild_model();
  } catch (...) {
    h_active_ = old;
    throw;
  }
  return broadcast();
}

json Session::on_set_damping(const json& msg) {
  require_loaded();
  const double mu = msg.at("mu").get<double>();
  if (!(mu >= 0.0 && mu < 1.0)) throw Error(ErrorCode::Domain, "mu must lie in [0, 1)");
  const double old = mu_active_;
  mu_active_ = mu;
  try {
    rebuild_model();
  } catch (...) {
    mu_active_ = old;
    throw;
  }
  return broadcast();
}

json Session::on_step(const json& msg) {
  require_loaded();
  const std::size_t n = msg.contains("n") ? read_index(msg["n"], "n") : 1;
  if (n == 0) return broadcast();
  Eigen::VectorXd x = current_.values();
  if (!pending_force_.isZero(0.0)) x += lift_force(pending_force_, h_active_).values();
  current_ = LiftedState(real_multi_step(*model_.real_operator(), model_, x, n));
  pending_force_.setZero();
  return broadcast();
}

json Session::on_control(const json& msg) {
  require_loaded();
  if (!mesh_ || mesh_->chambers.empty()) throw Error(ErrorCode::Domain, "control needs a mesh with chambers");
  std::vector<VertexGoal> goals;
  for (const json& t : msg.at("targets")) goals.push_back(read_target(t));
  if (goals.empty()) throw Error(ErrorCode::Protocol, "control needs at least one target");
  const std::size_t n = mesh_->model.n_vertices();
  for (const VertexGoal& g : goals) {
    if (g.vertex >= n) throw Error(ErrorCode::Dimension, "target vertex out of range");
  }
  const std::uint64_t horizon = read_index(msg.at("horizon"), "horizon");
  const int iterations = msg.value("iterations", 5);
  const double weight = msg.value("momentum_weight", 1.0);
  const ControlProblem problem = ControlProblem::for_vertex_goals(mesh_->chambers, goals, horizon, iterations, weight);
  const ControlSolution sol = solve_pressures(model_, mesh_->model, problem, current_);

  const LiftedState& basis_state = sol.trace.size() > 1 ? sol.trace[sol.trace.size() - 2].predicted : current_;
  const PressureForceMap map = pressure_force_map(mesh_->model, basis_state, mesh_->chambers, model_.h());
  const Eigen::VectorXcd z_force = model_.project(Eigen::VectorXd(map.A * sol.pressures));

  json keyframes = json::array();
  for (int k = 1; k <= kKeyframes; ++k) {
    const auto t = static_cast<std::uint64_t>(std::ceil(static_cast<double>(k) * static_cast<double>(horizon) / kKeyframes));
    if (t == 0 || (!keyframes.empty() && keyframes.back()["step"].get<std::uint64_t>() == t)) continue;
    Eigen::VectorXd x = model_.lift_coordinates(propagator_sum(model_, t).cwiseProduct(z_force));
    x += real_multi_step(*model_.real_operator(), model_, current_.values(), t);
    keyframes.push_back({{"step", t}, {"positions", positions_of(LiftedState(x))}});
  }

  std::vector<double> pressures(sol.pressures.data(), sol.pressures.data() + sol.pressures.size());
  return json{{"type", "control"},  {"pressures", pressures}, {"goal_error", sol.goal_error},
              {"residual", sol.residual}, {"horizon", horizon}, {"keyframes", keyframes}};
}

json Session::on_reset() {
  require_loaded();
  current_ = LiftedState(static_cast<std::size_t>(model_.dim() / 6));
  pending_force_.setZero();
  return broadcast();
}

}  // namespace koopdmd
