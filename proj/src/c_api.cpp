// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/koopdmd.h"

#include "koopdmd/control.hpp"
#include "koopdmd/dmdfit.hpp"
#include "koopdmd/error.hpp"
#include "koopdmd/formats.hpp"
#include "koopdmd/koopstep.hpp"
#include "koopdmd/mesh_io.hpp"
#include "koopdmd/metrics.hpp"
#include "koopdmd/refsim.hpp"
#include "koopdmd/run_config.hpp"
#include "koopdmd/server.hpp"
#include "koopdmd/service.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

struct kd_mesh {
  koopdmd::Mesh mesh;
};
struct kd_config {
  koopdmd::RunConfig config;
};
struct kd_snapshots {
  koopdmd::SnapshotSet snaps;
};
struct kd_model {
  koopdmd::KoopmanModel model;
};
struct kd_session {
  koopdmd::Session session;
};
struct kd_server {
  std::unique_ptr<koopdmd::Server> server;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

kd_status from_code(koopdmd::ErrorCode code) {
  using koopdmd::ErrorCode;
  switch (code) {
    case ErrorCode::Dimension: return KD_ERR_DIMENSION;
    case ErrorCode::Domain: return KD_ERR_DOMAIN;
    case ErrorCode::Convergence: return KD_ERR_CONVERGENCE;
    case ErrorCode::InsufficientData: return KD_ERR_INSUFFICIENT_DATA;
    case ErrorCode::DegenerateData: return KD_ERR_DEGENERATE_DATA;
    case ErrorCode::IllConditioned: return KD_ERR_ILL_CONDITIONED;
    case ErrorCode::SingularLog: return KD_ERR_SINGULAR_LOG;
    case ErrorCode::StepSize: return KD_ERR_STEP_SIZE;
    case ErrorCode::Io: return KD_ERR_IO;
    case ErrorCode::Format: return KD_ERR_FORMAT;
    case ErrorCode::Usage: return KD_ERR_USAGE;
    case ErrorCode::Protocol: return KD_ERR_PROTOCOL;
  }
  return KD_ERR_INTERNAL;
}

kd_status fail(kd_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
kd_status guard(F&& body) {
  try {
    body();
    return KD_OK;
  } catch (const koopdmd::Error& e) {
    return fail(from_code(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail(KD_ERR_FORMAT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(KD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(KD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(KD_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw koopdmd::Error(koopdmd::ErrorCode::Usage, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Eigen::VectorXd read_state(const double* x, std::size_t dim, const koopdmd::KoopmanModel& model) {
  require(x != nullptr, "state pointer is null");
  if (static_cast<Eigen::Index>(dim) != model.dim()) {
    throw koopdmd::Error(koopdmd::ErrorCode::Dimension, "state length " + std::to_string(dim) +
                                                             " does not match model dimension " +
                                                             std::to_string(model.dim()));
  }
  return Eigen::Map<const Eigen::VectorXd>(x, static_cast<Eigen::Index>(dim));
}

void write_state(const Eigen::VectorXd& v, double* out) {
  require(out != nullptr, "output pointer is null");
  std::memcpy(out, v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json fit_report_json(const koopdmd::FitResult& fit) {
  const koopdmd::FitReport& r = fit.report;
  json eig = json::array();
  for (Eigen::Index i = 0; i < fit.model.rank(); ++i) {
    eig.push_back({fit.model.eigenvalues()[i].real(), fit.model.eigenvalues()[i].imag()});
  }
  return json{{"rank", r.rank},
              {"singular_values", vector_json(r.singular_values)},
              {"energy_profile", vector_json(r.energy_profile)},
              {"step_residuals", r.step_residuals},
              {"relative_step_residual", r.relative_step_residual},
              {"mean_reconstruction_error", r.mean_reconstruction_error},
              {"max_abs_eigenvalue", r.max_abs_eigenvalue},
              {"max_abs_eigenvalue_raw", r.max_abs_eigenvalue_raw},
              {"clamped_count", r.clamped_count},
              {"h", fit.model.h()},
              {"eigenvalues", eig}};
}

}  // namespace

extern "C" {

const char* kd_version(void) { return "1.0.0"; }

const char* kd_last_error(void) { return g_last_error.c_str(); }

const char* kd_status_string(kd_status status) {
  switch (status) {
    case KD_OK: return "ok";
    case KD_ERR_DIMENSION: return "dimension";
    case KD_ERR_DOMAIN: return "domain";
    case KD_ERR_CONVERGENCE: return "convergence";
    case KD_ERR_INSUFFICIENT_DATA: return "insufficient_data";
    case KD_ERR_DEGENERATE_DATA: return "degenerate_data";
    case KD_ERR_ILL_CONDITIONED: return "ill_conditioned";
    case KD_ERR_SINGULAR_LOG: return "singular_log";
    case KD_ERR_STEP_SIZE: return "step_size";
    case KD_ERR_IO: return "io";
    case KD_ERR_FORMAT: return "format";
    case KD_ERR_USAGE: return "usage";
    case KD_ERR_PROTOCOL: return "protocol";
    case KD_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case KD_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void kd_string_free(char* s) { std::free(s); }

kd_status kd_mesh_load(const char* path, kd_mesh** out) {
  if (!path || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { *out = new kd_mesh{koopdmd::load_mesh(path)}; });
}

kd_status kd_mesh_save(const kd_mesh* mesh, const char* path) {
  if (!mesh || !path) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { koopdmd::save_mesh(path, mesh->mesh); });
}

kd_status kd_mesh_set_linear(kd_mesh* mesh, int linear) {
  if (!mesh) return fail(KD_ERR_INVALID_ARGUMENT, "null mesh");
  mesh->mesh.model.law = linear ? koopdmd::SpringLaw::Linearized : koopdmd::SpringLaw::Nonlinear;
  return KD_OK;
}

kd_status kd_mesh_set_gravity(kd_mesh* mesh, double gx, double gy, double gz) {
  if (!mesh) return fail(KD_ERR_INVALID_ARGUMENT, "null mesh");
  mesh->mesh.model.gravity = Eigen::Vector3d(gx, gy, gz);
  return KD_OK;
}

size_t kd_mesh_vertex_count(const kd_mesh* mesh) { return mesh ? mesh->mesh.model.n_vertices() : 0; }

size_t kd_mesh_chamber_count(const kd_mesh* mesh) { return mesh ? mesh->mesh.chambers.size() : 0; }

kd_status kd_mesh_masses(const kd_mesh* mesh, double* masses, size_t n) {
  if (!mesh || !masses) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  if (n != mesh->mesh.model.n_vertices()) return fail(KD_ERR_DIMENSION, "mass buffer length differs from vertex count");
  std::memcpy(masses, mesh->mesh.model.vertex_masses.data(), n * sizeof(double));
  return KD_OK;
}

void kd_mesh_free(kd_mesh* mesh) { delete mesh; }

kd_status kd_config_load(const char* path, kd_config** out) {
  if (!path || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { *out = new kd_config{koopdmd::load_run_config(path)}; });
}

kd_status kd_config_set_seed(kd_config* config, uint64_t seed) {
  if (!config) return fail(KD_ERR_INVALID_ARGUMENT, "null config");
  config->config.seed = seed;
  return KD_OK;
}

kd_status kd_config_to_json(const kd_config* config, char** json_out) {
  if (!config || !json_out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { *json_out = dup_string(koopdmd::run_config_to_json(config->config)); });
}

void kd_config_free(kd_config* config) { delete config; }

kd_status kd_generate_snapshots(const kd_config* config, kd_snapshots** out) {
  if (!config || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    const koopdmd::Mesh mesh = koopdmd::load_config_mesh(config->config);
    *out = new kd_snapshots{koopdmd::generate_snapshots(config->config, mesh)};
  });
}

kd_status kd_snapshots_load(const char* path, kd_snapshots** out) {
  if (!path || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { *out = new kd_snapshots{koopdmd::load_snapshots(path)}; });
}

kd_status kd_snapshots_save(const kd_snapshots* snaps, const char* path) {
  if (!snaps || !path) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { koopdmd::save_snapshots(path, snaps->snaps); });
}

size_t kd_snapshots_frame_count(const kd_snapshots* snaps) { return snaps ? snaps->snaps.num_frames() : 0; }

size_t kd_snapshots_dim(const kd_snapshots* snaps) {
  return snaps ? static_cast<size_t>(snaps->snaps.dim()) : 0;
}

double kd_snapshots_h(const kd_snapshots* snaps) { return snaps ? snaps->snaps.h : 0.0; }

kd_status kd_snapshots_frame(const kd_snapshots* snaps, size_t index, double* out, size_t dim) {
  if (!snaps || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  if (index >= snaps->snaps.num_frames()) return fail(KD_ERR_DOMAIN, "frame index out of range");
  if (dim != static_cast<size_t>(snaps->snaps.dim())) return fail(KD_ERR_DIMENSION, "frame buffer length mismatch");
  write_state(snaps->snaps.states[index].values(), out);
  return KD_OK;
}

void kd_snapshots_free(kd_snapshots* snaps) { delete snaps; }

kd_status kd_fit(const kd_snapshots* snaps, kd_rank_kind kind, double energy, size_t fixed_rank, int clamp,
                 kd_model** out, char** report_json) {
  if (!snaps || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    koopdmd::FitOptions opts;
    if (kind == KD_RANK_FIXED) {
      opts.rank = koopdmd::RankPolicy::fixed(fixed_rank);
    } else {
      opts.rank = koopdmd::RankPolicy::with_energy(energy);
    }
    opts.clamp_unit_disk = clamp != 0;
    koopdmd::FitResult fit = koopdmd::fit(snaps->snaps, opts);
    char* report = report_json ? dup_string(fit_report_json(fit).dump(2)) : nullptr;
    *out = new kd_model{std::move(fit.model)};
    if (report_json) *report_json = report;
  });
}

kd_status kd_model_load(const char* path, kd_model** out) {
  if (!path || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { *out = new kd_model{koopdmd::load_model(path)}; });
}

kd_status kd_model_save(const kd_model* model, const char* path) {
  if (!model || !path) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { koopdmd::save_model(path, model->model); });
}

size_t kd_model_dim(const kd_model* model) { return model ? static_cast<size_t>(model->model.dim()) : 0; }

size_t kd_model_rank(const kd_model* model) { return model ? static_cast<size_t>(model->model.rank()) : 0; }

double kd_model_h(const kd_model* model) { return model ? model->model.h() : 0.0; }

kd_status kd_model_eigenvalues(const kd_model* model, double* out, size_t len) {
  if (!model || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  const Eigen::VectorXcd& lambda = model->model.eigenvalues();
  if (len != static_cast<size_t>(2 * lambda.size())) return fail(KD_ERR_DIMENSION, "eigenvalue buffer needs 2r entries");
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    out[2 * i] = lambda[i].real();
    out[2 * i + 1] = lambda[i].imag();
  }
  return KD_OK;
}

kd_status kd_model_rescale(const kd_model* model, double h_new, kd_model** out) {
  if (!model || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { *out = new kd_model{koopdmd::rescale_timestep(model->model, h_new)}; });
}

kd_status kd_model_damp(const kd_model* model, double mu, kd_model** out) {
  if (!model || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { *out = new kd_model{koopdmd::apply_damping(model->model, mu)}; });
}

void kd_model_free(kd_model* model) { delete model; }

kd_status kd_step(const kd_model* model, const double* x, double* out, size_t dim) {
  if (!model) return fail(KD_ERR_INVALID_ARGUMENT, "null model");
  return guard([&] { write_state(koopdmd::step(model->model, read_state(x, dim, model->model)), out); });
}

kd_status kd_multi_step(const kd_model* model, const double* x, uint64_t n, double* out, size_t dim) {
  if (!model) return fail(KD_ERR_INVALID_ARGUMENT, "null model");
  return guard([&] {
    write_state(koopdmd::multi_step(model->model, read_state(x, dim, model->model), static_cast<double>(n)), out);
  });
}

kd_status kd_real_multi_step(const kd_model* model, const double* x, uint64_t n, double* out, size_t dim) {
  if (!model) return fail(KD_ERR_INVALID_ARGUMENT, "null model");
  return guard([&] {
    const koopdmd::KoopmanModel& m = model->model;
    write_state(koopdmd::real_multi_step(*m.real_operator(), m, read_state(x, dim, m), n), out);
  });
}

kd_status kd_kinetic_energy(const double* x, size_t dim, const double* masses, double h, double* out) {
  if (!x || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    const koopdmd::LiftedState state(Eigen::Map<const Eigen::VectorXd>(x, static_cast<Eigen::Index>(dim)));
    const auto n = static_cast<Eigen::Index>(state.n_vertices());
    const Eigen::VectorXd m = masses ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(masses, n))
                                     : Eigen::VectorXd(Eigen::VectorXd::Ones(n));
    *out = koopdmd::kinetic_energy(state, m, h);
  });
}

kd_status kd_refsim_advance(const kd_mesh* mesh, const double* x, double h, uint64_t steps, double* out, size_t dim) {
  if (!mesh || !x || !out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    const koopdmd::ElasticModel& body = mesh->mesh.model;
    if (dim != 6 * body.n_vertices()) throw koopdmd::Error(koopdmd::ErrorCode::Dimension, "state does not match mesh");
    const koopdmd::LiftedState x0(Eigen::Map<const Eigen::VectorXd>(x, static_cast<Eigen::Index>(dim)));
    koopdmd::FullState s = koopdmd::to_full_state(body, x0, h);
    const Eigen::MatrixX3d zero = Eigen::MatrixX3d::Zero(static_cast<Eigen::Index>(body.n_vertices()), 3);
    Eigen::MatrixX3d prev = s.positions;
    for (uint64_t t = 0; t < steps; ++t) {
      prev = s.positions;
      s = koopdmd::implicit_euler_step(body, s, h, zero);
    }
    const auto n = static_cast<Eigen::Index>(body.n_vertices());
    Eigen::VectorXd u(3 * n);
    Eigen::VectorXd u_prev(3 * n);
    for (Eigen::Index v = 0; v < n; ++v) {
      u.segment<3>(3 * v) = (s.positions.row(v) - body.rest_positions.row(v)).transpose();
      u_prev.segment<3>(3 * v) = (prev.row(v) - body.rest_positions.row(v)).transpose();
    }
    if (steps == 0) {
      write_state(x0.values(), out);
    } else {
      write_state(koopdmd::lift(u, u_prev).values(), out);
    }
  });
}

kd_status kd_control_run(const kd_model* model, const kd_mesh* mesh, const char* problem_json, char** result_json) {
  if (!model || !mesh || !problem_json || !result_json) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    const json p = json::parse(problem_json);
    std::vector<koopdmd::VertexGoal> goals;
    for (const json& t : p.at("targets")) {
      const json& d = t.at("displacement");
      goals.push_back({t.at("vertex").get<std::size_t>(),
                       Eigen::Vector3d(d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>())});
    }
    const koopdmd::Mesh& m = mesh->mesh;
    for (const auto& g : goals) {
      if (g.vertex >= m.model.n_vertices()) throw koopdmd::Error(koopdmd::ErrorCode::Dimension, "goal vertex out of range");
    }
    const std::uint64_t horizon = p.at("horizon").get<std::uint64_t>();
    const koopdmd::ControlProblem problem = koopdmd::ControlProblem::for_vertex_goals(
        m.chambers, goals, horizon, p.value("iterations", 5), p.value("momentum_weight", 1.0));
    const koopdmd::LiftedState x0(m.model.n_vertices());
    const koopdmd::ControlSolution sol = koopdmd::solve_pressures(model->model, m.model, problem, x0);
    const std::uint64_t replay_steps = p.value("replay_steps", horizon);
    const koopdmd::ControlReplay replay =
        koopdmd::replay_pressures(model->model, m.model, m.chambers, sol.pressures, replay_steps);

    json trace = json::array();
    for (const auto& it : sol.trace) {
      trace.push_back({{"pressures", vector_json(it.pressures)}, {"goal_error", it.goal_error}, {"residual", it.residual}});
    }
    auto pick = [&](const koopdmd::LiftedState& x) {
      json out = json::array();
      for (Eigen::Index d : problem.selected_dofs) out.push_back(x.values()[d]);
      return out;
    };
    json result{{"pressures", vector_json(sol.pressures)},
                {"goal", vector_json(problem.goal)},
                {"goal_error", sol.goal_error},
                {"relative_goal_error", problem.goal.norm() > 0 ? sol.goal_error / problem.goal.norm() : sol.goal_error},
                {"residual", sol.residual},
                {"iterations", trace},
                {"predicted_goal_dofs", pick(sol.trace.back().predicted)},
                {"reduced_final_goal_dofs", pick(replay.reduced.back())},
                {"full_final_goal_dofs", pick(replay.full.back())},
                {"frame_pmse", replay.frame_pmse},
                {"max_frame_pmse", koopdmd::max_value(replay.frame_pmse)},
                {"mean_frame_pmse", koopdmd::mean(replay.frame_pmse)}};
    *result_json = dup_string(result.dump(2));
  });
}

kd_status kd_session_new(const char* default_model, const char* default_mesh, kd_session** out) {
  if (!out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    koopdmd::ServiceDefaults d;
    if (default_model) d.model = default_model;
    if (default_mesh) d.mesh = default_mesh;
    *out = new kd_session{koopdmd::Session(std::move(d))};
  });
}

kd_status kd_session_handle(kd_session* session, const char* message_json, char** replies_json) {
  if (!session || !message_json || !replies_json) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    json replies = json::array();
    for (const std::string& r : session->session.handle_text(message_json)) replies.push_back(json::parse(r));
    *replies_json = dup_string(replies.dump());
  });
}

void kd_session_free(kd_session* session) { delete session; }

kd_status kd_server_start(const char* host, uint16_t port, const char* default_model, const char* default_mesh,
                          kd_server** out, uint16_t* bound_port) {
  if (!out) return fail(KD_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    koopdmd::ServerOptions opts;
    if (host) opts.host = host;
    opts.port = port;
    if (default_model) opts.defaults.model = default_model;
    if (default_mesh) opts.defaults.mesh = default_mesh;
    auto server = std::make_unique<koopdmd::Server>(std::move(opts));
    const std::uint16_t p = server->start();
    if (bound_port) *bound_port = p;
    *out = new kd_server{std::move(server)};
  });
}

kd_status kd_server_wait(kd_server* server) {
  if (!server) return fail(KD_ERR_INVALID_ARGUMENT, "null server");
  return guard([&] { server->server->wait(); });
}

kd_status kd_server_stop(kd_server* server) {
  if (!server) return fail(KD_ERR_INVALID_ARGUMENT, "null server");
  return guard([&] { server->server->stop(); });
}

void kd_server_free(kd_server* server) { delete server; }

}  // extern "C"
