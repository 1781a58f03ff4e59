// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_SERVICE_HPP
#define KOOPDMD_SERVICE_HPP

#include "koopdmd/dmdfit.hpp"
#include "koopdmd/mesh_io.hpp"
#include "koopdmd/statespace.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace koopdmd {

struct ServiceDefaults {
  std::filesystem::path model;
  std::filesystem::path mesh;
};

/// One interactive session. Messages are JSON objects with a "type" field:
///
///   load         {"model": path, "mesh": path, "display": [vertex, ...]}
///                missing paths fall back to the server defaults
///   force        {"vertex": i, "vec": [x, y, z]}  force in newtons, applied on the next step
///   set_h        {"h": seconds}
///   set_damping  {"mu": fraction in [0, 1)}
///   step         {"n": count}
///   control      {"targets": [{"vertex": i, "displacement": [x, y, z]}, ...], "horizon": N}
///   reset        {}
///
/// Replies are state broadcasts {"type": "state", "version": v, "positions": [...]},
/// control results {"type": "control", ...} and errors
/// {"type": "error", "code": ..., "detail": ...}. A failed message leaves the
/// session unchanged.
class Session {
public:
  explicit Session(ServiceDefaults defaults = {});

  std::vector<nlohmann::json> handle(const nlohmann::json& msg);
  std::vector<std::string> handle_text(const std::string& text);

  void load(KoopmanModel model, std::optional<Mesh> mesh, std::vector<std::size_t> display = {});

  bool loaded() const noexcept { return pristine_.valid(); }
  const KoopmanModel& model() const noexcept { return model_; }
  const LiftedState& current() const noexcept { return current_; }
  const Eigen::VectorXd& pending_force() const noexcept { return pending_force_; }
  double h_active() const noexcept { return h_active_; }
  double mu_active() const noexcept { return mu_active_; }
  std::uint64_t version() const noexcept { return version_; }

  /// Broadcast positions: rest + displacement when a mesh is loaded, else the
  /// displacement alone; restricted to the display subset when one is set.
  std::vector<double> positions() const;
  std::vector<double> positions_of(const LiftedState& x) const;

private:
  nlohmann::json on_load(const nlohmann::json& msg);
  nlohmann::json on_force(const nlohmann::json& msg);
  nlohmann::json on_set_h(const nlohmann::json& msg);
  nlohmann::json on_set_damping(const nlohmann::json& msg);
  nlohmann::json on_step(const nlohmann::json& msg);
  nlohmann::json on_control(const nlohmann::json& msg);
  nlohmann::json on_reset();

  nlohmann::json broadcast();
  void rebuild_model();
  void require_loaded() const;

  ServiceDefaults defaults_;
  KoopmanModel pristine_;
  KoopmanModel model_;
  std::optional<Mesh> mesh_;
  std::vector<std::size_t> display_;
  LiftedState current_;
  Eigen::VectorXd pending_force_;
  double h_active_ = 0.0;
  double mu_active_ = 0.0;
  std::uint64_t version_ = 0;
};

nlohmann::json error_reply(const std::string& code, const std::string& detail);

}  // namespace koopdmd

#endif
