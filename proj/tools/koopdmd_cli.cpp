// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/koopdmd.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitInternal = 1;

struct CliFailure : std::runtime_error {
  CliFailure(int code, const std::string& what) : std::runtime_error(what), exit_code(code) {}
  int exit_code;
};

int exit_code_for(kd_status s) {
  switch (s) {
    case KD_OK: return 0;
    case KD_ERR_USAGE:
    case KD_ERR_INVALID_ARGUMENT: return kExitUsage;
    case KD_ERR_DIMENSION:
    case KD_ERR_DOMAIN:
    case KD_ERR_INSUFFICIENT_DATA:
    case KD_ERR_DEGENERATE_DATA:
    case KD_ERR_IO:
    case KD_ERR_FORMAT:
    case KD_ERR_PROTOCOL: return kExitData;
    case KD_ERR_CONVERGENCE:
    case KD_ERR_ILL_CONDITIONED:
    case KD_ERR_SINGULAR_LOG:
    case KD_ERR_STEP_SIZE: return kExitNumerical;
    case KD_ERR_INTERNAL: return kExitInternal;
  }
  return kExitInternal;
}

void check(kd_status s, const std::string& context) {
  if (s != KD_OK) throw CliFailure(exit_code_for(s), context + ": " + kd_last_error());
}

struct Deleter {
  void operator()(kd_mesh* p) const { kd_mesh_free(p); }
  void operator()(kd_config* p) const { kd_config_free(p); }
  void operator()(kd_snapshots* p) const { kd_snapshots_free(p); }
  void operator()(kd_model* p) const { kd_model_free(p); }
  void operator()(kd_server* p) const { kd_server_free(p); }
  void operator()(char* p) const { kd_string_free(p); }
};
template <typename T>
using Handle = std::unique_ptr<T, Deleter>;

std::string take_string(char* s) {
  Handle<char> owned(s);
  return s ? std::string(s) : std::string();
}

Handle<kd_model> load_model(const std::string& path) {
  kd_model* m = nullptr;
  check(kd_model_load(path.c_str(), &m), "loading model " + path);
  return Handle<kd_model>(m);
}

Handle<kd_mesh> load_mesh(const std::string& path, bool linear) {
  kd_mesh* m = nullptr;
  check(kd_mesh_load(path.c_str(), &m), "loading mesh " + path);
  check(kd_mesh_set_linear(m, linear ? 1 : 0), "mesh");
  return Handle<kd_mesh>(m);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CliFailure(kExitData, "cannot write " + path.string());
  out << text;
  if (!out) throw CliFailure(kExitData, "write failed for " + path.string());
}

fs::path output_dir(const std::string& dir) {
  fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw CliFailure(kExitData, "cannot create output directory " + p.string() + ": " + ec.message());
  return p;
}

// Either "n1,n2,..." or repeated values.
std::vector<std::uint64_t> parse_counts(const std::vector<std::string>& items) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) throw std::invalid_argument(tok);
        out.push_back(static_cast<std::uint64_t>(v));
      } catch (const std::exception&) {
        throw CliFailure(kExitUsage, "not a step count: '" + tok + "'");
      }
    }
  }
  return out;
}

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string output;
};

int cmd_gen_data(const Globals& g) {
  if (g.config.empty()) throw CliFailure(kExitUsage, "gen-data needs --config");
  kd_config* raw = nullptr;
  check(kd_config_load(g.config.c_str(), &raw), "loading config " + g.config);
  Handle<kd_config> cfg(raw);
  if (g.seed_set) check(kd_config_set_seed(cfg.get(), g.seed), "config");
  kd_snapshots* snaps_raw = nullptr;
  check(kd_generate_snapshots(cfg.get(), &snaps_raw), "generating snapshots");
  Handle<kd_snapshots> snaps(snaps_raw);
  const fs::path dir = output_dir(g.output);
  const fs::path file = dir / "snapshots.kpss";
  check(kd_snapshots_save(snaps.get(), file.c_str()), "writing " + file.string());
  char* cfg_json = nullptr;
  check(kd_config_to_json(cfg.get(), &cfg_json), "config");
  write_text(dir / "run_config.json", take_string(cfg_json) + "\n");
  std::cout << "wrote " << file.string() << " (" << kd_snapshots_frame_count(snaps.get()) << " frames, dim "
            << kd_snapshots_dim(snaps.get()) << ")\n";
  return 0;
}

struct FitArgs {
  std::string snapshots;
  double energy = 0.9999;
  std::size_t rank = 0;
  bool fixed_rank = false;
  bool no_clamp = false;
  bool policy_given = false;
};

// Rank policy and clamping from the config's "fit" block, unless overridden on the command line.
void apply_config_fit(const Globals& g, FitArgs& a) {
  if (g.config.empty()) return;
  kd_config* raw = nullptr;
  check(kd_config_load(g.config.c_str(), &raw), "loading config " + g.config);
  Handle<kd_config> cfg(raw);
  char* text = nullptr;
  check(kd_config_to_json(cfg.get(), &text), "config");
  const json fit = json::parse(take_string(text)).value("fit", json::object());
  if (!a.policy_given) {
    if (fit.value("rank", "energy") == "fixed") {
      a.rank = fit.at("value").get<std::size_t>();
      a.fixed_rank = true;
    } else {
      a.energy = fit.value("energy", a.energy);
    }
  }
  if (!fit.value("clamp", true)) a.no_clamp = true;
}

int cmd_fit(const Globals& g, FitArgs a) {
  apply_config_fit(g, a);
  kd_snapshots* raw = nullptr;
  check(kd_snapshots_load(a.snapshots.c_str(), &raw), "loading snapshots " + a.snapshots);
  Handle<kd_snapshots> snaps(raw);
  kd_model* model_raw = nullptr;
  char* report = nullptr;
  const kd_rank_kind kind = a.fixed_rank ? KD_RANK_FIXED : KD_RANK_ENERGY;
  check(kd_fit(snaps.get(), kind, a.energy, a.rank, a.no_clamp ? 0 : 1, &model_raw, &report), "fitting");
  Handle<kd_model> model(model_raw);
  const std::string report_text = take_string(report);
  const fs::path dir = output_dir(g.output);
  const fs::path file = dir / "model.kpdm";
  check(kd_model_save(model.get(), file.c_str()), "writing " + file.string());
  write_text(dir / "fit_report.json", report_text + "\n");
  const json r = json::parse(report_text);
  std::cout << "wrote " << file.string() << " (rank " << r["rank"].get<std::size_t>() << ", max |lambda| "
            << r["max_abs_eigenvalue"].get<double>() << ", relative step residual "
            << r["relative_step_residual"].get<double>() << ")\n";
  return 0;
}

struct RolloutArgs {
  std::string model;
  std::string snapshots;
  std::size_t frame = 0;
  std::uint64_t steps = 0;
  bool multistep = false;
  bool sequential = false;
  bool real = false;
  double h_rescale = 0.0;
  double damping = 0.0;
  std::string mesh;
  std::uint64_t stride = 1;
};

int cmd_rollout(const Globals& g, const RolloutArgs& a) {
  const int modes = int(a.multistep) + int(a.sequential) + int(a.real);
  if (modes > 1) throw CliFailure(kExitUsage, "--multistep, --sequential and --real are mutually exclusive");
  if (a.stride == 0) throw CliFailure(kExitUsage, "--stride must be >= 1");
  Handle<kd_model> model = load_model(a.model);
  if (a.h_rescale > 0.0) {
    kd_model* m = nullptr;
    check(kd_model_rescale(model.get(), a.h_rescale, &m), "rescaling");
    model.reset(m);
  } else if (a.h_rescale < 0.0) {
    throw CliFailure(kExitUsage, "--h-rescale must be positive");
  }
  if (a.damping != 0.0) {
    kd_model* m = nullptr;
    check(kd_model_damp(model.get(), a.damping, &m), "damping");
    model.reset(m);
  }
  const std::size_t dim = kd_model_dim(model.get());
  const double h = kd_model_h(model.get());

  std::vector<double> x0(dim, 0.0);
  if (!a.snapshots.empty()) {
    kd_snapshots* raw = nullptr;
    check(kd_snapshots_load(a.snapshots.c_str(), &raw), "loading snapshots " + a.snapshots);
    Handle<kd_snapshots> snaps(raw);
    check(kd_snapshots_frame(snaps.get(), a.frame, x0.data(), dim), "initial frame");
  }
  std::vector<double> masses;
  if (!a.mesh.empty()) {
    Handle<kd_mesh> mesh = load_mesh(a.mesh, false);
    masses.resize(kd_mesh_vertex_count(mesh.get()));
    check(kd_mesh_masses(mesh.get(), masses.data(), masses.size()), "mesh masses");
    if (masses.size() * 6 != dim) throw CliFailure(kExitData, "mesh does not match the model");
  }

  std::vector<std::vector<double>> frames{x0};
  std::vector<std::uint64_t> indices{0};
  std::vector<double> cur = x0;
  for (std::uint64_t t = 1; t <= a.steps; ++t) {
    if (a.sequential) {
      check(kd_step(model.get(), cur.data(), cur.data(), dim), "step " + std::to_string(t));
    }
    if (t % a.stride != 0 && t != a.steps) continue;
    std::vector<double> x(dim);
    if (a.sequential) {
      x = cur;
    } else if (a.real) {
      check(kd_real_multi_step(model.get(), x0.data(), t, x.data(), dim), "real_multi_step");
    } else {
      check(kd_multi_step(model.get(), x0.data(), t, x.data(), dim), "multi_step");
    }
    frames.push_back(std::move(x));
    indices.push_back(t);
  }

  const fs::path dir = output_dir(g.output);
  const fs::path traj = dir / "trajectory.csv";
  std::ofstream tout(traj);
  if (!tout) throw CliFailure(kExitData, "cannot write " + traj.string());
  tout.precision(17);
  std::ofstream kout(dir / "ke.csv");
  if (!kout) throw CliFailure(kExitData, "cannot write ke.csv");
  kout.precision(17);
  kout << "step,time,KE\n";
  tout << "step";
  for (std::size_t i = 0; i < dim; ++i) tout << ",x" << i;
  tout << "\n";
  for (std::size_t f = 0; f < frames.size(); ++f) {
    double ke = 0.0;
    check(kd_kinetic_energy(frames[f].data(), dim, masses.empty() ? nullptr : masses.data(), h, &ke), "kinetic energy");
    kout << indices[f] << "," << static_cast<double>(indices[f]) * h << "," << ke << "\n";
    tout << indices[f];
    for (double v : frames[f]) tout << "," << v;
    tout << "\n";
  }
  std::cout << "wrote " << traj.string() << " and " << (dir / "ke.csv").string() << " (" << frames.size()
            << " frames)\n";
  return 0;
}

struct BenchArgs {
  std::string model;
  std::vector<std::string> counts{"1", "1000", "1000000"};
  std::string mesh;
  bool linear = false;
  std::vector<std::string> modes{"real", "multistep", "refsim"};
  double min_seconds = 0.05;
};

// Best-of-repetitions wall time for run(n), after a warmup at a small count.
template <typename F>
double time_call(F&& run, std::uint64_t n, double min_seconds) {
  using clock = std::chrono::steady_clock;
  run(std::min<std::uint64_t>(n, 1000));
  double best = 1e300;
  double total = 0.0;
  for (int reps = 1;; ++reps) {
    const auto t0 = clock::now();
    run(n);
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    best = std::min(best, dt);
    total += dt;
    if ((reps >= 3 && total >= min_seconds) || total >= 5.0) break;
  }
  return best;
}

int cmd_bench(const Globals& g, const BenchArgs& a) {
  Handle<kd_model> model = load_model(a.model);
  const std::size_t dim = kd_model_dim(model.get());
  const double h = kd_model_h(model.get());
  const std::vector<std::uint64_t> counts = parse_counts(a.counts);
  Handle<kd_mesh> mesh;
  if (!a.mesh.empty()) {
    mesh = load_mesh(a.mesh, a.linear);
    if (kd_mesh_vertex_count(mesh.get()) * 6 != dim) throw CliFailure(kExitData, "mesh does not match the model");
  }
  std::vector<double> x0(dim, 0.0);
  for (std::size_t i = 0; i < dim / 2; ++i) x0[i] = 1e-3 * std::sin(1.0 + static_cast<double>(i));
  std::vector<double> out(dim);

  std::ostringstream csv;
  csv.precision(9);
  csv << "mode,N,seconds\n";
  for (const std::string& mode : a.modes) {
    for (std::uint64_t n : counts) {
      double secs = 0.0;
      if (mode == "real") {
        secs = time_call(
            [&](std::uint64_t k) { check(kd_real_multi_step(model.get(), x0.data(), k, out.data(), dim), "bench"); }, n,
            a.min_seconds);
      } else if (mode == "multistep") {
        secs = time_call(
            [&](std::uint64_t k) { check(kd_multi_step(model.get(), x0.data(), k, out.data(), dim), "bench"); }, n,
            a.min_seconds);
      } else if (mode == "sequential") {
        secs = time_call(
            [&](std::uint64_t k) {
              std::vector<double> cur = x0;
              for (std::uint64_t t = 0; t < k; ++t) check(kd_step(model.get(), cur.data(), cur.data(), dim), "bench");
            },
            n, a.min_seconds);
      } else if (mode == "refsim") {
        if (!mesh) continue;
        secs = time_call(
            [&](std::uint64_t k) { check(kd_refsim_advance(mesh.get(), x0.data(), h, k, out.data(), dim), "bench"); }, n,
            a.min_seconds);
      } else {
        throw CliFailure(kExitUsage, "unknown bench mode '" + mode + "'");
      }
      csv << mode << "," << n << "," << secs << "\n";
    }
  }
  const fs::path dir = output_dir(g.output);
  write_text(dir / "bench.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

struct ControlArgs {
  std::string model;
  std::string mesh;
  std::string problem;
  std::vector<std::string> goals;
  std::uint64_t horizon = 0;
  bool linear = false;
};

// "vertex:x,y,z"
json parse_goal(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw CliFailure(kExitUsage, "goal must look like vertex:x,y,z");
  json t;
  try {
    t["vertex"] = std::stoull(s.substr(0, colon));
    std::vector<double> d;
    std::stringstream ss(s.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) d.push_back(std::stod(tok));
    if (d.size() != 3) throw std::invalid_argument("components");
    t["displacement"] = d;
  } catch (const std::invalid_argument&) {
    throw CliFailure(kExitUsage, "goal must look like vertex:x,y,z");
  }
  return t;
}

int cmd_control(const Globals& g, const ControlArgs& a) {
  json problem = json::object();
  if (!a.problem.empty()) {
    std::ifstream in(a.problem);
    if (!in) throw CliFailure(kExitData, "cannot open problem file " + a.problem);
    try {
      problem = json::parse(in);
    } catch (const json::exception& e) {
      throw CliFailure(kExitData, std::string("problem file: ") + e.what());
    }
  }
  if (!a.goals.empty()) {
    problem["targets"] = json::array();
    for (const std::string& s : a.goals) problem["targets"].push_back(parse_goal(s));
  }
  if (a.horizon > 0) problem["horizon"] = a.horizon;
  if (!problem.contains("targets") || !problem.contains("horizon")) {
    throw CliFailure(kExitUsage, "control needs targets and a horizon (problem file or --goal/--horizon)");
  }
  Handle<kd_model> model = load_model(a.model);
  Handle<kd_mesh> mesh = load_mesh(a.mesh, a.linear);
  char* result = nullptr;
  check(kd_control_run(model.get(), mesh.get(), problem.dump().c_str(), &result), "control");
  const std::string text = take_string(result);
  const json r = json::parse(text);
  const fs::path dir = output_dir(g.output);
  write_text(dir / "control.json", text + "\n");
  std::ostringstream csv;
  csv.precision(12);
  csv << "frame,pmse\n";
  const auto& pm = r["frame_pmse"];
  for (std::size_t i = 0; i < pm.size(); ++i) csv << (i + 1) << "," << pm[i].get<double>() << "\n";
  write_text(dir / "control_frames.csv", csv.str());
  std::cout << "pressures " << r["pressures"].dump() << ", goal error " << r["goal_error"].get<double>()
            << ", max frame pmse " << r["max_frame_pmse"].get<double>() << "\n";
  return 0;
}

struct ServeArgs {
  std::string model;
  std::string mesh;
  std::string host = "127.0.0.1";
  std::uint16_t port = 8765;
};

int cmd_serve(const ServeArgs& a) {
  kd_server* raw = nullptr;
  std::uint16_t bound = 0;
  check(kd_server_start(a.host.c_str(), a.port, a.model.empty() ? nullptr : a.model.c_str(),
                        a.mesh.empty() ? nullptr : a.mesh.c_str(), &raw, &bound),
        "starting server");
  Handle<kd_server> server(raw);
  std::cout << "listening on " << a.host << ":" << bound << std::endl;
  check(kd_server_wait(server.get()), "server");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman reduced-order deformable dynamics toolchain"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration JSON");
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed, overrides the config");
  app.add_option("--output", g.output, "Output directory (default: current directory)");

  auto* gen = app.add_subcommand("gen-data", "Simulate a configured scenario and write snapshots.kpss");

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a model to a snapshot file; writes model.kpdm and fit_report.json");
  fit->add_option("snapshots", fit_args.snapshots, "Snapshot file")->required();
  auto* energy_opt = fit->add_option("--energy", fit_args.energy, "Retained singular-value energy fraction");
  auto* rank_opt = fit->add_option("--rank", fit_args.rank, "Fixed truncation rank");
  rank_opt->excludes(energy_opt);
  fit->add_flag("--no-clamp", fit_args.no_clamp, "Keep eigenvalues outside the unit disk");

  RolloutArgs ro;
  auto* rollout = app.add_subcommand("rollout", "Roll a model forward; writes trajectory.csv and ke.csv");
  rollout->add_option("model", ro.model, "Model file")->required();
  rollout->add_option("--snapshots", ro.snapshots, "Snapshot file holding the initial frame");
  rollout->add_option("--frame", ro.frame, "Initial frame index");
  rollout->add_option("-N,--steps", ro.steps, "Number of steps")->required();
  rollout->add_flag("--multistep", ro.multistep, "Jump from the initial frame with complex eigenvalue powers");
  rollout->add_flag("--sequential", ro.sequential, "Apply single steps repeatedly");
  rollout->add_flag("--real", ro.real, "Jump with the realified operator");
  rollout->add_option("--h-rescale", ro.h_rescale, "Rescale the model to this step size");
  rollout->add_option("--damping", ro.damping, "Eigenvalue damping fraction");
  rollout->add_option("--mesh", ro.mesh, "Mesh supplying vertex masses for kinetic energy");
  rollout->add_option("--stride", ro.stride, "Record every k-th frame");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time stepping modes; writes bench.csv");
  bench->add_option("model", ba.model, "Model file")->required();
  bench->add_option("-N,--steps", ba.counts, "Step counts, comma separated");
  bench->add_option("--mesh", ba.mesh, "Mesh for full-space reference timings");
  bench->add_flag("--linear", ba.linear, "Use linearized springs for the reference simulator");
  bench->add_option("--modes", ba.modes, "Modes: real, multistep, sequential, refsim")->delimiter(',');
  bench->add_option("--min-seconds", ba.min_seconds, "Minimum accumulated time per measurement");

  ControlArgs ca;
  auto* control = app.add_subcommand("control", "Solve chamber pressures for a goal; writes control.json");
  control->add_option("model", ca.model, "Model file")->required();
  control->add_option("--mesh", ca.mesh, "Mesh with chambers")->required();
  control->add_option("--problem", ca.problem, "Problem JSON file");
  control->add_option("--goal", ca.goals, "Goal as vertex:x,y,z (repeatable)");
  control->add_option("--horizon", ca.horizon, "Horizon in steps");
  control->add_flag("--linear", ca.linear, "Use linearized springs for the full-space replay");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Serve interactive sessions over TCP");
  serve->add_option("--model", sa.model, "Default model file for load messages");
  serve->add_option("--mesh", sa.mesh, "Default mesh file for load messages");
  serve->add_option("--host", sa.host, "IPv4 address to bind");
  serve->add_option("--port", sa.port, "TCP port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (gen->parsed()) return cmd_gen_data(g);
    if (fit->parsed()) {
      fit_args.fixed_rank = rank_opt->count() > 0;
      fit_args.policy_given = energy_opt->count() > 0 || fit_args.fixed_rank;
      return cmd_fit(g, fit_args);
    }
    if (rollout->parsed()) return cmd_rollout(g, ro);
    if (bench->parsed()) return cmd_bench(g, ba);
    if (control->parsed()) return cmd_control(g, ca);
    if (serve->parsed()) return cmd_serve(sa);
  } catch (const CliFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
