// SPDX-License-Identifier: Apache-2.0

// Writes the bundled scenario meshes and run configurations.

#include "koopdmd/mesh_io.hpp"
#include "koopdmd/scenarios.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

void write(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("data");
  try {
    fs::create_directories(dir);
    koopdmd::save_mesh(dir / "chain.mesh", koopdmd::make_chain());
    koopdmd::save_mesh(dir / "strip.mesh", koopdmd::make_strip());
    koopdmd::save_mesh(dir / "slab.mesh", koopdmd::make_control_slab());
    koopdmd::save_mesh(dir / "oscillator.mesh", koopdmd::make_oscillator());

    const koopdmd::StripOptions strip;
    const std::size_t tip = koopdmd::strip_vertex(strip, strip.nx - 1, strip.ny - 1);
    write(dir / "strip_impulse.json", R"({
  "mesh": "strip.mesh",
  "h": 0.004,
  "steps": 500,
  "forcing": {"type": "impulse", "impulses": [{"vertex": )" + std::to_string(tip) + R"(, "step": 0, "velocity": [0, 0.3, 0]}]},
  "fit": {"rank": "energy", "energy": 0.9999, "clamp": true},
  "seed": 1
}
)");
    write(dir / "strip_gravity.json", R"({
  "mesh": "strip.mesh",
  "h": 0.004,
  "steps": 500,
  "forcing": {"type": "gravity", "g": [0, -9.81, 0]},
  "seed": 1
}
)");
    write(dir / "chain_linear.json", R"({
  "mesh": "chain.mesh",
  "h": 0.1,
  "steps": 199,
  "linear_springs": true,
  "forcing": {"type": "impulse", "impulses": [{"vertex": 9, "step": 0, "velocity": [0.3, 0.5, -0.2]},
                                              {"vertex": 5, "step": 0, "velocity": [-0.1, 0.2, 0.4]}]},
  "fit": {"rank": "energy", "energy": 1.0, "clamp": false},
  "seed": 1
}
)");
    write(dir / "slab_pressure.json", R"({
  "mesh": "slab.mesh",
  "h": 0.05,
  "steps": 2400,
  "forcing": {"type": "pressure", "hold": 60, "max": 300.0},
  "fit": {"rank": "energy", "energy": 0.99999999, "clamp": true},
  "seed": 3
}
)");
    write(dir / "oscillator.json", R"({
  "mesh": "oscillator.mesh",
  "h": 0.1,
  "steps": 100,
  "linear_springs": true,
  "forcing": {"type": "impulse", "impulses": [{"vertex": 1, "step": 0, "velocity": [1, 0, 0]}]},
  "seed": 1
}
)");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote scenarios to " << dir.string() << "\n";
  return 0;
}
