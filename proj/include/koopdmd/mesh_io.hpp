// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_MESH_IO_HPP
#define KOOPDMD_MESH_IO_HPP

#include "koopdmd/refsim.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace koopdmd {

/// Actuated region: triangles whose winding gives the outward normal
/// (the direction pressure pushes the wall).
struct Chamber {
  int id = 0;
  std::vector<std::array<std::size_t, 3>> faces;
};

struct Mesh {
  ElasticModel model;
  std::vector<Chamber> chambers;
};

/// Plain-text mesh:
///   v x y z          vertex (in order)
///   s i j k          spring, rest length from the rest positions
///   f i              fixed vertex
///   m value          uniform vertex mass
///   mv i value       per-vertex mass (overrides m)
///   c id i j k       chamber face
/// Blank lines and lines starting with '#' are ignored.
Mesh parse_mesh(std::istream& in);
Mesh load_mesh(const std::filesystem::path& path);

void write_mesh(std::ostream& out, const Mesh& mesh);
void save_mesh(const std::filesystem::path& path, const Mesh& mesh);

}  // namespace koopdmd

#endif
