// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/mesh_io.hpp"

#include "koopdmd/error.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace koopdmd {

namespace {

[[noreturn]] void bad_line(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::Format, "mesh line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

Mesh parse_mesh(std::istream& in) {
  std::vector<Eigen::Vector3d> verts;
  struct RawSpring {
    std::size_t i, j;
    double k;
  };
  std::vector<RawSpring> raw_springs;
  std::vector<std::size_t> fixed;
  std::map<std::size_t, double> per_vertex_mass;
  double uniform_mass = 1.0;
  std::map<int, Chamber> chambers;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p[0] >> p[1] >> p[2])) bad_line(line_no, "expected 'v x y z'");
      verts.push_back(p);
    } else if (tag == "s") {
      RawSpring s{};
      if (!(ls >> s.i >> s.j >> s.k)) bad_line(line_no, "expected 's i j stiffness'");
      raw_springs.push_back(s);
    } else if (tag == "f") {
      std::size_t i = 0;
      if (!(ls >> i)) bad_line(line_no, "expected 'f i'");
      fixed.push_back(i);
    } else if (tag == "m") {
      if (!(ls >> uniform_mass)) bad_line(line_no, "expected 'm value'");
    } else if (tag == "mv") {
      std::size_t i = 0;
      double m = 0.0;
      if (!(ls >> i >> m)) bad_line(line_no, "expected 'mv i value'");
      per_vertex_mass[i] = m;
    } else if (tag == "c") {
      int id = 0;
      std::array<std::size_t, 3> f{};
      if (!(ls >> id >> f[0] >> f[1] >> f[2])) bad_line(line_no, "expected 'c id i j k'");
      Chamber& c = chambers[id];
      c.id = id;
      c.faces.push_back(f);
    } else {
      bad_line(line_no, "unknown record '" + tag + "'");
    }
  }

  Mesh mesh;
  ElasticModel& model = mesh.model;
  const auto n = static_cast<Eigen::Index>(verts.size());
  model.rest_positions.resize(n, 3);
  for (Eigen::Index v = 0; v < n; ++v) model.rest_positions.row(v) = verts[v].transpose();
  model.vertex_masses = Eigen::VectorXd::Constant(n, uniform_mass);
  for (const auto& [i, m] : per_vertex_mass) {
    if (static_cast<Eigen::Index>(i) >= n) throw Error(ErrorCode::Format, "mass for out-of-range vertex");
    model.vertex_masses[static_cast<Eigen::Index>(i)] = m;
  }
  for (const RawSpring& s : raw_springs) {
    if (static_cast<Eigen::Index>(s.i) >= n || static_cast<Eigen::Index>(s.j) >= n) {
      throw Error(ErrorCode::Format, "spring references an out-of-range vertex");
    }
    model.add_spring(s.i, s.j, s.k);
  }
  model.fixed_vertices = fixed;
  model.validate();

  for (auto& [id, c] : chambers) {
    for (const auto& f : c.faces) {
      for (std::size_t v : f) {
        if (static_cast<Eigen::Index>(v) >= n) throw Error(ErrorCode::Format, "chamber face references an out-of-range vertex");
      }
    }
    mesh.chambers.push_back(std::move(c));
  }
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open mesh file " + path.string());
  return parse_mesh(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  const ElasticModel& model = mesh.model;
  out << std::setprecision(17);
  for (Eigen::Index v = 0; v < model.rest_positions.rows(); ++v) {
    out << "v " << model.rest_positions(v, 0) << ' ' << model.rest_positions(v, 1) << ' '
        << model.rest_positions(v, 2) << '\n';
  }
  for (const Spring& s : model.springs) out << "s " << s.i << ' ' << s.j << ' ' << s.stiffness << '\n';
  for (std::size_t f : model.fixed_vertices) out << "f " << f << '\n';
  const Eigen::VectorXd& m = model.vertex_masses;
  const bool uniform = m.size() > 0 && (m.array() == m[0]).all();
  if (uniform) {
    out << "m " << m[0] << '\n';
  } else {
    for (Eigen::Index v = 0; v < m.size(); ++v) out << "mv " << v << ' ' << m[v] << '\n';
  }
  for (const Chamber& c : mesh.chambers) {
    for (const auto& f : c.faces) out << "c " << c.id << ' ' << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
}

void save_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write mesh file " + path.string());
  write_mesh(out, mesh);
}

}  // namespace koopdmd
