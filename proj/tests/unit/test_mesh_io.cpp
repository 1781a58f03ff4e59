// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/error.hpp"
#include "koopdmd/mesh_io.hpp"
#include "koopdmd/scenarios.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace koopdmd;

namespace {

ErrorCode parse_error(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_mesh(in);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return ErrorCode::Usage;
}

}  // namespace

TEST(MeshIo, ParsesEveryRecordKind) {
  std::istringstream in(R"(# two-vertex bar
v 0 0 0
v 2 0 0

s 0 1 5.5
f 0
m 0.25
mv 1 3
c 7 0 1 0
)");
  const Mesh mesh = parse_mesh(in);
  ASSERT_EQ(mesh.model.n_vertices(), 2u);
  ASSERT_EQ(mesh.model.springs.size(), 1u);
  EXPECT_DOUBLE_EQ(mesh.model.springs[0].rest_length, 2.0);
  EXPECT_DOUBLE_EQ(mesh.model.springs[0].stiffness, 5.5);
  EXPECT_EQ(mesh.model.fixed_vertices, std::vector<std::size_t>{0});
  EXPECT_DOUBLE_EQ(mesh.model.vertex_masses[0], 0.25);
  EXPECT_DOUBLE_EQ(mesh.model.vertex_masses[1], 3.0);
  ASSERT_EQ(mesh.chambers.size(), 1u);
  EXPECT_EQ(mesh.chambers[0].id, 7);
}

TEST(MeshIo, WriteThenParseReproducesTheMesh) {
  for (const Mesh& original : {make_chain(), make_strip(), make_control_slab(), make_oscillator(3.0, 0.5)}) {
    std::ostringstream out;
    write_mesh(out, original);
    std::istringstream in(out.str());
    const Mesh back = parse_mesh(in);
    EXPECT_EQ(back.model.rest_positions, original.model.rest_positions);
    EXPECT_EQ(back.model.vertex_masses, original.model.vertex_masses);
    EXPECT_EQ(back.model.fixed_vertices, original.model.fixed_vertices);
    ASSERT_EQ(back.model.springs.size(), original.model.springs.size());
    for (std::size_t s = 0; s < back.model.springs.size(); ++s) {
      EXPECT_EQ(back.model.springs[s].i, original.model.springs[s].i);
      EXPECT_EQ(back.model.springs[s].rest_length, original.model.springs[s].rest_length);
    }
    ASSERT_EQ(back.chambers.size(), original.chambers.size());
    for (std::size_t c = 0; c < back.chambers.size(); ++c) EXPECT_EQ(back.chambers[c].faces, original.chambers[c].faces);

    std::ostringstream again;
    write_mesh(again, back);
    EXPECT_EQ(again.str(), out.str());
  }
}

TEST(MeshIo, MalformedInputIsAFormatError) {
  EXPECT_EQ(parse_error("v 0 0\n"), ErrorCode::Format);
  EXPECT_EQ(parse_error("q 1 2 3\n"), ErrorCode::Format);
  EXPECT_EQ(parse_error("v 0 0 0\nv 1 0 0\ns 0 5 1\n"), ErrorCode::Format);
  EXPECT_EQ(parse_error("v 0 0 0\nmv 3 1\n"), ErrorCode::Format);
  EXPECT_EQ(parse_error("v 0 0 0\nv 1 0 0\nc 0 0 1 9\n"), ErrorCode::Format);
}

TEST(MeshIo, InvalidPhysicsIsADomainError) {
  EXPECT_EQ(parse_error("v 0 0 0\nv 1 0 0\ns 0 1 1\nm -1\n"), ErrorCode::Domain);
  EXPECT_EQ(parse_error("v 0 0 0\nv 1 0 0\ns 0 1 1\nf 4\n"), ErrorCode::Domain);
}

TEST(MeshIo, MissingFileIsAnIoError) {
  try {
    load_mesh("/nonexistent/dir/none.mesh");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(MeshIo, SaveAndLoadThroughAFile) {
  ktest::TempDir dir("mesh");
  const Mesh m = make_control_slab();
  save_mesh(dir / "slab.mesh", m);
  const Mesh back = load_mesh(dir / "slab.mesh");
  EXPECT_EQ(back.model.rest_positions, m.model.rest_positions);
  EXPECT_EQ(back.chambers.size(), 3u);
}
