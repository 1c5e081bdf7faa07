#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "taperom/config.hpp"
#include "taperom/io.hpp"

using namespace taperom;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("taperom_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("matrix container round-trips byte-exactly") {
  TempDir tmp;
  SUBCASE("empty matrix") {
    fs::path f = tmp.path / "empty.rommat";
    write_matrix(f, Mat(0, 0));
    Mat m = read_matrix(f);
    CHECK(m.rows() == 0);
    CHECK(m.cols() == 0);
  }
  SUBCASE("known values") {
    fs::path f = tmp.path / "m.rommat";
    Mat m(3, 2);
    m << 1.0, -2.5, 3.25e-300, 4.0, 5e300, -0.0;
    write_matrix(f, m);
    Mat r = read_matrix(f);
    REQUIRE(r.rows() == 3);
    REQUIRE(r.cols() == 2);
    CHECK(std::memcmp(m.data(), r.data(), sizeof(double) * 6) == 0);

    // writing again produces identical bytes
    fs::path f2 = tmp.path / "m2.rommat";
    write_matrix(f2, m);
    CHECK(read_text(f) == read_text(f2));
  }
}

TEST_CASE("corruption is reported with a distinct error kind") {
  TempDir tmp;
  fs::path f = tmp.path / "m.rommat";
  Mat m(4, 3);
  std::mt19937 rng(1);
  std::normal_distribution<double> nd;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 4; ++r) m(r, c) = nd(rng);
  write_matrix(f, m);

  SUBCASE("flipped payload byte fails the checksum") {
    std::string bytes = read_text(f);
    bytes[20] = static_cast<char>(bytes[20] ^ 0x40);
    write_text(f, bytes);
    try {
      read_matrix(f);
      FAIL("expected CRC failure");
    } catch (const IoError& e) {
      CHECK(e.kind == IoError::Kind::CrcMismatch);
    }
  }
  SUBCASE("truncation") {
    std::string bytes = read_text(f);
    write_text(f, bytes.substr(0, bytes.size() - 7));
    try {
      read_matrix(f);
      FAIL("expected truncation failure");
    } catch (const IoError& e) {
      CHECK(e.kind == IoError::Kind::Truncated);
    }
  }
  SUBCASE("bad magic") {
    std::string bytes = read_text(f);
    bytes[0] = 'X';
    write_text(f, bytes);
    try {
      read_matrix(f);
      FAIL("expected magic failure");
    } catch (const IoError& e) {
      CHECK(e.kind == IoError::Kind::BadMagic);
    }
  }
}

TEST_CASE("mesh file round-trips bit-exactly") {
  TempDir tmp;
  TapeSpec s;
  s.length = 0.0213;
  s.width = 0.00471;
  s.nx = 3;
  s.nz = 5;
  s.helix = HelixSpec{0.021, 0.0031, 0.7853981633974483};
  Mesh m = generate_tape_mesh(s);
  fs::path f = tmp.path / "mesh.json";
  write_mesh(f, m);
  Mesh r = read_mesh(f);
  REQUIRE(r.vertices.size() == m.vertices.size());
  for (size_t k = 0; k < m.vertices.size(); ++k)
    CHECK((r.vertices[k] - m.vertices[k]).norm() == 0.0);
  REQUIRE(r.triangles == m.triangles);
  REQUIRE(r.spec.has_value());
  CHECK(r.spec->helix->phase == s.helix->phase);
  CHECK(r.n_e() == m.n_e());

  // second write is byte-identical
  fs::path f2 = tmp.path / "mesh2.json";
  write_mesh(f2, r);
  CHECK(read_text(f) == read_text(f2));
}

TEST_CASE("manifest round-trip") {
  TempDir tmp;
  Manifest m;
  m.producer = "taperom fom run";
  m.config_hash = "deadbeef";
  m.inputs["mesh.json"] = "0123456789abcdef";
  fs::path f = tmp.path / "manifest.json";
  write_manifest(f, m);
  Manifest r = read_manifest(f);
  CHECK(r.producer == m.producer);
  CHECK(r.config_hash == m.config_hash);
  CHECK(r.inputs == m.inputs);
}

TEST_CASE("crc32 reference vector") {
  const char* s = "123456789";
  CHECK(crc32(s, 9) == 0xCBF43926u);  // IEEE 802.3 check value
}

TEST_CASE("minimal config file is filled with defaults") {
  RunConfig cfg = parse_config_text("{}");
  CHECK(cfg.mesh.nx == 4);
  CHECK(cfg.mesh.nz == 20);
  CHECK(cfg.training.size() == 5);
  CHECK(cfg.within.size() == 1);
  CHECK(cfg.ood.size() == 2);
  CHECK(cfg.freq.size() == 3);
  CHECK(cfg.material.K_c == doctest::Approx(23600.0));
  CHECK(cfg.training[0].excitation.B0 == doctest::Approx(0.013));
}

TEST_CASE("invalid fields are all reported with their paths") {
  std::string text = R"({
    "solver": {"dt": -1.0, "newton_max_iter": 0},
    "material": {"n_exp": 0.2}
  })";
  try {
    parse_config_text(text);
    FAIL("expected ConfigParseError");
  } catch (const ConfigParseError& e) {
    bool has_dt = false, has_iter = false, has_n = false;
    for (const std::string& msg : e.errors) {
      has_dt |= msg.find("solver.dt") != std::string::npos;
      has_iter |= msg.find("solver.newton_max_iter") != std::string::npos;
      has_n |= msg.find("material.n_exp") != std::string::npos;
    }
    CHECK(has_dt);
    CHECK(has_iter);
    CHECK(has_n);
    CHECK(e.errors.size() >= 3);
  }
}

TEST_CASE("config serialization round-trips") {
  RunConfig cfg = default_config();
  cfg.seed = 7;
  cfg.mesh.helix = HelixSpec{0.03, 0.001, 0.25};
  cfg.pod_i.rank = 9;
  cfg.node.hidden = {32, 32};
  std::string a = serialize_config(cfg);
  RunConfig parsed = parse_config_text(a);
  std::string b = serialize_config(parsed);
  CHECK(a == b);
}

TEST_CASE("missing config file lists a clear error") {
  CHECK_THROWS_AS(parse_config("/nonexistent/config.json"), ConfigParseError);
}

TEST_CASE("hashes are stable and content sensitive") {
  std::string a = "hello";
  std::string b = "hellp";
  CHECK(hash_string(a) == hash_string(a));
  CHECK(hash_string(a) != hash_string(b));
  CHECK(hash_string(a).size() == 16);
}
