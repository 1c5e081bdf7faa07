#include "taperom/io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace taperom {

namespace {

constexpr char kMagic[8] = {'R', 'O', 'M', 'M', 'A', 'T', '1', '\0'};

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t n = 0; n < 256; ++n) {
    std::uint32_t c = n;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[n] = c;
  }
  return table;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + k])) << (8 * k);
  return v;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
  static const auto table = make_crc_table();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < len; ++k) c = table[(c ^ p[k]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

std::string fnv1a_hex(const void* data, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < len; ++k) {
    h ^= p[k];
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string hash_file(const std::filesystem::path& path) {
  std::string bytes = read_text(path);
  return fnv1a_hex(bytes.data(), bytes.size());
}

std::string hash_string(const std::string& s) { return fnv1a_hex(s.data(), s.size()); }

void write_matrix(const std::filesystem::path& path, const Mat& m) {
  std::string out;
  out.append(kMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  // column-major little-endian doubles (native on this target)
  out.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size());
  std::uint32_t crc = crc32(out.data(), out.size());
  put_u32(out, crc);
  write_text(path, out);
}

Mat read_matrix(const std::filesystem::path& path) {
  std::string in = read_text(path);
  if (in.size() < 20) throw IoError(IoError::Kind::Truncated, "matrix file too short");
  if (std::memcmp(in.data(), kMagic, 8) != 0)
    throw IoError(IoError::Kind::BadMagic, "bad matrix magic in " + path.string());
  std::uint32_t rows = get_u32(in, 8), cols = get_u32(in, 12);
  std::size_t need = 16 + sizeof(double) * static_cast<std::size_t>(rows) * cols + 4;
  if (in.size() != need)
    throw IoError(IoError::Kind::Truncated,
                  "matrix file truncated: have " + std::to_string(in.size()) +
                      " bytes, expected " + std::to_string(need));
  std::uint32_t stored = get_u32(in, in.size() - 4);
  std::uint32_t computed = crc32(in.data(), in.size() - 4);
  if (stored != computed)
    throw IoError(IoError::Kind::CrcMismatch, "matrix CRC mismatch in " + path.string());
  Mat m(rows, cols);
  std::memcpy(m.data(), in.data() + 16, sizeof(double) * m.size());
  return m;
}

void write_vector(const std::filesystem::path& path, const Vec& v) {
  write_matrix(path, Mat(v));
}

Vec read_vector(const std::filesystem::path& path) {
  Mat m = read_matrix(path);
  if (m.cols() != 1 && m.size() != 0)
    throw IoError(IoError::Kind::Other, "expected a column vector in " + path.string());
  return Vec(Eigen::Map<const Vec>(m.data(), m.size()));
}

void write_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const Vec3& v : mesh.vertices) j["vertices"].push_back({v[0], v[1], v[2]});
  j["triangles"] = nlohmann::json::array();
  for (const auto& t : mesh.triangles) j["triangles"].push_back({t[0], t[1], t[2]});
  if (mesh.spec) {
    nlohmann::json s;
    s["length"] = mesh.spec->length;
    s["width"] = mesh.spec->width;
    s["nx"] = mesh.spec->nx;
    s["nz"] = mesh.spec->nz;
    if (mesh.spec->helix) {
      s["helix"] = {{"radius", mesh.spec->helix->radius},
                    {"pitch", mesh.spec->helix->pitch},
                    {"phase", mesh.spec->helix->phase}};
    }
    j["spec"] = s;
  }
  write_text(path, j.dump(1));
}

Mesh read_mesh(const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_text(path));
  Mesh mesh;
  for (const auto& v : j.at("vertices"))
    mesh.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(),
                               v.at(2).get<double>());
  for (const auto& t : j.at("triangles"))
    mesh.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
  if (j.contains("spec")) {
    TapeSpec s;
    s.length = j["spec"].at("length").get<double>();
    s.width = j["spec"].at("width").get<double>();
    s.nx = j["spec"].at("nx").get<int>();
    s.nz = j["spec"].at("nz").get<int>();
    if (j["spec"].contains("helix")) {
      HelixSpec h;
      h.radius = j["spec"]["helix"].at("radius").get<double>();
      h.pitch = j["spec"]["helix"].at("pitch").get<double>();
      h.phase = j["spec"]["helix"].at("phase").get<double>();
      s.helix = h;
    }
    mesh.spec = s;
  }
  mesh.finalize();
  return mesh;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  nlohmann::json j;
  j["producer"] = m.producer;
  j["config_hash"] = m.config_hash;
  j["inputs"] = m.inputs;
  write_text(path, j.dump(1));
}

Manifest read_manifest(const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_text(path));
  Manifest m;
  m.producer = j.at("producer").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  for (auto it = j.at("inputs").begin(); it != j.at("inputs").end(); ++it)
    m.inputs[it.key()] = it.value().get<std::string>();
  return m;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(IoError::Kind::Other, "cannot open for write: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError(IoError::Kind::Other, "write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(IoError::Kind::Other, "cannot open: " + path.string());
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return s;
}

}  // namespace taperom
