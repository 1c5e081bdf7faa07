#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "taperom/mesh.hpp"

namespace taperom {

// Binary dense-matrix container: magic "ROMMAT1\0", u32 rows, u32 cols
// (little-endian), f64 column-major payload, trailing CRC32 of all
// preceding bytes.
void write_matrix(const std::filesystem::path& path, const Mat& m);
Mat read_matrix(const std::filesystem::path& path);

void write_vector(const std::filesystem::path& path, const Vec& v);
Vec read_vector(const std::filesystem::path& path);

class IoError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, CrcMismatch, Truncated, Other };
  IoError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

// 64-bit FNV-1a content hash, hex-encoded; used for manifest input hashes.
std::string fnv1a_hex(const void* data, std::size_t len);
std::string hash_file(const std::filesystem::path& path);
std::string hash_string(const std::string& s);

// Mesh file: structured text (JSON) with vertices, triangles and an optional
// spec echo; numeric round-trip is bit-exact.
void write_mesh(const std::filesystem::path& path, const Mesh& mesh);
Mesh read_mesh(const std::filesystem::path& path);

// Manifest: producer command, config hash, input-file hashes. Contains no
// timestamps so reruns with identical inputs produce identical bytes.
struct Manifest {
  std::string producer;
  std::string config_hash;
  std::map<std::string, std::string> inputs;  // label -> content hash
};
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace taperom
