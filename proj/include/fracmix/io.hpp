#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fracmix/spectral_core.hpp"

namespace fracmix {

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal form ("%.17g"), independent of the global locale.
std::string format_double(double value);

/// FNV-1a, 64 bit.
std::uint64_t fnv1a(const std::string& bytes);
/// Hex digest of the canonical (sorted-key, compact) JSON dump.
std::string config_hash(const nlohmann::json& config);

/// Joins values with commas using format_double.
std::string csv_row(const std::vector<double>& values);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

/// Writes the whole file at once, creating parent directories. Throws Error on I/O failure.
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace fracmix
