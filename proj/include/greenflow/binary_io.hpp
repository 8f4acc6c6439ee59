#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace greenflow {

/// Raw little-endian IEEE-754 doubles, independent of host byte order.
void write_f64_le(std::ostream& out, std::span<const double> values);
std::vector<double> read_f64_le(std::istream& in, std::size_t count);

std::vector<double> read_f64_file(const std::filesystem::path& path);
void write_f64_file(const std::filesystem::path& path, std::span<const double> values);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
std::string file_hash(const std::filesystem::path& path);

}  // namespace greenflow
