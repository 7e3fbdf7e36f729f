#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "plasmo/types.hpp"

namespace plasmo::io {

// FNV-1a 64-bit, used for content-hash keys in manifests
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// row-major numeric CSV without header (absorption-map format, %.9e)
void write_grid_csv(std::ostream& out, const GridXd& grid);
GridXd read_grid_csv(std::istream& in);
void write_grid_csv_file(const std::filesystem::path& path, const GridXd& grid);
GridXd read_grid_csv_file(const std::filesystem::path& path);

std::string format_full(double v);  // %.9e
std::string format_g(double v);     // %.6g for plots

}  // namespace plasmo::io
