#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "srcloc/geometry.hpp"

namespace srcloc::kv {

// Flat `key = value` text. Blank lines and lines starting with '#' are
// ignored; keys and values are trimmed. Order is preserved.
using Entries = std::vector<std::pair<std::string, std::string>>;

Entries parse(const std::string& text, const std::string& origin);
Entries read_file(const std::filesystem::path& path);
void write_file(const Entries& entries, const std::filesystem::path& path, const std::string& comment = {});

std::string trim(std::string s);

/// Point lists are written as "x y; x y; ...".
std::string format_points(const std::vector<Point>& points);
std::vector<Point> parse_points(const std::string& text, const std::string& field);

} // namespace srcloc::kv
