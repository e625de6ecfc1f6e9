#pragma once

#include <filesystem>
#include <istream>
#include <string>

#include "bes/graph.hpp"
#include "bes/types.hpp"

namespace bes {

/// Parses "i j" lines (0-based node ids). Blank lines and lines starting with '#' are skipped.
/// A "# nodes N" header fixes the node count; otherwise it is max id + 1.
/// Throws ParseError, SelfLoop.
Graph parse_edge_list(std::istream& in);
Graph read_edge_list(const std::filesystem::path& path);
void write_edge_list(const std::filesystem::path& path, const Graph& g);

/// Comma-separated numbers, one row per line; every row must have the same width.
Matrix read_csv(const std::filesystem::path& path);
/// Shortest round-trip representation per value.
void write_csv(const std::filesystem::path& path, const Matrix& m);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bes
