#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sgrl {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::vector<std::string> read_lines(const std::string& path);

std::uint64_t fnv1a(const std::string& data);
std::string fnv1a_hex(const std::string& data);
/// Hash of a file's bytes (used for dataset reproducibility checks).
std::string file_hash(const std::string& path);

}  // namespace sgrl
