#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gisst/tensor.hpp"

namespace gisst {

/// {"shape": [...], "data": [...]}; doubles are written in shortest round-trip form.
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Hex SHA-256 digest of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace gisst
