// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_JSON_IO_HPP
#define CERTROM_JSON_IO_HPP

#include <filesystem>
#include <string>

#include "json.hpp"

#include "certrom/common.hpp"

namespace certrom::io
{

using nlohmann::json;

// Matrices are nested lists of rows; doubles are written in shortest round-trip form so a
// load reproduces every bit.
json MatrixToJson(const Matrix &m);
Matrix MatrixFromJson(const json &j);
json VectorToJson(const Vector &v);
Vector VectorFromJson(const json &j);

json ReadJsonFile(const std::filesystem::path &path);
void WriteJsonFile(const std::filesystem::path &path, const json &j);

}  // namespace certrom::io

#endif  // CERTROM_JSON_IO_HPP
