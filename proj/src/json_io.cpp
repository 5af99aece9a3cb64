// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/json_io.hpp"

#include <fstream>

namespace certrom::io
{

json MatrixToJson(const Matrix &m)
{
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); i++)
  {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); j++)
    {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix MatrixFromJson(const json &j)
{
  if (!j.is_array())
  {
    throw LoadError("expected a nested list for a matrix");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; i++)
  {
    const auto &row = j[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
    {
      throw LoadError("ragged matrix row " + std::to_string(i));
    }
    for (Eigen::Index c = 0; c < cols; c++)
    {
      m(i, c) = row[c].get<double>();
    }
  }
  return m;
}

json VectorToJson(const Vector &v)
{
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); i++)
  {
    arr.push_back(v(i));
  }
  return arr;
}

Vector VectorFromJson(const json &j)
{
  if (!j.is_array())
  {
    throw LoadError("expected a list for a vector");
  }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); i++)
  {
    v(i) = j[i].get<double>();
  }
  return v;
}

json ReadJsonFile(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw LoadError("cannot open " + path.string());
  }
  try
  {
    return json::parse(in);
  }
  catch (const json::parse_error &e)
  {
    throw LoadError("corrupt JSON in " + path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const std::filesystem::path &path, const json &j)
{
  std::ofstream out(path);
  if (!out)
  {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << j.dump();
  out << '\n';
}

}  // namespace certrom::io
