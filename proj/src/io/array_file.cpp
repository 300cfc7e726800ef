// SPDX-License-Identifier: Apache-2.0
#include "semlink/io/array_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semlink/error.hpp"

namespace semlink::io {

static_assert(std::endian::native == std::endian::little, "array files assume a little-endian host");

void write_f64(const std::string& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<double> read_f64(const std::string& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open '" + path + "'");
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(double)) {
    throw IoError("'" + path + "' holds " + std::to_string(bytes) + " bytes, expected " +
                  std::to_string(expected_count * sizeof(double)));
  }
  std::vector<double> v(expected_count);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read from '" + path + "'");
  return v;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("short write to '" + path + "'");
}

}  // namespace semlink::io
