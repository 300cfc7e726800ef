// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

namespace semlink::io {

/// Raw little-endian float64 array file.
void write_f64(const std::string& path, std::span<const double> values);
std::vector<double> read_f64(const std::string& path, std::size_t expected_count);

/// Whole-file text helpers with path-qualified IoError on failure.
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace semlink::io
