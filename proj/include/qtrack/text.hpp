// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qtrack {

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a whole field; nullopt-free, throws qtrack::Error.
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep);

/// Drops a trailing carriage return left by CRLF files.
std::string_view chomp(std::string_view line);

}  // namespace qtrack
