// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#pragma once

#include <stdexcept>
#include <string>

namespace qtrack {

/// Raised for every contract violation and malformed input in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qtrack
