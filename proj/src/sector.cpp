// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <cmath>
#include <numbers>

#include "qtrack/error.hpp"
#include "qtrack/preprocess.hpp"

namespace qtrack {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kStride = 2.0 * kPi / kSectorCount;

}  // namespace

bool Sector::contains(double phi) const {
  double offset = std::fmod(phi - phi_min, 2.0 * kPi);
  if (offset < 0.0) offset += 2.0 * kPi;
  return offset < phi_max - phi_min;
}

std::array<int, 2> sectors_of(double phi) {
  // Sector k covers [-pi + k*stride, -pi + (k+2)*stride).
  const auto base = static_cast<int>(std::floor((phi + kPi) / kStride));
  const int upper = ((base % kSectorCount) + kSectorCount) % kSectorCount;
  const int lower = (upper + kSectorCount - 1) % kSectorCount;
  return {lower, upper};
}

std::vector<Sector> sectorize(const Event& event) {
  if (event.empty()) throw Error("sectorize: event has no hits");
  std::vector<Sector> sectors(kSectorCount);
  for (int k = 0; k < kSectorCount; ++k) {
    sectors[static_cast<std::size_t>(k)].index = k;
    sectors[static_cast<std::size_t>(k)].phi_min = -kPi + k * kStride;
    sectors[static_cast<std::size_t>(k)].phi_max = -kPi + (k + 2) * kStride;
  }
  for (const Hit& h : event.hits()) {
    for (int k : sectors_of(h.phi)) sectors[static_cast<std::size_t>(k)].hit_ids.push_back(h.id);
  }
  return sectors;
}

}  // namespace qtrack
