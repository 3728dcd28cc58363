// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include "qtrack/error.hpp"
#include "qtrack/preprocess.hpp"
#include "qtrack/text.hpp"

namespace qtrack {

namespace {

constexpr int kMaxCellsPerAxis = 2048;
constexpr std::size_t kMinTrainingSegments = 100;

double stddev(const std::vector<std::array<double, 2>>& xs, int d) {
  double mean = 0.0;
  for (const auto& x : xs) mean += x[static_cast<std::size_t>(d)];
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (const auto& x : xs) {
    const double dx = x[static_cast<std::size_t>(d)] - mean;
    var += dx * dx;
  }
  return std::sqrt(var / static_cast<double>(xs.size() > 1 ? xs.size() - 1 : 1));
}

}  // namespace

SegmentFeatures segment_features(const Hit& inner, const Hit& outer) {
  const double dr = outer.r - inner.r;
  const double dz = outer.z - inner.z;
  if (dr == 0.0) throw Error("segment_features: hits share the same radius");
  return {outer.z - dz / dr * outer.r, std::atan2(dr, dz)};
}

KdeModel KdeModel::fit(std::vector<std::array<double, 2>> samples, std::optional<std::array<double, 2>> bandwidth) {
  if (samples.empty()) throw Error("kde: no samples");
  KdeModel model;
  model.samples_ = std::move(samples);
  if (bandwidth) {
    model.bandwidth_ = *bandwidth;
  } else {
    const double factor = std::pow(static_cast<double>(model.samples_.size()), -1.0 / 6.0);
    for (int d = 0; d < 2; ++d) {
      double sigma = stddev(model.samples_, d);
      if (!(sigma > 0.0)) sigma = 1.0;
      model.bandwidth_[static_cast<std::size_t>(d)] = sigma * factor;
    }
  }
  if (!(model.bandwidth_[0] > 0.0 && model.bandwidth_[1] > 0.0)) throw Error("kde: bandwidths must be positive");
  model.norm_ = 1.0 / (static_cast<double>(model.samples_.size()) * 2.0 * std::numbers::pi * model.bandwidth_[0] *
                       model.bandwidth_[1]);
  model.build_index();
  model.locate_mode();
  return model;
}

void KdeModel::build_index() {
  std::array<double, 2> lo{samples_[0][0], samples_[0][1]};
  std::array<double, 2> hi = lo;
  for (const auto& s : samples_) {
    for (std::size_t d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], s[d]);
      hi[d] = std::max(hi[d], s[d]);
    }
  }
  for (std::size_t d = 0; d < 2; ++d) {
    cell_width_[d] = bandwidth_[d];
    const double span = hi[d] - lo[d];
    if (span / cell_width_[d] > kMaxCellsPerAxis - 1) cell_width_[d] = span / (kMaxCellsPerAxis - 1);
    origin_[d] = lo[d];
    cells_[d] = static_cast<int>(std::floor(span / cell_width_[d])) + 1;
  }

  const auto cell_of = [&](const std::array<double, 2>& s) {
    const int i = std::clamp(static_cast<int>(std::floor((s[0] - origin_[0]) / cell_width_[0])), 0, cells_[0] - 1);
    const int j = std::clamp(static_cast<int>(std::floor((s[1] - origin_[1]) / cell_width_[1])), 0, cells_[1] - 1);
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(cells_[1]) + static_cast<std::size_t>(j);
  };

  const std::size_t n_cells = static_cast<std::size_t>(cells_[0]) * static_cast<std::size_t>(cells_[1]);
  cell_start_.assign(n_cells + 1, 0);
  for (const auto& s : samples_) ++cell_start_[cell_of(s) + 1];
  for (std::size_t c = 0; c < n_cells; ++c) cell_start_[c + 1] += cell_start_[c];
  sorted_.assign(samples_.size(), {});
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (const auto& s : samples_) sorted_[fill[cell_of(s)]++] = s;
}

double KdeModel::density(double z_intercept, double rz_angle) const {
  if (samples_.empty()) return 0.0;
  const std::array<double, 2> q{z_intercept, rz_angle};
  std::array<int, 2> first{};
  std::array<int, 2> last{};
  for (std::size_t d = 0; d < 2; ++d) {
    const double reach = kCutoff * bandwidth_[d];
    const double lo = std::floor((q[d] - reach - origin_[d]) / cell_width_[d]);
    const double hi = std::floor((q[d] + reach - origin_[d]) / cell_width_[d]);
    if (hi < 0.0 || lo > cells_[d] - 1) return 0.0;
    first[d] = static_cast<int>(std::max(lo, 0.0));
    last[d] = static_cast<int>(std::min(hi, static_cast<double>(cells_[d] - 1)));
  }

  const double inv0 = 1.0 / bandwidth_[0];
  const double inv1 = 1.0 / bandwidth_[1];
  constexpr double cutoff_sq = kCutoff * kCutoff;
  double sum = 0.0;
  for (int i = first[0]; i <= last[0]; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * static_cast<std::size_t>(cells_[1]);
    const std::uint32_t begin = cell_start_[row + static_cast<std::size_t>(first[1])];
    const std::uint32_t end = cell_start_[row + static_cast<std::size_t>(last[1]) + 1];
    for (std::uint32_t k = begin; k < end; ++k) {
      const double u = (q[0] - sorted_[k][0]) * inv0;
      const double v = (q[1] - sorted_[k][1]) * inv1;
      const double d2 = u * u + v * v;
      if (d2 < cutoff_sq) sum += std::exp(-0.5 * d2);
    }
  }
  return sum * norm_;
}

void KdeModel::locate_mode() {
  // Seed from the densest of an evenly strided set of samples.
  const std::size_t stride = std::max<std::size_t>(1, samples_.size() / 500);
  std::array<double, 2> x = samples_[0];
  double best = -1.0;
  for (std::size_t i = 0; i < samples_.size(); i += stride) {
    const double d = density(samples_[i][0], samples_[i][1]);
    if (d > best) {
      best = d;
      x = samples_[i];
    }
  }

  // Gaussian mean shift ascends the density monotonically.
  for (int iter = 0; iter < 500; ++iter) {
    double wsum = 0.0;
    std::array<double, 2> acc{0.0, 0.0};
    for (const auto& s : samples_) {
      const double u = (x[0] - s[0]) / bandwidth_[0];
      const double v = (x[1] - s[1]) / bandwidth_[1];
      const double d2 = u * u + v * v;
      if (d2 >= kCutoff * kCutoff) continue;
      const double w = std::exp(-0.5 * d2);
      wsum += w;
      acc[0] += w * s[0];
      acc[1] += w * s[1];
    }
    if (wsum <= 0.0) break;
    const std::array<double, 2> next{acc[0] / wsum, acc[1] / wsum};
    const double shift = std::hypot((next[0] - x[0]) / bandwidth_[0], (next[1] - x[1]) / bandwidth_[1]);
    x = next;
    if (shift < 1e-10) break;
  }
  const double at_mode = density(x[0], x[1]);
  if (at_mode >= best) {
    mode_ = x;
    peak_ = at_mode;
  } else {
    peak_ = best;
  }
}

void KdeModel::save(std::ostream& out) const {
  out << "qtrack-kde " << kFormatVersion << '\n';
  out << "bandwidth " << format_double(bandwidth_[0]) << ' ' << format_double(bandwidth_[1]) << '\n';
  out << "samples " << samples_.size() << '\n';
  for (const auto& s : samples_) out << format_double(s[0]) << ' ' << format_double(s[1]) << '\n';
}

KdeModel KdeModel::load(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "qtrack-kde") throw Error("kde: not a qtrack-kde file");
  if (version != kFormatVersion) throw Error("kde: unsupported format version " + std::to_string(version));
  std::string word;
  std::string h0;
  std::string h1;
  if (!(in >> word >> h0 >> h1) || word != "bandwidth") throw Error("kde: missing bandwidth line");
  std::size_t n = 0;
  if (!(in >> word >> n) || word != "samples") throw Error("kde: missing samples line");
  std::vector<std::array<double, 2>> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string a;
    std::string b;
    if (!(in >> a >> b)) throw Error("kde: truncated sample list at entry " + std::to_string(i));
    samples[i] = {parse_double(a), parse_double(b)};
  }
  return fit(std::move(samples), std::array<double, 2>{parse_double(h0), parse_double(h1)});
}

KdeModel train_kde(std::span<const Event> events, const KdeOptions& options) {
  std::vector<std::array<double, 2>> samples;
  for (const Event& event : events) {
    if (!event.has_truth()) throw Error("train_kde: event without truth particles");
    for (const auto& [a, b] : event.true_edges()) {
      const Hit& inner = event.hit(a);
      const Hit& outer = event.hit(b);
      if (!(inner.r < outer.r)) continue;
      const SegmentFeatures f = segment_features(inner, outer);
      samples.push_back({f.z_intercept, f.rz_angle});
    }
  }
  if (samples.size() < kMinTrainingSegments) {
    throw Error("train_kde: need at least " + std::to_string(kMinTrainingSegments) + " true segments, found " +
                std::to_string(samples.size()));
  }
  if (options.max_samples > 0 && samples.size() > options.max_samples) {
    std::vector<std::array<double, 2>> strided;
    strided.reserve(options.max_samples);
    for (std::size_t i = 0; i < options.max_samples; ++i) {
      strided.push_back(samples[i * samples.size() / options.max_samples]);
    }
    samples = std::move(strided);
  }
  return KdeModel::fit(std::move(samples), options.bandwidth);
}

double edge_prior(const KdeModel& model, const Hit& a, const Hit& b) {
  if (!(a.r < b.r)) throw Error("edge_prior: inner hit must have smaller radius");
  if (!(model.peak_density() > 0.0)) return 0.0;
  return std::min(1.0, model.density(segment_features(a, b)) / model.peak_density());
}

}  // namespace qtrack
