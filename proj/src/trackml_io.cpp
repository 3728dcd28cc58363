// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <fstream>
#include <string>
#include <unordered_map>

#include "qtrack/error.hpp"
#include "qtrack/event.hpp"
#include "qtrack/text.hpp"

namespace qtrack {

namespace {

constexpr std::string_view kHitsHeader = "hit_id,x,y,z,volume_id,layer_id,module_id";
constexpr std::string_view kTruthHeader = "hit_id,particle_id,tx,ty,tz,tpx,tpy,tpz,weight";

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw Error(path.string() + ":" + std::to_string(line) + ": " + what);
}

void expect_header(std::istream& in, const std::filesystem::path& path, std::string_view header) {
  std::string line;
  if (!std::getline(in, line)) fail_at(path, 1, "missing header");
  if (chomp(line) != header) fail_at(path, 1, "expected header '" + std::string(header) + "'");
}

template <typename Fn>
auto parse_field(const std::filesystem::path& path, std::size_t line, std::string_view name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    fail_at(path, line, std::string(name) + ": " + e.what());
  }
}

}  // namespace

Event read_trackml(const std::filesystem::path& hits_file, const std::filesystem::path& truth_file) {
  std::vector<Hit> hits;
  std::unordered_map<HitId, std::size_t> line_of;  // hit id -> hits-file line
  std::unordered_map<HitId, std::size_t> slot_of;

  {
    auto in = open_input(hits_file);
    expect_header(in, hits_file, kHitsHeader);
    std::string raw;
    std::size_t line_no = 1;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string_view line = chomp(raw);
      if (line.empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != 7) fail_at(hits_file, line_no, "expected 7 fields, found " + std::to_string(f.size()));
      const HitId id = parse_field(hits_file, line_no, "hit_id", [&] { return parse_int(f[0]); });
      const double x = parse_field(hits_file, line_no, "x", [&] { return parse_double(f[1]); });
      const double y = parse_field(hits_file, line_no, "y", [&] { return parse_double(f[2]); });
      const double z = parse_field(hits_file, line_no, "z", [&] { return parse_double(f[3]); });
      Hit h = Hit::at(id, x, y, z);
      h.volume_id = static_cast<int>(parse_field(hits_file, line_no, "volume_id", [&] { return parse_int(f[4]); }));
      h.layer_id = static_cast<int>(parse_field(hits_file, line_no, "layer_id", [&] { return parse_int(f[5]); }));
      h.module_id = static_cast<int>(parse_field(hits_file, line_no, "module_id", [&] { return parse_int(f[6]); }));

      auto [it, inserted] = line_of.emplace(id, line_no);
      if (!inserted) {
        throw Error(hits_file.string() + ": duplicate hit_id " + std::to_string(id) + " on lines " +
                    std::to_string(it->second) + " and " + std::to_string(line_no));
      }
      slot_of.emplace(id, hits.size());
      hits.push_back(h);
    }
  }

  std::vector<bool> has_truth(hits.size(), false);
  {
    auto in = open_input(truth_file);
    expect_header(in, truth_file, kTruthHeader);
    std::string raw;
    std::size_t line_no = 1;
    std::unordered_map<HitId, std::size_t> truth_line;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string_view line = chomp(raw);
      if (line.empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != 9) fail_at(truth_file, line_no, "expected 9 fields, found " + std::to_string(f.size()));
      const HitId id = parse_field(truth_file, line_no, "hit_id", [&] { return parse_int(f[0]); });
      auto slot = slot_of.find(id);
      if (slot == slot_of.end()) fail_at(truth_file, line_no, "hit_id " + std::to_string(id) + " is not in the hits file");
      auto [prev, inserted] = truth_line.emplace(id, line_no);
      if (!inserted) {
        throw Error(truth_file.string() + ": duplicate hit_id " + std::to_string(id) + " on lines " +
                    std::to_string(prev->second) + " and " + std::to_string(line_no));
      }
      Hit& h = hits[slot->second];
      h.particle_id = parse_field(truth_file, line_no, "particle_id", [&] { return parse_int(f[1]); });
      h.tx = parse_field(truth_file, line_no, "tx", [&] { return parse_double(f[2]); });
      h.ty = parse_field(truth_file, line_no, "ty", [&] { return parse_double(f[3]); });
      h.tz = parse_field(truth_file, line_no, "tz", [&] { return parse_double(f[4]); });
      h.tpx = parse_field(truth_file, line_no, "tpx", [&] { return parse_double(f[5]); });
      h.tpy = parse_field(truth_file, line_no, "tpy", [&] { return parse_double(f[6]); });
      h.tpz = parse_field(truth_file, line_no, "tpz", [&] { return parse_double(f[7]); });
      h.weight = parse_field(truth_file, line_no, "weight", [&] { return parse_double(f[8]); });
      has_truth[slot->second] = true;
    }
  }
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (!has_truth[i]) {
      throw Error(truth_file.string() + ": no truth row for hit_id " + std::to_string(hits[i].id) +
                  " (hits line " + std::to_string(line_of.at(hits[i].id)) + ")");
    }
  }
  return Event::from_truth(std::move(hits));
}

void write_trackml(const Event& event, const std::filesystem::path& hits_file,
                   const std::filesystem::path& truth_file) {
  std::ofstream hits_out(hits_file);
  if (!hits_out) throw Error("cannot write " + hits_file.string());
  std::ofstream truth_out(truth_file);
  if (!truth_out) throw Error("cannot write " + truth_file.string());

  hits_out << kHitsHeader << '\n';
  truth_out << kTruthHeader << '\n';
  for (const Hit& h : event.hits()) {
    hits_out << h.id << ',' << format_double(h.x) << ',' << format_double(h.y) << ',' << format_double(h.z) << ','
             << h.volume_id << ',' << h.layer_id << ',' << h.module_id << '\n';
    truth_out << h.id << ',' << h.particle_id << ',' << format_double(h.tx) << ',' << format_double(h.ty) << ','
              << format_double(h.tz) << ',' << format_double(h.tpx) << ',' << format_double(h.tpy) << ','
              << format_double(h.tpz) << ',' << format_double(h.weight) << '\n';
  }
  if (!hits_out || !truth_out) throw Error("write failed for " + hits_file.string());
}

}  // namespace qtrack
