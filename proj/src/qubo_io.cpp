// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the qtrack project.

#include <istream>
#include <ostream>
#include <string>

#include "qtrack/error.hpp"
#include "qtrack/qubo.hpp"
#include "qtrack/text.hpp"

namespace qtrack {

void write_qubo(std::ostream& out, const Qubo& q) {
  out << "# qtrack-qubo 1\n";
  out << "n " << q.n << '\n';
  out << "offset " << format_double(q.offset) << '\n';
  for (std::size_t i = 0; i < q.var_to_edge.size(); ++i) out << "var " << i << ' ' << q.var_to_edge[i] << '\n';
  for (const auto& [i, v] : q.linear) out << "lin " << i << ' ' << format_double(v) << '\n';
  for (const auto& [key, v] : q.quadratic) {
    out << "quad " << key.first << ' ' << key.second << ' ' << format_double(v) << '\n';
  }
}

Qubo read_qubo(std::istream& in) {
  Qubo q;
  bool have_n = false;
  std::string raw;
  std::size_t line_no = 0;
  const auto index = [&](std::string_view field) {
    const std::int64_t i = parse_int(field);
    if (i < 0 || static_cast<std::size_t>(i) >= q.n) throw Error("variable index out of range");
    return static_cast<VarIndex>(i);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = chomp(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = split(line, ' ');
    try {
      if (f[0] == "n" && f.size() == 2) {
        if (have_n) throw Error("duplicate n line");
        const std::int64_t n = parse_int(f[1]);
        if (n < 0) throw Error("negative variable count");
        q.n = static_cast<std::size_t>(n);
        have_n = true;
      } else if (!have_n) {
        throw Error("the n line must come first");
      } else if (f[0] == "offset" && f.size() == 2) {
        q.offset = parse_double(f[1]);
      } else if (f[0] == "var" && f.size() == 3) {
        const VarIndex i = index(f[1]);
        if (q.var_to_edge.size() != i) throw Error("var lines must be consecutive from 0");
        q.var_to_edge.push_back(parse_int(f[2]));
      } else if (f[0] == "lin" && f.size() == 3) {
        q.add_linear(index(f[1]), parse_double(f[2]));
      } else if (f[0] == "quad" && f.size() == 4) {
        const VarIndex i = index(f[1]);
        const VarIndex j = index(f[2]);
        if (!(i < j)) throw Error("quad keys must satisfy i < j");
        q.add_quadratic(i, j, parse_double(f[3]));
      } else {
        throw Error("unrecognized line '" + std::string(line) + "'");
      }
    } catch (const Error& e) {
      throw Error("qubo:" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_n) throw Error("qubo: missing n line");
  if (!q.var_to_edge.empty() && q.var_to_edge.size() != q.n) throw Error("qubo: var lines do not cover every variable");
  q.prune_zeros();
  return q;
}

}  // namespace qtrack
