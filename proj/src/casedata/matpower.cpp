#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>
#include <string>

#include "bagopf/casedata.hpp"
#include "bagopf/error.hpp"

namespace bagopf {

namespace {

struct Row {
  std::vector<double> values;
  std::size_t line = 0;
};

struct Tables {
  std::optional<double> base_mva;
  std::map<std::string, std::vector<Row>, std::less<>> matrices;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

// Drops a trailing '%' comment, ignoring '%' inside single-quoted strings.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') quoted = !quoted;
    if (line[i] == '%' && !quoted) return line.substr(0, i);
  }
  return line;
}

double parse_number(std::string_view token, std::size_t line) {
  std::string tmp(token);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end == tmp.c_str() || *end != '\0') {
    throw ParseError("invalid number '" + tmp + "'", line);
  }
  return v;
}

void parse_row_chunk(std::string_view chunk, std::size_t line,
                     std::vector<Row>& rows) {
  Row row;
  row.line = line;
  std::size_t i = 0;
  while (i < chunk.size()) {
    while (i < chunk.size() &&
           (std::isspace(static_cast<unsigned char>(chunk[i])) || chunk[i] == ',')) {
      ++i;
    }
    std::size_t j = i;
    while (j < chunk.size() &&
           !(std::isspace(static_cast<unsigned char>(chunk[j])) || chunk[j] == ',')) {
      ++j;
    }
    if (j > i) row.values.push_back(parse_number(chunk.substr(i, j - i), line));
    i = j;
  }
  if (!row.values.empty()) rows.push_back(std::move(row));
}

Tables scan(std::string_view text) {
  Tables t;
  std::string current;  // name of the matrix being read, empty when outside
  bool in_cell = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = strip_comment(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;

    if (in_cell) {
      if (line.find('}') != std::string_view::npos) in_cell = false;
      continue;
    }
    if (!current.empty()) {
      std::string_view body = line;
      const std::size_t close = body.find(']');
      const bool closing = close != std::string_view::npos;
      if (closing) body = body.substr(0, close);
      std::size_t start = 0;
      auto& rows = t.matrices[current];
      while (start <= body.size()) {
        std::size_t semi = body.find(';', start);
        if (semi == std::string_view::npos) semi = body.size();
        parse_row_chunk(body.substr(start, semi - start), line_no, rows);
        start = semi + 1;
      }
      if (closing) current.clear();
      continue;
    }

    line = trim(line);
    if (!line.starts_with("mpc.")) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected '=' in assignment", line_no);
    }
    const std::string name(trim(line.substr(4, eq - 4)));
    std::string_view rhs = trim(line.substr(eq + 1));
    if (rhs.starts_with('[')) {
      current = name;
      auto& rows = t.matrices[name];
      rows.clear();
      std::string_view body = rhs.substr(1);
      const std::size_t close = body.find(']');
      const bool closing = close != std::string_view::npos;
      if (closing) body = body.substr(0, close);
      std::size_t start = 0;
      while (start <= body.size()) {
        std::size_t semi = body.find(';', start);
        if (semi == std::string_view::npos) semi = body.size();
        parse_row_chunk(body.substr(start, semi - start), line_no, rows);
        start = semi + 1;
      }
      if (closing) current.clear();
    } else if (rhs.starts_with('{')) {
      in_cell = rhs.find('}') == std::string_view::npos;
    } else if (name == "baseMVA") {
      if (rhs.ends_with(';')) rhs.remove_suffix(1);
      t.base_mva = parse_number(trim(rhs), line_no);
    }
  }
  if (!current.empty()) {
    throw ParseError("unterminated matrix mpc." + current, line_no);
  }
  return t;
}

const std::vector<Row>& require(const Tables& t, const std::string& name) {
  auto it = t.matrices.find(name);
  if (it == t.matrices.end()) {
    throw ParseError("missing table mpc." + name, std::size_t{0});
  }
  return it->second;
}

void require_columns(const Row& row, std::size_t n, const char* table) {
  if (row.values.size() < n) {
    throw ParseError(std::string(table) + " row has " +
                         std::to_string(row.values.size()) +
                         " columns, expected at least " + std::to_string(n),
                     row.line);
  }
}

int as_id(double v, std::size_t line) {
  if (v != std::floor(v)) throw ParseError("non-integer bus id", line);
  return static_cast<int>(v);
}

// Matpower treats 0 and +-360 degrees as "no limit" for each side.
std::optional<double> angle_limit(double angmin_deg, double angmax_deg) {
  std::optional<double> deg;
  if (angmin_deg != 0.0 && angmin_deg > -360.0) deg = std::abs(angmin_deg);
  if (angmax_deg != 0.0 && angmax_deg < 360.0) {
    deg = deg ? std::min(*deg, std::abs(angmax_deg)) : std::abs(angmax_deg);
  }
  if (!deg) return std::nullopt;
  const double cap = std::numbers::pi / 2 - 1e-3;
  return std::min(*deg * std::numbers::pi / 180.0, cap);
}

}  // namespace

Network parse_matpower(std::string_view text) {
  const Tables t = scan(text);
  if (!t.base_mva) throw ParseError("missing mpc.baseMVA", std::size_t{0});
  const double base = *t.base_mva;
  if (!(base > 0.0)) throw ParseError("baseMVA must be positive", std::size_t{0});

  std::vector<Bus> buses;
  std::map<int, bool> isolated;
  for (const Row& r : require(t, "bus")) {
    require_columns(r, 13, "bus");
    const int type = static_cast<int>(r.values[1]);
    const int id = as_id(r.values[0], r.line);
    if (type == 4) {
      isolated[id] = true;
      continue;
    }
    Bus b;
    b.id = id;
    b.p_load = r.values[2] / base;
    b.q_load = r.values[3] / base;
    b.g_shunt = r.values[4] / base;
    b.b_shunt = r.values[5] / base;
    b.v_max = r.values[11];
    b.v_min = r.values[12];
    b.is_reference = type == 3;
    buses.push_back(b);
  }

  const auto& gen_rows = require(t, "gen");
  const auto& cost_rows = require(t, "gencost");
  if (cost_rows.size() < gen_rows.size()) {
    throw ParseError("gencost has fewer rows than gen", std::size_t{0});
  }
  if (cost_rows.size() > gen_rows.size()) {
    throw UnsupportedFeature("reactive power cost rows in gencost");
  }
  std::vector<Generator> gens;
  for (std::size_t i = 0; i < gen_rows.size(); ++i) {
    const Row& r = gen_rows[i];
    const Row& c = cost_rows[i];
    require_columns(r, 10, "gen");
    require_columns(c, 4, "gencost");
    const int model = static_cast<int>(c.values[0]);
    if (model != 2) {
      throw UnsupportedFeature("line " + std::to_string(c.line) +
                               ": only polynomial cost model 2 is supported");
    }
    const int ncoef = static_cast<int>(c.values[3]);
    if (ncoef > 3) {
      throw UnsupportedFeature("line " + std::to_string(c.line) +
                               ": cost polynomial of degree > 2");
    }
    require_columns(c, 4 + static_cast<std::size_t>(std::max(ncoef, 0)), "gencost");
    const int bus = as_id(r.values[0], r.line);
    if (r.values[7] <= 0.0 || isolated.contains(bus)) continue;
    Generator g;
    g.bus = bus;
    g.q_max = r.values[3] / base;
    g.q_min = r.values[4] / base;
    g.p_max = r.values[8] / base;
    g.p_min = r.values[9] / base;
    // Coefficients are listed highest order first.
    double coef[3] = {0.0, 0.0, 0.0};  // c0, c1, c2 in MW units
    for (int k = 0; k < ncoef; ++k) coef[ncoef - 1 - k] = c.values[4 + k];
    g.c2 = coef[2] * base * base;
    g.c1 = coef[1] * base;
    g.c0 = coef[0];
    gens.push_back(g);
  }

  std::vector<Branch> branches;
  for (const Row& r : require(t, "branch")) {
    require_columns(r, 11, "branch");
    if (r.values[10] <= 0.0) continue;
    Branch br;
    br.from = as_id(r.values[0], r.line);
    br.to = as_id(r.values[1], r.line);
    if (isolated.contains(br.from) || isolated.contains(br.to)) continue;
    br.r = r.values[2];
    br.x = r.values[3];
    br.b_charging = r.values[4];
    br.s_max = r.values[5] / base;
    br.tap_ratio = r.values[8] == 0.0 ? 1.0 : r.values[8];
    br.phase_shift = r.values[9] * std::numbers::pi / 180.0;
    if (r.values.size() >= 13) br.theta_max = angle_limit(r.values[11], r.values[12]);
    branches.push_back(br);
  }

  return make_network(base, std::move(buses), std::move(gens), std::move(branches));
}

}  // namespace bagopf
