#include <string>
#include <unordered_set>

#include <json.hpp>

#include "bagopf/casedata.hpp"
#include "bagopf/error.hpp"

namespace bagopf {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "bagopf-network";
constexpr int kFormatVersion = 1;

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError("expected an object", path);
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing required field", path + "/" + key);
  return *it;
}

double number(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number()) throw ParseError("expected a number", path + "/" + key);
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback,
                 const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw ParseError("expected a number", path + "/" + key);
  return it->get<double>();
}

std::optional<double> optional_number(const json& obj, const char* key,
                                      const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ParseError("expected a number", path + "/" + key);
  return it->get<double>();
}

int integer(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number_integer()) throw ParseError("expected an integer", path + "/" + key);
  return v.get<int>();
}

const json& array(const json& obj, const char* key) {
  const json& v = field(obj, key, "");
  if (!v.is_array()) throw ParseError("expected an array", std::string("/") + key);
  return v;
}

json optional_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

Network parse_native(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), std::string("/"));
  }
  if (!doc.is_object()) throw ParseError("expected an object", std::string("/"));
  if (auto it = doc.find("format"); it != doc.end() && *it != kFormatTag) {
    throw ParseError("unexpected format tag", std::string("/format"));
  }
  if (auto it = doc.find("version"); it != doc.end() && *it != kFormatVersion) {
    throw ParseError("unsupported version", std::string("/version"));
  }
  const double base = number(doc, "base_mva", "");

  std::vector<Bus> buses;
  std::unordered_set<int> seen;
  const json& jb = array(doc, "buses");
  for (std::size_t i = 0; i < jb.size(); ++i) {
    const std::string path = "/buses/" + std::to_string(i);
    const json& e = jb[i];
    Bus b;
    b.id = integer(e, "id", path);
    b.p_load = number(e, "p_load", path);
    b.q_load = number(e, "q_load", path);
    b.g_shunt = number_or(e, "g_shunt", 0.0, path);
    b.b_shunt = number_or(e, "b_shunt", 0.0, path);
    b.v_min = number(e, "v_min", path);
    b.v_max = number(e, "v_max", path);
    if (auto it = e.find("is_reference"); it != e.end()) {
      if (!it->is_boolean()) throw ParseError("expected a boolean", path + "/is_reference");
      b.is_reference = it->get<bool>();
    }
    if (!seen.insert(b.id).second) throw ParseError("duplicate bus id", path + "/id");
    buses.push_back(b);
  }

  std::vector<Generator> gens;
  const json& jg = array(doc, "generators");
  for (std::size_t i = 0; i < jg.size(); ++i) {
    const std::string path = "/generators/" + std::to_string(i);
    const json& e = jg[i];
    Generator g;
    g.bus = integer(e, "bus", path);
    g.p_min = number(e, "p_min", path);
    g.p_max = number(e, "p_max", path);
    g.q_min = number(e, "q_min", path);
    g.q_max = number(e, "q_max", path);
    g.c2 = number(e, "c2", path);
    g.c1 = number(e, "c1", path);
    g.c0 = number(e, "c0", path);
    gens.push_back(g);
  }

  std::vector<Branch> branches;
  const json& jl = array(doc, "branches");
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const std::string path = "/branches/" + std::to_string(i);
    const json& e = jl[i];
    Branch br;
    br.from = integer(e, "from", path);
    br.to = integer(e, "to", path);
    br.r = number(e, "r", path);
    br.x = number(e, "x", path);
    br.b_charging = number_or(e, "b_charging", 0.0, path);
    br.tap_ratio = number_or(e, "tap_ratio", 1.0, path);
    br.phase_shift = number_or(e, "phase_shift", 0.0, path);
    br.s_max = number_or(e, "s_max", 0.0, path);
    br.v_diff_max = optional_number(e, "v_diff_max", path);
    br.theta_max = optional_number(e, "theta_max", path);
    branches.push_back(br);
  }

  try {
    return make_network(base, std::move(buses), std::move(gens), std::move(branches));
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), std::string("/"));
  }
}

std::string to_native(const Network& network) {
  json doc;
  doc["format"] = kFormatTag;
  doc["version"] = kFormatVersion;
  doc["base_mva"] = network.base_mva;
  json buses = json::array();
  for (const Bus& b : network.buses) {
    buses.push_back({{"id", b.id},
                     {"p_load", b.p_load},
                     {"q_load", b.q_load},
                     {"g_shunt", b.g_shunt},
                     {"b_shunt", b.b_shunt},
                     {"v_min", b.v_min},
                     {"v_max", b.v_max},
                     {"is_reference", b.is_reference}});
  }
  doc["buses"] = std::move(buses);
  json gens = json::array();
  for (const Generator& g : network.generators) {
    gens.push_back({{"bus", g.bus},
                    {"p_min", g.p_min},
                    {"p_max", g.p_max},
                    {"q_min", g.q_min},
                    {"q_max", g.q_max},
                    {"c2", g.c2},
                    {"c1", g.c1},
                    {"c0", g.c0}});
  }
  doc["generators"] = std::move(gens);
  json branches = json::array();
  for (const Branch& br : network.branches) {
    branches.push_back({{"from", br.from},
                        {"to", br.to},
                        {"r", br.r},
                        {"x", br.x},
                        {"b_charging", br.b_charging},
                        {"tap_ratio", br.tap_ratio},
                        {"phase_shift", br.phase_shift},
                        {"s_max", br.s_max},
                        {"v_diff_max", optional_to_json(br.v_diff_max)},
                        {"theta_max", optional_to_json(br.theta_max)}});
  }
  doc["branches"] = std::move(branches);
  return doc.dump(2) + "\n";
}

}  // namespace bagopf
