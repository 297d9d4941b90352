#pragma once

// JSON conversions shared by the dataset readers and writers.

#include <string>

#include "json.hpp"
#include "sgrl/scene.hpp"

namespace sgrl::detail {

using nlohmann::json;

template <typename Derived>
json to_array(const Eigen::MatrixBase<Derived>& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(static_cast<double>(v(k)));
  return a;
}

inline VecX from_array(const json& a, Eigen::Index expected) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != expected) {
    throw ConfigError("expected array of " + std::to_string(expected) + " numbers");
  }
  VecX v(expected);
  for (Eigen::Index k = 0; k < expected; ++k) v(k) = a.at(k).get<double>();
  return v;
}

inline json config_to_json(const StaticConfig& c) {
  json j;
  j["s"] = to_array(c.s);
  j["mode"] = c.mode.supports;
  json poa = json::array();
  json force = json::array();
  for (int k = 0; k < c.mode.arity(); ++k) {
    poa.push_back(to_array(c.mode.poa[k]));
    force.push_back(to_array(c.mode.force[k]));
  }
  j["poa"] = poa;
  j["force"] = force;
  j["violation"] = c.violation;
  return j;
}

inline StaticConfig config_from_json(const json& j) {
  StaticConfig c;
  c.s = from_array(j.at("s"), 6);
  c.mode.supports = j.at("mode").get<std::vector<int>>();
  const auto& poa = j.at("poa");
  const auto& force = j.at("force");
  if (poa.size() != c.mode.supports.size() || force.size() != c.mode.supports.size()) {
    throw ConfigError("mode auxiliaries do not match supports");
  }
  for (std::size_t k = 0; k < poa.size(); ++k) {
    c.mode.poa.push_back(from_array(poa.at(k), 3));
    c.mode.force.push_back(from_array(force.at(k), 3));
  }
  c.violation = j.at("violation").get<double>();
  return c;
}

inline json parse_line(const std::string& line, const std::string& path) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw ConfigError("malformed record in '" + path + "': " + e.what());
  }
}

inline void expect_format(const json& header, const std::string& format,
                          const std::string& path) {
  if (!header.is_object() || header.value("format", "") != format) {
    throw ConfigError("'" + path + "' is not a " + format + " file");
  }
}

}  // namespace sgrl::detail
