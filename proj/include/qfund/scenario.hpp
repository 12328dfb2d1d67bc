#pragma once

// Scenario files: a JSON document naming citizens (value functions), goods,
// the mechanism ("qf" or {p, q, s}), and optional solver settings. Parse
// errors carry line/column positions; validation errors cite the document
// path of the offending field.
//
//   {
//     "mechanism": "qf",
//     "citizens": [
//       {"id": "ada",  "value": {"family": "sqrt",  "a": 1.0}},
//       {"id": "bert", "value": {"family": "log1p", "b": 2.0}}
//     ],
//     "goods": [
//       {"id": "park"},
//       {"id": "bridge", "contributions": [4.0, 9.0]}
//     ],
//     "solver": {"damping": 0.5, "max_sweeps": 500}
//   }

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qfund/equilibrium.hpp"
#include "qfund/errors.hpp"
#include "qfund/mechanism.hpp"
#include "qfund/preferences.hpp"

namespace qfund {

using Json = nlohmann::ordered_json;

struct Citizen {
  std::string id;
  ValueFunction value;

  bool operator==(const Citizen&) const = default;
};

struct Good {
  std::string id;
  std::optional<std::vector<double>> contributions;  // fixed amounts, one per citizen

  bool operator==(const Good&) const = default;
};

struct Scenario {
  MechanismSpec mechanism;
  bool mechanism_is_qf;  // the file used the literal "qf"
  std::vector<Citizen> citizens;
  std::vector<Good> goods;
  SolverOptions solver;

  [[nodiscard]] Society society() const {
    std::vector<ValueFunction> values;
    values.reserve(citizens.size());
    for (const auto& c : citizens) values.push_back(c.value);
    return Society(std::move(values));
  }

  bool operator==(const Scenario&) const = default;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

inline const Json& member(const Json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path, std::string("missing required key '") + key + "'");
  return *it;
}

inline double number_at(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline std::string string_at(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline void reject_unknown_keys(const Json& obj, std::initializer_list<const char*> allowed,
                                const std::string& path) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) fail(path, "unknown key '" + item.key() + "'");
  }
}

// Runs a constructor and re-raises its invariant message under the document path.
template <typename Make>
auto with_path(const std::string& path, Make&& make) -> decltype(make()) {
  try {
    return make();
  } catch (const ValidationError& e) {
    fail(path, e.what());
  }
}

inline ValueFunction parse_value_function(const Json& j, const std::string& path) {
  const std::string family = string_at(member(j, "family", path), path + ".family");
  if (family == "sqrt") {
    reject_unknown_keys(j, {"family", "a"}, path);
    const double a = number_at(member(j, "a", path), path + ".a");
    return with_path(path, [&] { return ValueFunction(SqrtValue(a)); });
  }
  if (family == "log1p") {
    reject_unknown_keys(j, {"family", "b"}, path);
    const double b = number_at(member(j, "b", path), path + ".b");
    return with_path(path, [&] { return ValueFunction(LogValue(b)); });
  }
  if (family == "power") {
    reject_unknown_keys(j, {"family", "a", "alpha"}, path);
    const double a = number_at(member(j, "a", path), path + ".a");
    const double alpha = number_at(member(j, "alpha", path), path + ".alpha");
    return with_path(path, [&] { return ValueFunction(PowerValue(a, alpha)); });
  }
  fail(path + ".family",
       "unknown value family '" + family + "' (supported: sqrt, log1p, power)");
}

inline std::pair<MechanismSpec, bool> parse_mechanism(const Json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "qf") return {qf_mechanism(), true};
    fail(path, "unknown mechanism '" + name + "' (supported: \"qf\" or {p, q, s})");
  }
  if (!j.is_object()) fail(path, "expected \"qf\" or an object {p, q, s}");
  reject_unknown_keys(j, {"p", "q", "s"}, path);
  const double p = number_at(member(j, "p", path), path + ".p");
  const double q = number_at(member(j, "q", path), path + ".q");
  const double s = j.contains("s") ? number_at(j.at("s"), path + ".s") : 1.0;
  return with_path(path, [&] {
    return std::pair<MechanismSpec, bool>{MechanismSpec{WeightFunction(p), LeverFunction(q, s)},
                                          false};
  });
}

inline SolverOptions parse_solver(const Json& j, const std::string& path) {
  SolverOptions opts;
  reject_unknown_keys(j, {"damping", "max_sweeps", "foc_tolerance", "step_tolerance"}, path);
  if (j.contains("damping")) opts.damping = number_at(j.at("damping"), path + ".damping");
  if (j.contains("max_sweeps")) {
    const Json& ms = j.at("max_sweeps");
    if (!ms.is_number_integer()) fail(path + ".max_sweeps", "expected an integer");
    opts.max_sweeps = ms.get<int>();
  }
  if (j.contains("foc_tolerance")) {
    opts.foc_tolerance = number_at(j.at("foc_tolerance"), path + ".foc_tolerance");
  }
  if (j.contains("step_tolerance")) {
    opts.step_tolerance = number_at(j.at("step_tolerance"), path + ".step_tolerance");
  }
  try {
    opts.validate();
  } catch (const ValidationError& e) {
    fail(path, e.what());
  }
  return opts;
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& root) {
  using detail::fail;
  if (!root.is_object()) fail("scenario", "top level must be an object");
  detail::reject_unknown_keys(root, {"mechanism", "citizens", "goods", "solver"}, "scenario");

  auto [mechanism, is_qf] =
      detail::parse_mechanism(detail::member(root, "mechanism", "scenario"), "mechanism");

  const Json& citizens_json = detail::member(root, "citizens", "scenario");
  if (!citizens_json.is_array() || citizens_json.empty()) {
    fail("citizens", "expected a non-empty array");
  }
  std::vector<Citizen> citizens;
  citizens.reserve(citizens_json.size());
  for (std::size_t i = 0; i < citizens_json.size(); ++i) {
    const std::string path = "citizens[" + std::to_string(i) + "]";
    const Json& cj = citizens_json[i];
    if (!cj.is_object()) fail(path, "expected an object");
    detail::reject_unknown_keys(cj, {"id", "value"}, path);
    std::string id = detail::string_at(detail::member(cj, "id", path), path + ".id");
    if (id.empty()) fail(path + ".id", "must not be empty");
    citizens.push_back(Citizen{
        std::move(id),
        detail::parse_value_function(detail::member(cj, "value", path), path + ".value")});
  }

  const Json& goods_json = detail::member(root, "goods", "scenario");
  if (!goods_json.is_array() || goods_json.empty()) fail("goods", "expected a non-empty array");
  std::vector<Good> goods;
  goods.reserve(goods_json.size());
  for (std::size_t i = 0; i < goods_json.size(); ++i) {
    const std::string path = "goods[" + std::to_string(i) + "]";
    const Json& gj = goods_json[i];
    if (!gj.is_object()) fail(path, "expected an object");
    detail::reject_unknown_keys(gj, {"id", "contributions"}, path);
    Good good;
    good.id = detail::string_at(detail::member(gj, "id", path), path + ".id");
    if (good.id.empty()) fail(path + ".id", "must not be empty");
    if (gj.contains("contributions")) {
      const Json& arr = gj.at("contributions");
      const std::string cpath = path + ".contributions";
      if (!arr.is_array()) fail(cpath, "expected an array of numbers");
      std::vector<double> amounts;
      amounts.reserve(arr.size());
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const double v = detail::number_at(arr[k], cpath + "[" + std::to_string(k) + "]");
        if (!(v >= 0.0)) fail(cpath + "[" + std::to_string(k) + "]", "contributions must be non-negative");
        amounts.push_back(v);
      }
      if (amounts.size() != citizens.size()) {
        fail(cpath, "expected one contribution per citizen (" +
                        std::to_string(citizens.size()) + "), got " +
                        std::to_string(amounts.size()));
      }
      good.contributions = std::move(amounts);
    }
    goods.push_back(std::move(good));
  }

  SolverOptions solver;
  if (root.contains("solver")) solver = detail::parse_solver(root.at("solver"), "solver");

  return Scenario{std::move(mechanism), is_qf, std::move(citizens), std::move(goods), solver};
}

inline Scenario parse_scenario(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  return scenario_from_json(root);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading scenario file '" + path + "'");
  return parse_scenario(buffer.str());
}

inline Json value_function_to_json(const ValueFunction& v) {
  Json j;
  if (const auto* s = std::get_if<SqrtValue>(&v)) {
    j["family"] = "sqrt";
    j["a"] = s->scale();
  } else if (const auto* l = std::get_if<LogValue>(&v)) {
    j["family"] = "log1p";
    j["b"] = l->scale();
  } else {
    const auto& p = std::get<PowerValue>(v);
    j["family"] = "power";
    j["a"] = p.scale();
    j["alpha"] = p.exponent();
  }
  return j;
}

inline Json scenario_to_json(const Scenario& s) {
  Json j;
  if (s.mechanism_is_qf) {
    j["mechanism"] = "qf";
  } else {
    j["mechanism"] = Json{{"p", s.mechanism.weight.exponent()},
                          {"q", s.mechanism.lever.exponent()},
                          {"s", s.mechanism.lever.scale()}};
  }
  j["citizens"] = Json::array();
  for (const auto& c : s.citizens) {
    j["citizens"].push_back(Json{{"id", c.id}, {"value", value_function_to_json(c.value)}});
  }
  j["goods"] = Json::array();
  for (const auto& g : s.goods) {
    Json gj{{"id", g.id}};
    if (g.contributions) gj["contributions"] = *g.contributions;
    j["goods"].push_back(std::move(gj));
  }
  j["solver"] = Json{{"damping", s.solver.damping},
                     {"max_sweeps", s.solver.max_sweeps},
                     {"foc_tolerance", s.solver.foc_tolerance},
                     {"step_tolerance", s.solver.step_tolerance}};
  return j;
}

inline std::string emit_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

}  // namespace qfund
