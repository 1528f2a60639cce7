#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "depbandits/errors.hpp"
#include "depbandits/harness.hpp"
#include "depbandits/instance.hpp"
#include "depbandits/policies.hpp"

namespace depbandits {

inline constexpr int kConfigSchemaVersion = 1;

enum class KappaMode { value, floor, practical_default };

struct KappaSetting {
  KappaMode mode = KappaMode::value;
  double value = 0.0;
};

/// Inputs of kappa_floor; sigma falls back to the largest sub-Gaussian parameter of the instance.
struct FloorInputs {
  std::optional<double> lipschitz;
  std::optional<double> sigma;
  std::optional<int> m;
};

/// A parsed experiment document.
struct ExperimentFile {
  std::filesystem::path path;
  std::string text;
  std::uint64_t hash = 0;

  InstanceSpec instance;
  std::vector<PolicyKind> policies;
  std::uint64_t horizon = 0;
  std::uint64_t replications = 1;
  std::uint64_t seed = 0;
  std::optional<KappaSetting> kappa;
  std::optional<FloorInputs> floor;
  bool strict_theory = false;
  std::vector<std::uint64_t> checkpoints;
  bool audit = false;
  std::uint64_t recompute_every = 1;
  bool realized_regret = false;
  std::optional<std::filesystem::path> output_dir;  // resolved against the config's directory
  CertifyOptions certification;
  bool force = false;
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

using nlohmann::json;

inline std::string key_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline std::string index_path(const std::string& parent, std::size_t k) { return parent + "[" + std::to_string(k) + "]"; }

inline std::string type_name(const json& j) { return j.type_name(); }

[[noreturn]] inline void field_error(const std::string& path, const std::string& msg) {
  throw ConfigError((path.empty() ? std::string("config") : path) + ": " + msg);
}

inline const json& require_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) field_error(path, std::string("expected an object, got ") + type_name(j));
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) field_error(key_path(path, it.key()), "unknown key");
  }
  return j;
}

inline const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline const json& need(const json& obj, const std::string& path, const char* key) {
  if (const json* v = find(obj, key)) return *v;
  field_error(key_path(path, key), "missing required field");
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) field_error(path, std::string("expected a number, got ") + type_name(j));
  return j.get<double>();
}

inline std::uint64_t as_count(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  field_error(path, std::string("expected a non-negative integer, got ") + (j.is_number() ? j.dump() : type_name(j)));
}

inline bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) field_error(path, std::string("expected true or false, got ") + type_name(j));
  return j.get<bool>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) field_error(path, std::string("expected a string, got ") + type_name(j));
  return j.get<std::string>();
}

inline std::vector<double> as_numbers(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) field_error(path, std::string("expected a number or an array of numbers, got ") + type_name(j));
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_number(j[k], index_path(path, k)));
  return out;
}

/// Runs `fn`, prefixing any ConfigError it raises with `path`.
template <typename Fn>
auto at_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + what);
  }
}

inline ParameterSpace parse_space(const json& j, const std::string& path) {
  if (!j.is_object()) field_error(path, std::string("expected an object, got ") + type_name(j));
  const std::string kind = as_string(need(j, path, "kind"), key_path(path, "kind"));
  if (kind == "interval") {
    require_object(j, path, {"kind", "lower", "upper", "grid_step"});
    const double lo = as_number(need(j, path, "lower"), key_path(path, "lower"));
    const double hi = as_number(need(j, path, "upper"), key_path(path, "upper"));
    double step = ParameterSpace::kDefaultScalarStep;
    if (const json* s = find(j, "grid_step")) step = as_number(*s, key_path(path, "grid_step"));
    return at_path(path, [&] { return ParameterSpace::interval(lo, hi, step); });
  }
  if (kind == "box") {
    require_object(j, path, {"kind", "lower", "upper", "points_per_axis"});
    auto lo = as_numbers(need(j, path, "lower"), key_path(path, "lower"));
    auto hi = as_numbers(need(j, path, "upper"), key_path(path, "upper"));
    std::size_t points = ParameterSpace::kDefaultPointsPerAxis;
    if (const json* p = find(j, "points_per_axis")) points = as_count(*p, key_path(path, "points_per_axis"));
    return at_path(path, [&] { return ParameterSpace::box(lo, hi, points); });
  }
  if (kind == "simplex_interior") {
    require_object(j, path, {"kind", "dim", "floor", "points_per_axis"});
    const std::size_t dim = as_count(need(j, path, "dim"), key_path(path, "dim"));
    double floor = ParameterSpace::kDefaultSimplexFloor;
    if (const json* f = find(j, "floor")) floor = as_number(*f, key_path(path, "floor"));
    std::size_t points = ParameterSpace::kDefaultPointsPerAxis;
    if (const json* p = find(j, "points_per_axis")) points = as_count(*p, key_path(path, "points_per_axis"));
    return at_path(path, [&] { return ParameterSpace::simplex_interior(dim, floor, points); });
  }
  field_error(key_path(path, "kind"), "unknown space kind '" + kind + "' (expected interval, box or simplex_interior)");
}

inline ArmModel parse_arm(const json& j, const std::string& path) {
  if (!j.is_object()) field_error(path, std::string("expected an object, got ") + type_name(j));
  const std::string family = as_string(need(j, path, "family"), key_path(path, "family"));
  if (family == "gaussian_scaled") {
    require_object(j, path, {"family", "scale", "noise"});
    const double scale = as_number(need(j, path, "scale"), key_path(path, "scale"));
    double noise = 1.0;
    if (const json* n = find(j, "noise")) noise = as_number(*n, key_path(path, "noise"));
    return at_path(path, [&] { return ArmModel::gaussian(scale, noise); });
  }
  if (family == "bernoulli_link") {
    require_object(j, path, {"family", "link"});
    const std::string link = as_string(need(j, path, "link"), key_path(path, "link"));
    if (link == "identity") return ArmModel::bernoulli(BernoulliLinkKind::identity);
    if (link == "mirror") return ArmModel::bernoulli(BernoulliLinkKind::mirror);
    field_error(key_path(path, "link"), "unknown link '" + link + "' (expected identity or mirror)");
  }
  if (family == "finite_support_linear") {
    require_object(j, path, {"family", "support", "mixing"});
    const json& s = need(j, path, "support");
    if (!s.is_array()) field_error(key_path(path, "support"), "expected an array of numbers");
    auto support = as_numbers(s, key_path(path, "support"));
    std::vector<std::vector<double>> mixing;
    if (const json* m = find(j, "mixing")) {
      const std::string mp = key_path(path, "mixing");
      if (m->is_string() && m->get<std::string>() == "identity") {
      } else if (m->is_array()) {
        for (std::size_t r = 0; r < m->size(); ++r) {
          if (!(*m)[r].is_array()) field_error(index_path(mp, r), "expected an array of numbers");
          mixing.push_back(as_numbers((*m)[r], index_path(mp, r)));
        }
      } else {
        field_error(mp, "expected a matrix (array of rows) or \"identity\"");
      }
    }
    return at_path(path, [&] { return ArmModel::finite_support(support, mixing); });
  }
  field_error(key_path(path, "family"),
              "unknown family '" + family + "' (expected gaussian_scaled, bernoulli_link or finite_support_linear)");
}

inline InstanceSpec parse_instance(const json& j, const std::string& path) {
  require_object(j, path, {"clusters"});
  const std::string cp = key_path(path, "clusters");
  const json& clusters = need(j, path, "clusters");
  if (!clusters.is_array() || clusters.empty()) field_error(cp, "expected a non-empty array of clusters");
  InstanceSpec spec;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const std::string p = index_path(cp, c);
    require_object(clusters[c], p, {"theta_star", "space", "arms"});
    auto space = parse_space(need(clusters[c], p, "space"), key_path(p, "space"));
    auto theta = as_numbers(need(clusters[c], p, "theta_star"), key_path(p, "theta_star"));
    const json& arms = need(clusters[c], p, "arms");
    const std::string ap = key_path(p, "arms");
    if (!arms.is_array() || arms.empty()) field_error(ap, "expected a non-empty array of arms");
    std::vector<ArmModel> models;
    for (std::size_t a = 0; a < arms.size(); ++a) models.push_back(parse_arm(arms[a], index_path(ap, a)));
    if (theta.size() != space.dim())
      field_error(key_path(p, "theta_star"), "has " + std::to_string(theta.size()) + " coordinates but the space has " +
                                                 std::to_string(space.dim()));
    if (!space.contains(theta)) field_error(key_path(p, "theta_star"), "is outside the cluster space");
    for (std::size_t a = 0; a < models.size(); ++a)
      at_path(index_path(ap, a), [&] { models[a].validate(space); });
    spec.add_cluster(std::move(space), std::move(theta), std::move(models));
  }
  return spec;
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Parses and schema-validates an experiment document. `origin` names the
/// document in messages and anchors relative paths.
inline ExperimentFile parse_experiment(const std::string& text, const std::filesystem::path& origin) {
  using detail::json;
  ExperimentFile f;
  f.path = origin;
  f.text = text;
  f.hash = fnv1a64(text);

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = detail::line_column(text, e.byte);
    std::string msg = e.what();
    if (auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError(origin.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }

  try {
    detail::require_object(root, "",
                           {"schema_version", "instance", "policies", "horizon", "replications", "seed", "kappa",
                            "kappa_floor", "strict_theory", "checkpoints", "audit", "recompute_every",
                            "realized_regret", "output_dir", "certification"});
    const auto version = detail::as_count(detail::need(root, "", "schema_version"), "schema_version");
    if (version != kConfigSchemaVersion)
      detail::field_error("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                                std::to_string(kConfigSchemaVersion) + ")");
    f.instance = detail::parse_instance(detail::need(root, "", "instance"), "instance");

    const json& pol = detail::need(root, "", "policies");
    if (!pol.is_array() || pol.empty()) detail::field_error("policies", "expected a non-empty array of policy names");
    for (std::size_t k = 0; k < pol.size(); ++k) {
      const std::string p = detail::index_path("policies", k);
      const PolicyKind kind = detail::at_path(p, [&] { return parse_policy_kind(detail::as_string(pol[k], p)); });
      if (std::find(f.policies.begin(), f.policies.end(), kind) != f.policies.end())
        detail::field_error(p, std::string("policy ") + to_string(kind) + " is listed twice");
      f.policies.push_back(kind);
    }

    f.horizon = detail::as_count(detail::need(root, "", "horizon"), "horizon");
    if (const json* r = detail::find(root, "replications")) f.replications = detail::as_count(*r, "replications");
    if (f.replications == 0) detail::field_error("replications", "must be at least 1");
    if (const json* s = detail::find(root, "seed")) f.seed = detail::as_count(*s, "seed");

    if (const json* k = detail::find(root, "kappa")) {
      if (k->is_string()) {
        const std::string v = k->get<std::string>();
        if (v == "floor")
          f.kappa = KappaSetting{KappaMode::floor, 0.0};
        else if (v == "default")
          f.kappa = KappaSetting{KappaMode::practical_default, 0.0};
        else
          detail::field_error("kappa", "expected a positive number, \"floor\" or \"default\", got \"" + v + "\"");
      } else {
        const double v = detail::as_number(*k, "kappa");
        if (!(v > 0.0)) detail::field_error("kappa", "must be positive");
        f.kappa = KappaSetting{KappaMode::value, v};
      }
    }
    if (const json* fl = detail::find(root, "kappa_floor")) {
      detail::require_object(*fl, "kappa_floor", {"L_p", "sigma", "m"});
      FloorInputs in;
      if (const json* v = detail::find(*fl, "L_p")) in.lipschitz = detail::as_number(*v, "kappa_floor.L_p");
      if (const json* v = detail::find(*fl, "sigma")) in.sigma = detail::as_number(*v, "kappa_floor.sigma");
      if (const json* v = detail::find(*fl, "m")) in.m = static_cast<int>(detail::as_count(*v, "kappa_floor.m"));
      f.floor = in;
    }
    if (const json* s = detail::find(root, "strict_theory")) f.strict_theory = detail::as_bool(*s, "strict_theory");

    if (const json* c = detail::find(root, "checkpoints")) {
      if (!c->is_array()) detail::field_error("checkpoints", "expected an array of rounds");
      for (std::size_t k = 0; k < c->size(); ++k)
        f.checkpoints.push_back(detail::as_count((*c)[k], detail::index_path("checkpoints", k)));
    }
    if (const json* a = detail::find(root, "audit")) f.audit = detail::as_bool(*a, "audit");
    if (const json* r = detail::find(root, "recompute_every")) f.recompute_every = detail::as_count(*r, "recompute_every");
    if (f.recompute_every == 0) detail::field_error("recompute_every", "must be at least 1");
    if (const json* r = detail::find(root, "realized_regret")) f.realized_regret = detail::as_bool(*r, "realized_regret");
    if (const json* o = detail::find(root, "output_dir")) {
      std::filesystem::path p = detail::as_string(*o, "output_dir");
      f.output_dir = p.is_absolute() ? p : origin.parent_path() / p;
    }
    if (const json* c = detail::find(root, "certification")) {
      detail::require_object(*c, "certification", {"min_lb", "kl_floor", "force"});
      if (const json* v = detail::find(*c, "min_lb")) f.certification.min_lb = detail::as_number(*v, "certification.min_lb");
      if (const json* v = detail::find(*c, "kl_floor"))
        f.certification.kl_floor = detail::as_number(*v, "certification.kl_floor");
      if (const json* v = detail::find(*c, "force")) f.force = detail::as_bool(*v, "certification.force");
    }
  } catch (const ConfigError& e) {
    throw ConfigError(origin.string() + ": " + e.what());
  }
  return f;
}

inline ExperimentFile load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str(), path);
}

/// The kappa a run should use, with a label of where it came from.
struct ResolvedKappa {
  double value = 0.0;
  std::string source;  // "config", "floor" or "default"
  std::optional<double> floor;
};

inline double floor_sigma(const BanditInstance& inst, const FloorInputs& in) {
  if (in.sigma) return *in.sigma;
  double s = 0.0;
  for (ArmId i = 0; i < inst.num_arms(); ++i) s = std::max(s, inst.arm(i).sub_gaussian().sigma);
  return s;
}

inline double configured_floor(const BanditInstance& inst, const StructuralConstants& constants,
                               const std::optional<FloorInputs>& in) {
  std::vector<std::string> missing;
  if (!in || !in->lipschitz) missing.push_back("kappa_floor.L_p");
  if (!in || !in->m) missing.push_back("kappa_floor.m");
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw ConfigError("kappa floor needs " + names);
  }
  return kappa_floor(inst, constants, *in->lipschitz, floor_sigma(inst, *in), *in->m);
}

/// Resolves the configured kappa. A missing kappa falls back to the floor
/// when floor inputs are present; strict-theory mode rejects values below the floor.
inline ResolvedKappa resolve_kappa(const ExperimentFile& f, const BanditInstance& inst,
                                   const StructuralConstants& constants) {
  ResolvedKappa r;
  std::optional<KappaSetting> k = f.kappa;
  if (!k) {
    if (!f.floor)
      throw ConfigError("kappa is not set: give kappa (a number, \"default\" or \"floor\") or the floor inputs "
                        "kappa_floor.L_p, kappa_floor.m");
    k = KappaSetting{KappaMode::floor, 0.0};
  }
  if (k->mode == KappaMode::floor || f.strict_theory)
    r.floor = configured_floor(inst, constants, f.floor);
  else if (f.floor && f.floor->lipschitz && f.floor->m)
    r.floor = configured_floor(inst, constants, f.floor);
  switch (k->mode) {
    case KappaMode::value:
      r.value = k->value;
      r.source = "config";
      break;
    case KappaMode::floor:
      r.value = *r.floor;
      r.source = "floor";
      break;
    case KappaMode::practical_default:
      r.value = default_kappa(inst, constants);
      r.source = "default";
      break;
  }
  if (!(r.value > 0.0)) throw ConfigError("resolved kappa is not positive");
  if (f.strict_theory && r.value < *r.floor)
    throw ConfigError("strict_theory: kappa " + std::to_string(r.value) + " is below the floor " +
                      std::to_string(*r.floor));
  return r;
}

}  // namespace depbandits
