#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "depbandits/bounds.hpp"
#include "depbandits/harness.hpp"
#include "depbandits/instance.hpp"

namespace depbandits {

inline constexpr int kOutputSchemaVersion = 1;

/// Shortest round-trip decimal form; identical on every platform.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kTraceHeader = "policy,seed,t,regret";
inline constexpr const char* kAggregateHeader = "policy,t,mean,sd,ci95";

inline void write_traces_csv(std::ostream& out, const MonteCarloResult& res) {
  out << kTraceHeader << '\n';
  for (const auto& tr : res.traces)
    for (std::size_t k = 0; k < tr.checkpoints.size(); ++k)
      out << to_string(tr.policy) << ',' << tr.seed << ',' << tr.checkpoints[k] << ',' << format_double(tr.regret[k])
          << '\n';
}

inline void write_aggregate_csv(std::ostream& out, const MonteCarloResult& res) {
  out << kAggregateHeader << '\n';
  for (const auto& s : res.aggregate)
    for (const auto& p : s.points)
      out << to_string(s.policy) << ',' << p.t << ',' << format_double(p.mean) << ',' << format_double(p.sd) << ','
          << format_double(p.ci95) << '\n';
}

// ---------------------------------------------------------------------------
// JSON documents (arm and cluster ids are 1-based; infinities become null)

using ojson = nlohmann::ordered_json;

inline ojson json_number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

inline ojson json_numbers(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

inline ojson constants_json(const BanditInstance& inst, const StructuralConstants& s, const CertifyOptions& opt) {
  ojson doc;
  doc["schema_version"] = kOutputSchemaVersion;
  doc["satisfied"] = s.satisfied();
  doc["min_lb"] = opt.min_lb;
  doc["kl_floor"] = opt.kl_floor;
  doc["clusters"] = ojson::array();
  for (const auto& cc : s.clusters) {
    const Cluster& cl = inst.cluster(cc.cluster);
    ojson c;
    c["cluster"] = cc.cluster + 1;
    c["grid_points"] = cc.grid_points;
    ojson arms = ojson::array();
    for (ArmId id : cl.arm_ids) arms.push_back(id + 1);
    c["arms"] = arms;
    ojson pairs = ojson::array();
    for (std::size_t j = 0; j < cl.size(); ++j)
      for (std::size_t i = 0; i < cl.size(); ++i)
        pairs.push_back({{"pair", {cl.arm_ids[j] + 1, cl.arm_ids[i] + 1}}, {"lb", json_number(cc.lb[j][i])}});
    c["lb"] = pairs;
    c["B"] = json_numbers(cc.B);
    c["Sigma"] = json_numbers(cc.Sigma);
    c["Gamma"] = json_numbers(cc.Gamma);
    ojson viol = ojson::array();
    for (const auto& v : cc.violations) viol.push_back({{"pair", {v.j + 1, v.i + 1}}, {"lb", json_number(v.value)}});
    c["violations"] = viol;
    doc["clusters"].push_back(c);
  }
  return doc;
}

inline ojson bounds_json(const BoundReport& r, const std::string& kappa_source) {
  ojson doc;
  doc["schema_version"] = kOutputSchemaVersion;
  doc["kappa"] = json_number(r.kappa);
  doc["kappa_source"] = kappa_source;
  doc["lower_bound_coefficient"] = json_number(r.lower_coefficient);
  doc["upper_bound_coefficient"] = json_number(r.upper_coefficient);
  doc["suboptimal_clusters"] = r.suboptimal_clusters;
  doc["ordered"] = r.ordered();
  doc["partial"] = r.partial;
  doc["clusters"] = ojson::array();
  for (const auto& c : r.clusters) {
    ojson o;
    o["cluster"] = c.cluster + 1;
    o["optimal"] = c.optimal;
    o["min_gap"] = json_number(c.min_gap);
    o["max_gap"] = json_number(c.max_gap);
    o["max_inv_phi"] = json_number(c.max_inv_phi);
    o["lower_term"] = json_number(c.lower_term);
    o["lower_available"] = c.lower_available;
    o["play_count_coefficient"] = json_number(c.play_count_coefficient);
    o["upper_term"] = json_number(c.upper_term);
    o["upper_available"] = c.upper_available;
    o["grid_step"] = json_number(c.grid_step);
    doc["clusters"].push_back(o);
  }
  doc["arms"] = ojson::array();
  for (const auto& a : r.arms) {
    ojson o;
    o["arm"] = a.arm + 1;
    o["cluster"] = a.cluster + 1;
    o["gap"] = json_number(a.gap);
    o["psi_inv_half_gap"] = json_number(a.psi_inv_half_gap);
    o["phi"] = json_number(a.phi);
    o["Sigma"] = json_number(a.Sigma);
    o["Gamma"] = json_number(a.Gamma);
    doc["arms"].push_back(o);
  }
  return doc;
}

/// One JSON object per line and round.
inline void write_audit_jsonl(std::ostream& out, const MonteCarloResult& res) {
  for (const auto& tr : res.traces)
    for (const auto& rec : tr.audit) {
      ojson o;
      o["policy"] = to_string(tr.policy);
      o["seed"] = tr.seed;
      o["t"] = rec.round;
      o["arm"] = rec.arm + 1;
      o["phase"] = to_string(rec.phase);
      o["reward"] = rec.reward;
      o["indices"] = json_numbers(rec.indices);
      ojson cl = ojson::array();
      for (const auto& c : rec.clusters)
        cl.push_back({{"theta_hat", json_numbers(c.theta_hat)},
                      {"radius", json_number(c.radius)},
                      {"plays", c.plays},
                      {"truth_in_ball", c.truth_in_ball}});
      o["clusters"] = cl;
      out << o.dump() << '\n';
    }
}

}  // namespace depbandits
