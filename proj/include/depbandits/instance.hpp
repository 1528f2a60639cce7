#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "depbandits/errors.hpp"
#include "depbandits/parameter_space.hpp"
#include "depbandits/reward_models.hpp"

namespace depbandits {

/// Zero-based arm index. External outputs (JSON, audit CSV) print id + 1.
using ArmId = std::size_t;
using ClusterId = std::size_t;

struct Cluster {
  ClusterId id = 0;
  std::vector<ArmId> arm_ids;
  std::vector<ArmModel> arms;  // aligned with arm_ids
  Theta theta_star;
  ParameterSpace space;

  std::size_t size() const { return arm_ids.size(); }
};

struct ClusterSpec {
  std::vector<ArmId> arm_ids;
  Theta theta_star;
  ParameterSpace space;
};

/// Declarative description of an instance: a global arm list and a partition.
struct InstanceSpec {
  std::vector<ArmModel> arms;
  std::vector<ClusterSpec> clusters;

  /// Appends a cluster whose arms take the next free ids.
  InstanceSpec& add_cluster(ParameterSpace space, Theta theta_star, std::vector<ArmModel> models) {
    ClusterSpec c{{}, std::move(theta_star), std::move(space)};
    for (auto& m : models) {
      c.arm_ids.push_back(arms.size());
      arms.push_back(std::move(m));
    }
    clusters.push_back(std::move(c));
    return *this;
  }
};

/// M arms partitioned into K clusters, with the gap profile of the hidden
/// parameters. Immutable once built.
class BanditInstance {
 public:
  std::size_t num_arms() const { return means_.size(); }
  std::size_t num_clusters() const { return clusters_.size(); }
  const std::vector<Cluster>& clusters() const { return clusters_; }
  const Cluster& cluster(ClusterId c) const { return clusters_.at(c); }
  const Cluster& cluster_of(ArmId i) const { return clusters_[owner_.at(i)]; }
  ClusterId cluster_id_of(ArmId i) const { return owner_.at(i); }
  std::size_t local_index(ArmId i) const { return local_.at(i); }
  const ArmModel& arm(ArmId i) const { return cluster_of(i).arms[local_.at(i)]; }

  double mean(ArmId i) const { return means_.at(i); }
  double gap(ArmId i) const { return gaps_.at(i); }
  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& gaps() const { return gaps_; }
  double best_mean() const { return mu_star_; }
  ArmId best_arm() const { return best_arm_; }
  ClusterId best_cluster() const { return owner_[best_arm_]; }
  double min_gap() const { return gap_min_; }
  double max_gap() const { return gap_max_; }

  friend BanditInstance build_instance(InstanceSpec spec);

 private:
  std::vector<Cluster> clusters_;
  std::vector<ClusterId> owner_;
  std::vector<std::size_t> local_;
  std::vector<double> means_;
  std::vector<double> gaps_;
  double mu_star_ = 0.0;
  ArmId best_arm_ = 0;
  double gap_min_ = 0.0;
  double gap_max_ = 0.0;
};

inline BanditInstance build_instance(InstanceSpec spec) {
  const std::size_t m = spec.arms.size();
  if (m == 0) throw ConfigError("instance has no arms");
  if (spec.clusters.empty()) throw ConfigError("instance has no clusters");

  constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();
  BanditInstance inst;
  inst.owner_.assign(m, kUnassigned);
  inst.local_.assign(m, 0);

  for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
    auto& cs = spec.clusters[c];
    if (cs.arm_ids.empty()) throw ConfigError("cluster " + std::to_string(c) + " has no arms");
    if (!cs.space.contains(cs.theta_star))
      throw ConfigError("cluster " + std::to_string(c) + " theta_star is outside its space");
    Cluster cl;
    cl.id = c;
    cl.theta_star = cs.theta_star;
    cl.space = cs.space;
    for (ArmId id : cs.arm_ids) {
      if (id >= m) throw ConfigError("cluster " + std::to_string(c) + " names arm " + std::to_string(id + 1) +
                                     " but the instance has " + std::to_string(m) + " arms");
      if (inst.owner_[id] != kUnassigned) throw ConfigError("arm " + std::to_string(id + 1) + " appears in two clusters");
      spec.arms[id].validate(cs.space);
      inst.owner_[id] = c;
      inst.local_[id] = cl.arm_ids.size();
      cl.arm_ids.push_back(id);
      cl.arms.push_back(spec.arms[id]);
    }
    inst.clusters_.push_back(std::move(cl));
  }
  for (ArmId i = 0; i < m; ++i)
    if (inst.owner_[i] == kUnassigned) throw ConfigError("arm " + std::to_string(i + 1) + " belongs to no cluster");

  inst.means_.resize(m);
  for (ArmId i = 0; i < m; ++i) inst.means_[i] = inst.arm(i).mean(inst.cluster_of(i).theta_star);
  inst.best_arm_ = static_cast<ArmId>(std::max_element(inst.means_.begin(), inst.means_.end()) - inst.means_.begin());
  inst.mu_star_ = inst.means_[inst.best_arm_];
  inst.gaps_.resize(m);
  inst.gap_min_ = std::numeric_limits<double>::infinity();
  for (ArmId i = 0; i < m; ++i) {
    inst.gaps_[i] = inst.mu_star_ - inst.means_[i];
    if (inst.gaps_[i] > 0.0) inst.gap_min_ = std::min(inst.gap_min_, inst.gaps_[i]);
    inst.gap_max_ = std::max(inst.gap_max_, inst.gaps_[i]);
  }
  if (!std::isfinite(inst.gap_min_)) throw ConfigError("all arms have the same mean; the minimum gap is undefined");
  return inst;
}

// ---------------------------------------------------------------------------
// Structural constants

struct CertifyOptions {
  /// Grid pairs whose denominator KL is below this are skipped.
  double kl_floor = 1e-15;
  /// Certified lb entries below this count as violations.
  double min_lb = 1e-6;
};

struct LbViolation {
  ArmId j = 0;
  ArmId i = 0;
  double value = 0.0;
};

/// Certified constants of one cluster. Matrices are indexed by local arm
/// position: lb[j][i] is the largest c with KL_j >= c * KL_i on the grid.
struct ClusterConstants {
  ClusterId cluster = 0;
  std::vector<std::vector<double>> lb;
  std::vector<double> B;
  std::vector<double> Sigma;
  std::vector<double> Gamma;
  std::vector<LbViolation> violations;
  std::size_t grid_points = 0;

  double max_lb() const {
    double v = 0.0;
    for (const auto& row : lb)
      for (double x : row) v = std::max(v, x);
    return v;
  }
  double max_B() const { return B.empty() ? 1.0 : *std::max_element(B.begin(), B.end()); }
  bool satisfied() const { return violations.empty(); }
};

struct StructuralConstants {
  std::vector<ClusterConstants> clusters;

  bool satisfied() const {
    return std::all_of(clusters.begin(), clusters.end(), [](const auto& c) { return c.satisfied(); });
  }
  double max_B() const {
    double v = 1.0;
    for (const auto& c : clusters) v = std::max(v, c.max_B());
    return v;
  }
  double Sigma(const BanditInstance& inst, ArmId i) const {
    return clusters.at(inst.cluster_id_of(i)).Sigma.at(inst.local_index(i));
  }
  double Gamma(const BanditInstance& inst, ArmId i) const {
    return clusters.at(inst.cluster_id_of(i)).Gamma.at(inst.local_index(i));
  }
};

namespace detail {

inline void require_certifiable_grid(const ParameterSpace& space) {
  for (std::size_t k = 0; k < space.dim(); ++k)
    if (space.points_per_axis(k) < 3)
      throw ConfigError("grid too coarse for certification: axis " + std::to_string(k) + " has " +
                        std::to_string(space.points_per_axis(k)) + " points, need at least 3");
}

/// Visits every ordered pair of distinct grid points (theta1 outer).
template <typename Fn>
void for_each_grid_pair(const std::vector<Theta>& grid, Fn&& fn) {
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t b = 0; b < grid.size(); ++b)
      if (a != b) fn(grid[a], grid[b]);
}

}  // namespace detail

/// Grid sweep for lb_(j,i), Sigma_i, Gamma_i and B_i of every arm of a cluster.
inline ClusterConstants certify_cluster(const BanditInstance& inst, ClusterId c, const CertifyOptions& opt = {}) {
  const Cluster& cl = inst.cluster(c);
  detail::require_certifiable_grid(cl.space);
  const std::size_t n = cl.size();
  const auto grid = cl.space.grid();
  constexpr double inf = std::numeric_limits<double>::infinity();

  ClusterConstants out;
  out.cluster = c;
  out.grid_points = grid.size();
  out.lb.assign(n, std::vector<double>(n, inf));
  out.B.assign(n, 1.0);

  std::vector<double> fwd(n), bwd(n);
  detail::for_each_grid_pair(grid, [&](const Theta& t1, const Theta& t2) {
    for (std::size_t k = 0; k < n; ++k) {
      fwd[k] = cl.arms[k].kl(t1, t2);
      bwd[k] = cl.arms[k].kl(t2, t1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (fwd[i] < opt.kl_floor) continue;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) out.lb[j][i] = std::min(out.lb[j][i], fwd[j] / fwd[i]);
      if (bwd[i] >= opt.kl_floor) out.B[i] = std::max(out.B[i], fwd[i] / bwd[i]);
    }
  });

  out.Sigma.assign(n, inf);
  out.Gamma.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    out.lb[i][i] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      out.Sigma[i] = std::min(out.Sigma[i], out.lb[j][i]);
      out.Gamma[i] = std::max(out.Gamma[i], out.lb[j][i]);
      if (!(out.lb[j][i] >= opt.min_lb)) out.violations.push_back({cl.arm_ids[j], cl.arm_ids[i], out.lb[j][i]});
    }
  }
  return out;
}

/// Same sweep as certify_cluster; callers that only need lb/Sigma/Gamma read those fields.
inline ClusterConstants certify_lb_constants(const BanditInstance& inst, ClusterId c, const CertifyOptions& opt = {}) {
  return certify_cluster(inst, c, opt);
}

/// Grid supremum of KL_i(a||b) / KL_i(b||a) over distinct pairs.
inline double certify_B_constant(const BanditInstance& inst, ArmId i, const CertifyOptions& opt = {}) {
  const Cluster& cl = inst.cluster_of(i);
  detail::require_certifiable_grid(cl.space);
  const ArmModel& model = inst.arm(i);
  double b = 1.0;
  detail::for_each_grid_pair(cl.space.grid(), [&](const Theta& t1, const Theta& t2) {
    const double f = model.kl(t1, t2);
    const double r = model.kl(t2, t1);
    if (f >= opt.kl_floor && r >= opt.kl_floor) b = std::max(b, f / r);
  });
  return b;
}

inline StructuralConstants certify_instance(const BanditInstance& inst, const CertifyOptions& opt = {}) {
  StructuralConstants s;
  for (ClusterId c = 0; c < inst.num_clusters(); ++c) s.clusters.push_back(certify_cluster(inst, c, opt));
  return s;
}

/// Throws AssumptionViolation when any certified lb entry is below the threshold.
inline void require_certified(const StructuralConstants& s) {
  for (const auto& c : s.clusters)
    for (const auto& v : c.violations)
      throw AssumptionViolation("cluster " + std::to_string(c.cluster + 1) + ": lb(" + std::to_string(v.j + 1) + "," +
                                std::to_string(v.i + 1) + ") = " + std::to_string(v.value) +
                                " is not bounded away from zero");
}

/// Closed-form lb constants for a cluster of finite-support arms obtained
/// through Pinsker's inequality. `lower` bounds lb for the mixed arm against
/// the base arm, `upper` the reverse direction.
struct PinskerConstants {
  double lower = 0.0;
  double upper = 0.0;
};

inline PinskerConstants example2_pinsker_bounds(const BanditInstance& inst, ClusterId c) {
  const Cluster& cl = inst.cluster(c);
  double min_a2 = std::numeric_limits<double>::infinity();
  double max_a2 = 0.0;
  for (const auto& arm : cl.arms) {
    const auto* f = arm.as<FiniteSupportLinear>();
    if (f == nullptr)
      throw TypeError("cluster " + std::to_string(c + 1) + " contains a " + to_string(arm.family()) +
                      " arm; Pinsker constants need finite_support_linear arms");
    if (f->identity_mixing()) {
      // A declared identity contributes unit entries only.
      min_a2 = std::min(min_a2, 1.0);
      max_a2 = std::max(max_a2, 1.0);
      continue;
    }
    for (const auto& row : f->mixing)
      for (double a : row) {
        min_a2 = std::min(min_a2, a * a);
        max_a2 = std::max(max_a2, a * a);
      }
  }
  if (!(min_a2 > 0.0)) throw ConfigError("mixing matrix has a zero entry; the bound needs min A^2 > 0");
  const double floor = cl.space.floor();
  return {min_a2 * floor / 2.0, floor / max_a2};
}

}  // namespace depbandits
