#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "depbandits/diagnostics.hpp"
#include "depbandits/estimation.hpp"
#include "depbandits/instance.hpp"

namespace depbandits {

/// Returned by infima over empty feasible sets.
inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// `automatic` uses the Gaussian closed forms where they exist, the grid otherwise.
enum class BoundMethod { automatic, grid, analytic };

namespace detail {

inline double feasibility_slack(double x) { return 1e-12 * std::max(1.0, std::abs(x)); }

inline bool gaussian_cluster(const Cluster& cl) { return all_family(cl, Family::gaussian_scaled); }

inline bool use_analytic(BoundMethod m, bool available) {
  if (m == BoundMethod::analytic && !available) throw TypeError("no closed form for this family");
  return m == BoundMethod::analytic || (m == BoundMethod::automatic && available);
}

struct GridMeans {
  std::vector<Theta> points;
  std::vector<double> means;
};

inline GridMeans grid_means(const Cluster& cl, const ArmModel& arm) {
  GridMeans g{cl.space.grid(), {}};
  g.means.reserve(g.points.size());
  for (const auto& p : g.points) g.means.push_back(arm.mean(p));
  return g;
}

}  // namespace detail

/// sup |mu_i(a) - mu_i(b)| over pairs with KL_i(a || b) <= x.
inline double psi_bar(const BanditInstance& inst, ArmId i, double x, BoundMethod method = BoundMethod::automatic) {
  if (!(x >= 0.0)) throw DomainError("psi_bar needs x >= 0");
  const Cluster& cl = inst.cluster_of(i);
  const ArmModel& arm = inst.arm(i);
  if (detail::use_analytic(method, arm.family() == Family::gaussian_scaled)) {
    const auto& g = *arm.as<GaussianScaled>();
    return std::min(g.noise * std::sqrt(2.0 * x), std::abs(g.scale) * cl.space.diameter());
  }
  const auto g = detail::grid_means(cl, arm);
  double best = 0.0;
  for (std::size_t a = 0; a < g.points.size(); ++a)
    for (std::size_t b = 0; b < g.points.size(); ++b) {
      const double dm = std::abs(g.means[a] - g.means[b]);
      if (dm > best && arm.kl(g.points[a], g.points[b]) <= x) best = dm;
    }
  return best;
}

/// inf KL_i(a || b) over pairs with |mu_i(a) - mu_i(b)| >= x; kInfeasible if no pair qualifies.
inline double psi_inv(const BanditInstance& inst, ArmId i, double x, BoundMethod method = BoundMethod::automatic) {
  if (!(x >= 0.0)) throw DomainError("psi_inv needs x >= 0");
  if (x == 0.0) return 0.0;
  const Cluster& cl = inst.cluster_of(i);
  const ArmModel& arm = inst.arm(i);
  double best = kInfeasible;
  if (detail::use_analytic(method, arm.family() == Family::gaussian_scaled)) {
    const auto& g = *arm.as<GaussianScaled>();
    if (x <= std::abs(g.scale) * cl.space.diameter()) best = x * x / (2.0 * g.noise * g.noise);
  } else {
    const auto g = detail::grid_means(cl, arm);
    const double need = x - detail::feasibility_slack(x);
    for (std::size_t a = 0; a < g.points.size(); ++a)
      for (std::size_t b = 0; b < g.points.size(); ++b)
        if (std::abs(g.means[a] - g.means[b]) >= need) best = std::min(best, arm.kl(g.points[a], g.points[b]));
  }
  if (best == kInfeasible)
    emit_diagnostic(DiagnosticKind::infeasible_sentinel,
                    "arm " + std::to_string(i + 1) + ": no parameter pair attains a mean gap of " + std::to_string(x));
  return best;
}

/// inf over theta' with mu_i(theta') >= target of max_{j in C_i} KL_j(theta*_C || theta').
inline double phi(const BanditInstance& inst, ArmId i, double target, BoundMethod method = BoundMethod::automatic) {
  const Cluster& cl = inst.cluster_of(i);
  const ArmModel& arm = inst.arm(i);
  const double star = cl.theta_star.at(0);
  auto cost = [&](ThetaView t) {
    double worst = 0.0;
    for (const auto& m : cl.arms) worst = std::max(worst, m.kl(cl.theta_star, t));
    return worst;
  };
  double best = kInfeasible;
  if (detail::use_analytic(method, detail::gaussian_cluster(cl))) {
    // The feasible set is a half-line; the cost grows with |theta' - theta*|.
    const double scale = arm.as<GaussianScaled>()->scale;
    const double lo = cl.space.lower(0), hi = cl.space.upper(0);
    std::optional<double> nearest;
    if (scale > 0.0) {
      const double t = std::max(star, target / scale);
      if (t <= hi) nearest = t;
    } else if (scale < 0.0) {
      const double t = std::min(star, target / scale);
      if (t >= lo) nearest = t;
    } else if (0.0 >= target) {
      nearest = star;
    }
    if (nearest) best = cost(std::span<const double>(&*nearest, 1));
  } else {
    const double need = target - detail::feasibility_slack(target);
    for (const auto& p : cl.space.grid())
      if (arm.mean(p) >= need) best = std::min(best, cost(p));
  }
  if (best == kInfeasible)
    emit_diagnostic(DiagnosticKind::infeasible_sentinel,
                    "arm " + std::to_string(i + 1) + ": no parameter reaches mean " + std::to_string(target));
  return best;
}

/// Membership mask of {x : KL_i(theta || x) <= r}, aligned with the cluster space's grid().
inline std::vector<char> kl_ball(const BanditInstance& inst, ArmId i, ThetaView theta, double r) {
  if (!(r >= 0.0)) throw DomainError("kl_ball radius must be non-negative");
  const Cluster& cl = inst.cluster_of(i);
  cl.space.require(theta);
  const ArmModel& arm = inst.arm(i);
  std::vector<char> mask;
  for (const auto& p : cl.space.grid()) mask.push_back(arm.kl(theta, p) <= r ? 1 : 0);
  return mask;
}

/// d(s, t) = sqrt(kappa log t / s).
inline double confidence_width(double kappa, std::uint64_t s, std::uint64_t t) { return confidence_radius(kappa, t, s); }

// ---------------------------------------------------------------------------
// Reports

struct ArmBound {
  ArmId arm = 0;
  ClusterId cluster = 0;
  double gap = 0.0;
  double psi_inv_half_gap = 0.0;  // psi_inv(gap / 2)
  double phi = 0.0;               // phi(theta*_C, mu*)
  double Sigma = 0.0;
  double Gamma = 0.0;
};

struct ClusterBound {
  ClusterId cluster = 0;
  bool optimal = false;
  double min_gap = 0.0;
  double max_gap = 0.0;
  double max_inv_phi = 0.0;
  double lower_term = 0.0;
  bool lower_available = true;
  double play_count_coefficient = 0.0;  // bound on E[sum_{j != i*} N_j(T)] / log T
  double upper_term = 0.0;
  bool upper_available = true;
  double grid_step = 0.0;
};

struct BoundReport {
  std::vector<ArmBound> arms;
  std::vector<ClusterBound> clusters;
  double lower_coefficient = 0.0;  // of log T
  double upper_coefficient = 0.0;  // of log T
  std::size_t suboptimal_clusters = 0;
  double kappa = 0.0;
  bool partial = false;

  /// True when lower <= upper, the ordering every valid instance should show.
  bool ordered() const { return lower_coefficient <= upper_coefficient; }
};

/// Per-arm quantities shared by both bounds.
inline BoundReport start_report(const BanditInstance& inst, const StructuralConstants& constants,
                                BoundMethod method = BoundMethod::automatic) {
  BoundReport r;
  for (ArmId i = 0; i < inst.num_arms(); ++i) {
    ArmBound a;
    a.arm = i;
    a.cluster = inst.cluster_id_of(i);
    a.gap = inst.gap(i);
    a.psi_inv_half_gap = psi_inv(inst, i, a.gap / 2.0, method);
    a.phi = phi(inst, i, inst.best_mean(), method);
    a.Sigma = constants.Sigma(inst, i);
    a.Gamma = constants.Gamma(inst, i);
    r.arms.push_back(a);
  }
  for (const auto& cl : inst.clusters()) {
    ClusterBound c;
    c.cluster = cl.id;
    c.optimal = cl.id == inst.best_cluster();
    c.min_gap = kInfeasible;
    for (ArmId i : cl.arm_ids) {
      c.min_gap = std::min(c.min_gap, inst.gap(i));
      c.max_gap = std::max(c.max_gap, inst.gap(i));
    }
    c.grid_step = cl.space.grid_step(0);
    r.clusters.push_back(c);
  }
  return r;
}

/// Coefficient of log T in the regret lower bound for uniformly good policies:
/// sum over non-optimal clusters of (min gap) * max_i 1 / phi_i.
inline double lower_bound(const BanditInstance& inst, BoundReport& r) {
  r.lower_coefficient = 0.0;
  r.suboptimal_clusters = 0;
  for (auto& c : r.clusters) {
    if (c.optimal) {
      c.lower_term = 0.0;
      continue;
    }
    ++r.suboptimal_clusters;
    c.max_inv_phi = 0.0;
    bool any = false;
    for (ArmId i : inst.cluster(c.cluster).arm_ids) {
      const double p = r.arms[i].phi;
      if (p == kInfeasible) continue;
      any = true;
      c.max_inv_phi = std::max(c.max_inv_phi, p > 0.0 ? 1.0 / p : kInfeasible);
    }
    c.lower_available = any;
    if (!any) {
      r.partial = true;
      c.lower_term = 0.0;
      continue;
    }
    c.lower_term = c.min_gap > 0.0 ? c.min_gap * c.max_inv_phi : 0.0;
    r.lower_coefficient += c.lower_term;
  }
  return r.lower_coefficient;
}

/// Coefficient of log T in the UCB-D regret upper bound, filling the
/// per-cluster play-count coefficients as a side effect.
inline double upper_bound(const BanditInstance& inst, double kappa, BoundReport& r) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  r.kappa = kappa;
  r.upper_coefficient = 0.0;
  for (auto& c : r.clusters) {
    c.play_count_coefficient = 0.0;
    c.upper_available = true;
    for (ArmId j : inst.cluster(c.cluster).arm_ids) {
      if (j == inst.best_arm() || !(r.arms[j].gap > 0.0)) continue;
      const double denom = r.arms[j].Sigma * r.arms[j].psi_inv_half_gap;
      if (!std::isfinite(denom) || !(denom > 0.0)) {
        c.upper_available = false;
        continue;
      }
      c.play_count_coefficient = std::max(c.play_count_coefficient, kappa / (denom * denom));
    }
    if (!c.upper_available) {
      r.partial = true;
      c.upper_term = 0.0;
      continue;
    }
    c.upper_term = c.max_gap * c.play_count_coefficient;
    r.upper_coefficient += c.upper_term;
  }
  return r.upper_coefficient;
}

inline BoundReport bound_report(const BanditInstance& inst, const StructuralConstants& constants, double kappa,
                                BoundMethod method = BoundMethod::automatic) {
  BoundReport r = start_report(inst, constants, method);
  lower_bound(inst, r);
  upper_bound(inst, kappa, r);
  return r;
}

/// Largest N_C(t) at which a suboptimal arm may still be played while every
/// ball holds the truth: kappa log t / (Sigma_i psi_inv_i(gap_i / 2))^2.
inline double play_count_threshold(const ArmBound& a, double kappa, std::uint64_t t) {
  const double denom = a.Sigma * a.psi_inv_half_gap;
  return kappa * std::log(static_cast<double>(t)) / (denom * denom);
}

}  // namespace depbandits
