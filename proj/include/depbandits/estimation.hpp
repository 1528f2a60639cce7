#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "depbandits/diagnostics.hpp"
#include "depbandits/errors.hpp"
#include "depbandits/instance.hpp"

namespace depbandits {

/// Observations of one cluster: per-arm reward logs and sufficient statistics.
///
/// Holds a pointer to its cluster; the owning instance must outlive it.
class ClusterHistory {
 public:
  explicit ClusterHistory(const Cluster& cluster)
      : cluster_(&cluster), rewards_(cluster.size()), stats_(cluster.size()) {}

  const Cluster& cluster() const { return *cluster_; }
  std::size_t size() const { return rewards_.size(); }

  /// Appends a reward for the arm at local position `local`.
  void record(std::size_t local, double reward) {
    if (local >= size()) throw ProtocolError("arm position " + std::to_string(local) + " is not in the cluster");
    const ArmModel& model = cluster_->arms[local];
    if (model.discrete()) {
      if (model.family() == Family::bernoulli_link && reward != 0.0 && reward != 1.0)
        throw DataError("bernoulli_link reward " + std::to_string(reward) + " is not in {0, 1}");
      if (model.family() == Family::finite_support_linear) (void)model.support_index(reward);
    }
    rewards_[local].push_back(reward);
    stats_[local].add(reward, model.discrete());
    ++total_;
    round_ = std::max(round_, total_);
  }

  /// Sets the global round counter t; t may not be below N_C.
  void set_round(std::uint64_t t) {
    if (t < total_) throw StateError("round " + std::to_string(t) + " is before the " + std::to_string(total_) +
                                     " recorded plays");
    round_ = t;
  }

  std::uint64_t round() const { return round_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t count(std::size_t local) const { return stats_.at(local).n; }
  const ArmStats& stats(std::size_t local) const { return stats_.at(local); }
  std::span<const double> rewards(std::size_t local) const { return rewards_.at(local); }

 private:
  const Cluster* cluster_;
  std::vector<std::vector<double>> rewards_;
  std::vector<ArmStats> stats_;
  std::uint64_t total_ = 0;
  std::uint64_t round_ = 0;
};

// ---------------------------------------------------------------------------
// Maximum likelihood

enum class SolveMethod { closed_form, grid, golden_section };

inline const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::closed_form: return "closed_form";
    case SolveMethod::grid: return "grid";
    case SolveMethod::golden_section: return "golden_section";
  }
  return "?";
}

struct ClusterEstimate {
  Theta theta_hat;
  /// Unnormalised pooled log-likelihood at theta_hat.
  double log_likelihood = 0.0;
  SolveMethod method = SolveMethod::closed_form;
  bool projected = false;
};

/// Pooled log-likelihood of every observation of the cluster at `theta`.
inline double cluster_log_likelihood(const ClusterHistory& h, ThetaView theta) {
  const Cluster& cl = h.cluster();
  double acc = 0.0;
  for (std::size_t k = 0; k < cl.size(); ++k) acc += cl.arms[k].log_likelihood(h.stats(k), theta);
  return acc;
}

namespace detail {

inline constexpr double kGoldenTolerance = 1e-6;

inline bool all_family(const Cluster& cl, Family f) {
  return std::all_of(cl.arms.begin(), cl.arms.end(), [f](const ArmModel& m) { return m.family() == f; });
}

/// Unconstrained stationary point for clusters with a closed form.
inline std::optional<double> closed_form_mle(const ClusterHistory& h) {
  const Cluster& cl = h.cluster();
  if (all_family(cl, Family::gaussian_scaled)) {
    // Weighted least squares in theta.
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < cl.size(); ++k) {
      const auto& g = *cl.arms[k].as<GaussianScaled>();
      const auto& s = h.stats(k);
      const double w = 1.0 / (g.noise * g.noise);
      num += w * g.scale * s.sum;
      den += w * g.scale * g.scale * static_cast<double>(s.n);
    }
    if (den > 0.0) return num / den;
    return std::nullopt;
  }
  if (all_family(cl, Family::bernoulli_link)) {
    // A mirror-arm failure is a success of the underlying theta-coin.
    double hits = 0.0;
    for (std::size_t k = 0; k < cl.size(); ++k) {
      const auto& s = h.stats(k);
      hits += cl.arms[k].as<BernoulliLink>()->link == BernoulliLinkKind::identity ? s.sum
                                                                                   : static_cast<double>(s.n) - s.sum;
    }
    return hits / static_cast<double>(h.total());
  }
  return std::nullopt;
}

/// Golden-section maximisation of a unimodal function on [a, b].
template <typename F>
double golden_section_max(F&& f, double a, double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

}  // namespace detail

/// Maximum likelihood estimate of the cluster parameter over its space.
///
/// Closed forms are used for all-Gaussian and all-Bernoulli clusters (the
/// log-likelihood is concave in theta there, so projecting the stationary
/// point onto the interval gives the constrained maximiser). Other scalar
/// clusters use a grid scan to bracket the best cell followed by
/// golden-section refinement; higher-dimensional spaces use the grid.
inline ClusterEstimate mle(const ClusterHistory& h) {
  if (h.total() == 0) throw StateError("cannot estimate a cluster with no observations");
  const Cluster& cl = h.cluster();
  const ParameterSpace& space = cl.space;
  ClusterEstimate est;

  if (auto raw = detail::closed_form_mle(h)) {
    const double v = std::clamp(*raw, space.lower(0), space.upper(0));
    est.theta_hat = {v};
    est.method = SolveMethod::closed_form;
    est.projected = v != *raw;
  } else if (space.dim() == 1) {
    const auto grid = space.scalar_grid();
    std::size_t best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double ll = cluster_log_likelihood(h, std::span<const double>(&grid[k], 1));
      if (ll > best_ll) {
        best_ll = ll;
        best = k;
      }
    }
    const double a = grid[best == 0 ? 0 : best - 1];
    const double b = grid[std::min(best + 1, grid.size() - 1)];
    auto f = [&](double t) { return cluster_log_likelihood(h, std::span<const double>(&t, 1)); };
    const double refined = detail::golden_section_max(f, a, b, detail::kGoldenTolerance);
    est.theta_hat = {f(refined) >= best_ll ? refined : grid[best]};
    est.method = SolveMethod::golden_section;
    est.projected = est.theta_hat[0] == space.lower(0) || est.theta_hat[0] == space.upper(0);
  } else {
    double best_ll = -std::numeric_limits<double>::infinity();
    for (const auto& point : space.grid()) {
      const double ll = cluster_log_likelihood(h, point);
      if (ll > best_ll) {
        best_ll = ll;
        est.theta_hat = point;
      }
    }
    est.method = SolveMethod::grid;
  }
  est.log_likelihood = cluster_log_likelihood(h, est.theta_hat);
  if (est.projected && diagnostics_enabled())
    emit_diagnostic(DiagnosticKind::projection_at_boundary,
                    "cluster " + std::to_string(cl.id + 1) + " estimate projected to the space boundary");
  return est;
}

// ---------------------------------------------------------------------------
// Confidence radius and kappa

/// sqrt(kappa * log(t) / plays).
inline double confidence_radius(double kappa, std::uint64_t t, std::uint64_t plays) {
  if (t < 2) throw StateError("confidence radius is undefined before round 2");
  if (plays == 0) throw StateError("confidence radius needs at least one play of the cluster");
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  return std::sqrt(kappa * std::log(static_cast<double>(t)) / static_cast<double>(plays));
}

inline double radius(const ClusterHistory& h, double kappa) { return confidence_radius(kappa, h.round(), h.total()); }

/// Smallest kappa admitted by the theoretical analysis:
/// max over clusters of 2 B^2 L_p^2 sigma^2 (|C| + m) max lb^2.
inline double kappa_floor(const BanditInstance& inst, const StructuralConstants& constants, double lipschitz,
                          double sigma, int m) {
  if (m <= 3) throw ConfigError("kappa floor needs an integer m greater than 3, got " + std::to_string(m));
  if (!(lipschitz > 0.0)) throw ConfigError("kappa floor needs L_p > 0");
  if (!(sigma > 0.0)) throw ConfigError("kappa floor needs sigma > 0");
  if (constants.clusters.size() != inst.num_clusters())
    throw ConfigError("structural constants do not match the instance");
  const double b = constants.max_B();
  double floor = 0.0;
  for (const auto& cc : constants.clusters) {
    const double lb = cc.max_lb();
    const double size = static_cast<double>(inst.cluster(cc.cluster).size());
    floor = std::max(floor, 2.0 * b * b * lipschitz * lipschitz * sigma * sigma * (size + m) * lb * lb);
  }
  return floor;
}

/// Practical default: 2 sigma^2 times the largest lb^2, sigma the largest sub-Gaussian parameter.
inline double default_kappa(const BanditInstance& inst, const StructuralConstants& constants) {
  double sigma = 0.0;
  for (ArmId i = 0; i < inst.num_arms(); ++i) sigma = std::max(sigma, inst.arm(i).sub_gaussian().sigma);
  double lb = 0.0;
  for (const auto& cc : constants.clusters) lb = std::max(lb, cc.max_lb());
  return 2.0 * sigma * sigma * lb * lb;
}

// ---------------------------------------------------------------------------
// Confidence ball

/// {theta : sum_i w_i KL_i(center || theta) <= radius} with w_i = N_i / N_C.
struct ConfidenceBall {
  Theta center;
  double radius = 0.0;
  std::vector<double> weights;
};

inline ConfidenceBall confidence_ball(const ClusterHistory& h, const ClusterEstimate& est, double kappa) {
  ConfidenceBall ball{est.theta_hat, radius(h, kappa), std::vector<double>(h.size())};
  const double total = static_cast<double>(h.total());
  for (std::size_t k = 0; k < h.size(); ++k) ball.weights[k] = static_cast<double>(h.count(k)) / total;
  return ball;
}

inline double weighted_kl(const ConfidenceBall& ball, const Cluster& cl, ThetaView theta) {
  double acc = 0.0;
  for (std::size_t k = 0; k < cl.size(); ++k)
    if (ball.weights[k] > 0.0) acc += ball.weights[k] * cl.arms[k].kl(ball.center, theta);
  return acc;
}

inline bool ball_contains(const ConfidenceBall& ball, const Cluster& cl, ThetaView theta) {
  return weighted_kl(ball, cl, theta) <= ball.radius;
}

struct BallInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// The ball as an interval of a scalar space, for clusters whose arms all
/// have monotone means (the weighted KL then grows away from the center).
/// Returns nullopt for clusters where that structure does not hold.
inline std::optional<BallInterval> ball_interval(const ConfidenceBall& ball, const Cluster& cl) {
  const ParameterSpace& space = cl.space;
  if (space.dim() != 1) return std::nullopt;
  if (!std::all_of(cl.arms.begin(), cl.arms.end(), [](const ArmModel& m) { return m.scalar_monotone(); }))
    return std::nullopt;
  const double c = ball.center[0];
  const double lo = space.lower(0), hi = space.upper(0);
  const double r = ball.radius;

  if (detail::all_family(cl, Family::gaussian_scaled)) {
    double curvature = 0.0;
    for (std::size_t k = 0; k < cl.size(); ++k) {
      const auto& g = *cl.arms[k].as<GaussianScaled>();
      curvature += ball.weights[k] * g.scale * g.scale / (2.0 * g.noise * g.noise);
    }
    if (curvature <= 0.0) return BallInterval{lo, hi};
    const double half = std::sqrt(r / curvature);
    return BallInterval{std::max(lo, c - half), std::min(hi, c + half)};
  }

  auto excess = [&](double t) { return weighted_kl(ball, cl, std::span<const double>(&t, 1)) - r; };
  auto boundary = [&](double inside, double outside) {
    if (excess(outside) <= 0.0) return outside;
    if (inside == outside) return inside;
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(excess, std::min(inside, outside), std::max(inside, outside),
                                                    boost::math::tools::eps_tolerance<double>(48), iters);
    // Keep the endpoint that is certainly a member.
    const double near = inside < outside ? a : b;
    const double far = inside < outside ? b : a;
    return excess(far) <= 0.0 ? far : near;
  };
  if (r <= 0.0) return BallInterval{c, c};
  return BallInterval{boundary(c, lo), boundary(c, hi)};
}

enum class SupMethod { automatic, grid };

/// sup of the arm's mean over the ball; never below the mean at the center.
inline double sup_mean_over_ball(const ConfidenceBall& ball, const Cluster& cl, std::size_t local,
                                 SupMethod method = SupMethod::automatic) {
  const ArmModel& arm = cl.arms.at(local);
  const double at_center = arm.mean(ball.center);
  if (method == SupMethod::automatic) {
    if (auto iv = ball_interval(ball, cl)) {
      const double a = iv->lower, b = iv->upper;
      return std::max({at_center, arm.mean(std::span<const double>(&a, 1)), arm.mean(std::span<const double>(&b, 1))});
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& point : cl.space.grid())
    if (ball_contains(ball, cl, point)) best = std::max(best, arm.mean(point));
  if (!std::isfinite(best)) {
    emit_diagnostic(DiagnosticKind::ball_empty_fallback,
                    "cluster " + std::to_string(cl.id + 1) + ": no grid point inside the confidence ball");
    return at_center;
  }
  return std::max(best, at_center);
}

}  // namespace depbandits
