#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "depbandits/errors.hpp"
#include "depbandits/parameter_space.hpp"
#include "depbandits/rng.hpp"

namespace depbandits {

enum class Family { gaussian_scaled, bernoulli_link, finite_support_linear };
enum class BernoulliLinkKind { identity, mirror };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::gaussian_scaled: return "gaussian_scaled";
    case Family::bernoulli_link: return "bernoulli_link";
    case Family::finite_support_linear: return "finite_support_linear";
  }
  return "?";
}

inline const char* to_string(BernoulliLinkKind k) { return k == BernoulliLinkKind::identity ? "identity" : "mirror"; }

/// Gaussian reward with mean scale * theta and standard deviation noise.
struct GaussianScaled {
  double scale = 1.0;
  double noise = 1.0;
};

/// Bernoulli reward with success probability theta (identity) or 1 - theta (mirror).
struct BernoulliLink {
  BernoulliLinkKind link = BernoulliLinkKind::identity;
};

/// Reward on a finite support s_1..s_N. The outcome probabilities are
/// (A theta, 1 - sum(A theta)) where theta holds the first N-1 probabilities;
/// an empty mixing matrix means A = I.
struct FiniteSupportLinear {
  std::vector<double> support;
  std::vector<std::vector<double>> mixing;

  bool identity_mixing() const { return mixing.empty(); }
};

/// Sub-Gaussianity parameter of the centered reward.
struct SubGaussianCert {
  double sigma = 0.0;
};

/// Sufficient statistics of the rewards observed from one arm.
/// `outcomes` is kept only for discrete families: sorted (value, count) pairs.
struct ArmStats {
  std::uint64_t n = 0;
  double sum = 0.0;
  double sumsq = 0.0;
  std::vector<std::pair<double, std::uint64_t>> outcomes;

  void add(double reward, bool discrete) {
    ++n;
    sum += reward;
    sumsq += reward * reward;
    if (!discrete) return;
    auto it = std::lower_bound(outcomes.begin(), outcomes.end(), reward,
                               [](const auto& p, double v) { return p.first < v; });
    if (it != outcomes.end() && it->first == reward)
      ++it->second;
    else
      outcomes.insert(it, {reward, 1});
  }
};

/// A parametric reward family for one arm.
///
/// Member functions are unchecked with respect to the parameter space; the
/// free functions further below validate membership first. A model is
/// immutable after construction.
class ArmModel {
 public:
  static constexpr std::size_t kMaxOutcomes = 16;

  static ArmModel gaussian(double scale, double noise = 1.0) {
    if (!std::isfinite(scale)) throw ConfigError("gaussian_scaled scale must be finite");
    if (!(noise > 0.0) || !std::isfinite(noise)) throw ConfigError("gaussian_scaled noise must be positive");
    return ArmModel(GaussianScaled{scale, noise});
  }

  static ArmModel bernoulli(BernoulliLinkKind link) { return ArmModel(BernoulliLink{link}); }

  static ArmModel finite_support(std::vector<double> support, std::vector<std::vector<double>> mixing = {}) {
    const std::size_t n = support.size();
    if (n < 2 || n > kMaxOutcomes)
      throw ConfigError("finite_support_linear needs between 2 and " + std::to_string(kMaxOutcomes) + " outcomes");
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(support[k])) throw ConfigError("finite_support_linear support values must be finite");
      for (std::size_t j = 0; j < k; ++j)
        if (support[j] == support[k]) throw ConfigError("finite_support_linear support values must be distinct");
    }
    if (!mixing.empty()) {
      if (mixing.size() != n - 1) throw ConfigError("mixing matrix must have N-1 rows");
      for (const auto& row : mixing) {
        if (row.size() != n - 1) throw ConfigError("mixing matrix must have N-1 columns");
        for (double a : row)
          if (!std::isfinite(a)) throw ConfigError("mixing matrix entries must be finite");
      }
    }
    return ArmModel(FiniteSupportLinear{std::move(support), std::move(mixing)});
  }

  Family family() const { return static_cast<Family>(impl_.index()); }

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&impl_);
  }

  /// Dimension of the parameter this model reads.
  std::size_t dim() const {
    if (auto* f = as<FiniteSupportLinear>()) return f->support.size() - 1;
    return 1;
  }

  bool discrete() const { return family() != Family::gaussian_scaled; }

  /// Scalar parameter and a mean that is monotone in it.
  bool scalar_monotone() const { return family() != Family::finite_support_linear; }

  double mean(ThetaView theta) const {
    switch (family()) {
      case Family::gaussian_scaled: return as<GaussianScaled>()->scale * theta[0];
      case Family::bernoulli_link: return success_probability(theta[0]);
      case Family::finite_support_linear: {
        const auto& f = *as<FiniteSupportLinear>();
        std::array<double, kMaxOutcomes> p{};
        probabilities(theta, p);
        double m = 0.0;
        for (std::size_t k = 0; k < f.support.size(); ++k) m += f.support[k] * p[k];
        return m;
      }
    }
    return 0.0;
  }

  double kl(ThetaView a, ThetaView b) const {
    switch (family()) {
      case Family::gaussian_scaled: {
        const auto& g = *as<GaussianScaled>();
        const double d = g.scale * (a[0] - b[0]);
        return d * d / (2.0 * g.noise * g.noise);
      }
      case Family::bernoulli_link:
        return bernoulli_kl(success_probability(a[0]), success_probability(b[0]));
      case Family::finite_support_linear: {
        const std::size_t n = as<FiniteSupportLinear>()->support.size();
        std::array<double, kMaxOutcomes> p{}, q{};
        probabilities(a, p);
        probabilities(b, q);
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k)
          if (p[k] > 0.0) acc += p[k] * std::log(p[k] / q[k]);
        return std::max(acc, 0.0);
      }
    }
    return 0.0;
  }

  /// Log density (Gaussian) or log mass (discrete families) of `reward`.
  double log_density(double reward, ThetaView theta) const {
    switch (family()) {
      case Family::gaussian_scaled: {
        const auto& g = *as<GaussianScaled>();
        const double z = (reward - g.scale * theta[0]) / g.noise;
        return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(g.noise) - 0.5 * z * z;
      }
      case Family::bernoulli_link: {
        const double p = success_probability(theta[0]);
        if (reward == 1.0) return std::log(p);
        if (reward == 0.0) return std::log1p(-p);
        throw DataError("bernoulli_link reward " + std::to_string(reward) + " is not in {0, 1}");
      }
      case Family::finite_support_linear: {
        const std::size_t k = support_index(reward);
        std::array<double, kMaxOutcomes> p{};
        probabilities(theta, p);
        return std::log(p[k]);
      }
    }
    return 0.0;
  }

  /// Sum of log_density over the rewards summarised by `stats`.
  double log_likelihood(const ArmStats& stats, ThetaView theta) const {
    if (stats.n == 0) return 0.0;
    switch (family()) {
      case Family::gaussian_scaled: {
        const auto& g = *as<GaussianScaled>();
        const double m = g.scale * theta[0];
        const double n = static_cast<double>(stats.n);
        const double rss = stats.sumsq - 2.0 * m * stats.sum + n * m * m;
        return -n * (0.5 * std::log(2.0 * std::numbers::pi) + std::log(g.noise)) - rss / (2.0 * g.noise * g.noise);
      }
      case Family::bernoulli_link: {
        const double p = success_probability(theta[0]);
        const double s = stats.sum;
        const double f = static_cast<double>(stats.n) - s;
        return (s > 0.0 ? s * std::log(p) : 0.0) + (f > 0.0 ? f * std::log1p(-p) : 0.0);
      }
      case Family::finite_support_linear: {
        std::array<double, kMaxOutcomes> p{};
        probabilities(theta, p);
        double acc = 0.0;
        for (const auto& [value, count] : stats.outcomes) acc += static_cast<double>(count) * std::log(p[support_index(value)]);
        return acc;
      }
    }
    return 0.0;
  }

  double sample(ThetaView theta, CounterRng& rng) const {
    switch (family()) {
      case Family::gaussian_scaled: {
        const auto& g = *as<GaussianScaled>();
        return g.scale * theta[0] + g.noise * rng.normal();
      }
      case Family::bernoulli_link:
        return rng.bernoulli(success_probability(theta[0])) ? 1.0 : 0.0;
      case Family::finite_support_linear: {
        const auto& f = *as<FiniteSupportLinear>();
        std::array<double, kMaxOutcomes> p{};
        probabilities(theta, p);
        double u = rng.uniform();
        for (std::size_t k = 0; k + 1 < f.support.size(); ++k) {
          if (u < p[k]) return f.support[k];
          u -= p[k];
        }
        return f.support.back();
      }
    }
    return 0.0;
  }

  SubGaussianCert sub_gaussian() const {
    switch (family()) {
      case Family::gaussian_scaled: return {as<GaussianScaled>()->noise};
      case Family::bernoulli_link: return {0.5};
      case Family::finite_support_linear: {
        const auto& s = as<FiniteSupportLinear>()->support;
        auto [lo, hi] = std::minmax_element(s.begin(), s.end());
        return {(*hi - *lo) / 2.0};
      }
    }
    return {};
  }

  /// Outcome probabilities of a finite-support model, written to out[0..N).
  void probabilities(ThetaView theta, std::span<double> out) const {
    const auto& f = *as<FiniteSupportLinear>();
    const std::size_t d = f.support.size() - 1;
    double total = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      double v = theta[r];
      if (!f.identity_mixing()) {
        v = 0.0;
        for (std::size_t c = 0; c < d; ++c) v += f.mixing[r][c] * theta[c];
      }
      out[r] = v;
      total += v;
    }
    out[d] = 1.0 - total;
  }

  /// Checks that this model is well defined on every member of `space`.
  void validate(const ParameterSpace& space) const {
    if (space.dim() != dim())
      throw ConfigError(std::string(to_string(family())) + " model needs a " + std::to_string(dim()) +
                        "-dimensional space, got " + std::to_string(space.dim()));
    switch (family()) {
      case Family::gaussian_scaled:
        return;
      case Family::bernoulli_link:
        for (double t : {space.lower(0), space.upper(0)}) {
          const double p = success_probability(t);
          if (!(p > 0.0 && p < 1.0))
            throw ConfigError("bernoulli_link mean leaves (0, 1) at theta = " + std::to_string(t));
        }
        return;
      case Family::finite_support_linear: {
        if (space.kind() != SpaceKind::simplex_interior)
          throw ConfigError("finite_support_linear requires a simplex_interior space");
        // Outcome probabilities are affine in theta, so extremes sit at the
        // vertices of the floored simplex.
        const std::size_t d = dim();
        const double eps = space.floor();
        std::vector<Theta> vertices(1, Theta(d, eps));
        for (std::size_t k = 0; k < d; ++k) {
          Theta v(d, eps);
          v[k] = 1.0 - static_cast<double>(d) * eps;
          vertices.push_back(std::move(v));
        }
        std::array<double, kMaxOutcomes> p{};
        for (const auto& v : vertices) {
          probabilities(v, p);
          for (std::size_t k = 0; k <= d; ++k)
            if (p[k] < eps - 1e-12 || p[k] > 1.0 + 1e-12)
              throw ConfigError("finite_support_linear outcome " + std::to_string(k) + " has probability " +
                                std::to_string(p[k]) + " outside [floor, 1] on the space");
        }
        return;
      }
    }
  }

  std::size_t support_index(double reward) const {
    const auto& s = as<FiniteSupportLinear>()->support;
    for (std::size_t k = 0; k < s.size(); ++k)
      if (s[k] == reward) return k;
    throw DataError("reward " + std::to_string(reward) + " is not a support point");
  }

  double success_probability(double theta) const {
    return as<BernoulliLink>()->link == BernoulliLinkKind::identity ? theta : 1.0 - theta;
  }

  static double bernoulli_kl(double p, double q) {
    double acc = 0.0;
    if (p > 0.0) acc += p * std::log(p / q);
    if (p < 1.0) acc += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    return std::max(acc, 0.0);
  }

 private:
  using Impl = std::variant<GaussianScaled, BernoulliLink, FiniteSupportLinear>;
  explicit ArmModel(Impl impl) : impl_(std::move(impl)) {}

  Impl impl_;
};

// Checked entry points: every parameter must belong to `space`.

inline double mean_reward(const ArmModel& model, const ParameterSpace& space, ThetaView theta) {
  space.require(theta);
  return model.mean(theta);
}

inline double kl_divergence(const ArmModel& model, const ParameterSpace& space, ThetaView a, ThetaView b) {
  space.require(a);
  space.require(b);
  return model.kl(a, b);
}

inline double log_density(const ArmModel& model, const ParameterSpace& space, double reward, ThetaView theta) {
  space.require(theta);
  return model.log_density(reward, theta);
}

inline double sample(const ArmModel& model, const ParameterSpace& space, ThetaView theta, CounterRng& rng) {
  space.require(theta);
  return model.sample(theta, rng);
}

}  // namespace depbandits
