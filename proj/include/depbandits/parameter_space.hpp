#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "depbandits/errors.hpp"

namespace depbandits {

/// A point of the parameter set. Scalar families use one coordinate.
using Theta = std::vector<double>;
using ThetaView = std::span<const double>;

enum class SpaceKind { interval, box, simplex_interior };

inline const char* to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::interval: return "interval";
    case SpaceKind::box: return "box";
    case SpaceKind::simplex_interior: return "simplex_interior";
  }
  return "?";
}

/// The set of allowable parameters, with the uniform grid used by every
/// grid-based evaluator (MLE fallback, ball suprema, certification, bounds).
///
/// For a simplex-interior space of dimension d the members are the first d
/// outcome probabilities of an (d+1)-outcome law; each coordinate and the
/// residual mass 1 - sum(theta) are bounded below by the floor.
class ParameterSpace {
 public:
  static constexpr double kDefaultScalarStep = 1e-3;
  static constexpr std::size_t kDefaultPointsPerAxis = 31;
  static constexpr double kDefaultSimplexFloor = 0.01;

  ParameterSpace() = default;

  /// Scalar interval [lower, upper] with grid spacing close to `step`.
  static ParameterSpace interval(double lower, double upper, double step = kDefaultScalarStep) {
    check_bounds(lower, upper, 0);
    if (!(step > 0.0) || !std::isfinite(step))
      throw ConfigError("interval grid step must be a positive finite number");
    ParameterSpace s;
    s.kind_ = SpaceKind::interval;
    s.lower_ = {lower};
    s.upper_ = {upper};
    s.points_ = {points_for_step(upper - lower, step)};
    return s;
  }

  static ParameterSpace box(std::vector<double> lower, std::vector<double> upper,
                            std::size_t points_per_axis = kDefaultPointsPerAxis) {
    if (lower.empty() || lower.size() != upper.size())
      throw ConfigError("box bounds must be non-empty and of equal length");
    for (std::size_t k = 0; k < lower.size(); ++k) check_bounds(lower[k], upper[k], k);
    if (points_per_axis < 2) throw ConfigError("box grid needs at least 2 points per axis");
    ParameterSpace s;
    s.kind_ = SpaceKind::box;
    s.points_.assign(lower.size(), points_per_axis);
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
  }

  /// Interior of the probability simplex of (dim + 1) outcomes.
  static ParameterSpace simplex_interior(std::size_t dim, double floor = kDefaultSimplexFloor,
                                         std::size_t points_per_axis = kDefaultPointsPerAxis) {
    if (dim == 0) throw ConfigError("simplex dimension must be positive");
    if (!(floor > 0.0) || static_cast<double>(dim + 1) * floor >= 1.0)
      throw ConfigError("simplex floor must be positive and leave room for " + std::to_string(dim + 1) +
                        " outcomes");
    if (points_per_axis < 2) throw ConfigError("simplex grid needs at least 2 points per axis");
    ParameterSpace s;
    s.kind_ = SpaceKind::simplex_interior;
    s.floor_ = floor;
    s.lower_.assign(dim, floor);
    s.upper_.assign(dim, 1.0 - static_cast<double>(dim) * floor);
    s.points_.assign(dim, points_per_axis);
    return s;
  }

  SpaceKind kind() const { return kind_; }
  std::size_t dim() const { return lower_.size(); }
  double lower(std::size_t k) const { return lower_.at(k); }
  double upper(std::size_t k) const { return upper_.at(k); }
  /// Strict-positivity floor; zero for non-simplex spaces.
  double floor() const { return floor_; }
  std::size_t points_per_axis(std::size_t k) const { return points_.at(k); }
  double grid_step(std::size_t k) const {
    return (upper_.at(k) - lower_.at(k)) / static_cast<double>(points_.at(k) - 1);
  }

  bool contains(ThetaView theta) const { return violation(theta).empty(); }

  /// Throws DomainError naming the first offending coordinate.
  void require(ThetaView theta) const {
    if (auto msg = violation(theta); !msg.empty()) throw DomainError(msg);
  }

  /// Nearest member in the box sense; used to project unconstrained optima.
  Theta project(ThetaView theta) const {
    Theta out(theta.begin(), theta.end());
    for (std::size_t k = 0; k < out.size() && k < dim(); ++k)
      out[k] = std::clamp(out[k], lower_[k], upper_[k]);
    return out;
  }

  double diameter() const {
    switch (kind_) {
      case SpaceKind::interval:
        return upper_[0] - lower_[0];
      case SpaceKind::box: {
        double acc = 0.0;
        for (std::size_t k = 0; k < dim(); ++k) acc += (upper_[k] - lower_[k]) * (upper_[k] - lower_[k]);
        return std::sqrt(acc);
      }
      case SpaceKind::simplex_interior: {
        // Vertices are the all-floor point and floor + e_k * (1 - (d+1) floor).
        const double edge = 1.0 - static_cast<double>(dim() + 1) * floor_;
        return dim() == 1 ? edge : std::sqrt(2.0) * edge;
      }
    }
    return 0.0;
  }

  /// Coordinate value of grid index `j` on axis `k`; endpoints are exact.
  double axis_point(std::size_t k, std::size_t j) const {
    const std::size_t n = points_[k];
    if (j + 1 == n) return upper_[k];
    const double v = lower_[k] + (upper_[k] - lower_[k]) * static_cast<double>(j) / static_cast<double>(n - 1);
    return std::min(v, upper_[k]);
  }

  /// All grid members, in lexicographic order of axis indices (axis 0 slowest).
  std::vector<Theta> grid() const {
    std::vector<Theta> out;
    if (dim() == 0) return out;
    std::vector<std::size_t> idx(dim(), 0);
    Theta point(dim());
    for (;;) {
      for (std::size_t k = 0; k < dim(); ++k) point[k] = axis_point(k, idx[k]);
      if (kind_ != SpaceKind::simplex_interior || residual_ok(point)) out.push_back(point);
      std::size_t k = dim();
      while (k > 0) {
        --k;
        if (++idx[k] < points_[k]) break;
        idx[k] = 0;
        if (k == 0) return out;
      }
    }
  }

  /// Scalar grid as plain values (dim must be 1).
  std::vector<double> scalar_grid() const {
    if (dim() != 1) throw TypeError("scalar_grid requires a one-dimensional space");
    std::vector<double> out(points_[0]);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = axis_point(0, j);
    return out;
  }

 private:
  static void check_bounds(double lo, double hi, std::size_t k) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw ConfigError("space bounds on coordinate " + std::to_string(k) + " must be finite with lower < upper");
  }

  static std::size_t points_for_step(double width, double step) {
    const double n = std::round(width / step);
    return static_cast<std::size_t>(std::max(1.0, n)) + 1;
  }

  bool residual_ok(ThetaView theta) const {
    const double residual = 1.0 - std::accumulate(theta.begin(), theta.end(), 0.0);
    return residual >= floor_ - 1e-12;
  }

  std::string violation(ThetaView theta) const {
    if (theta.size() != dim())
      return "parameter has " + std::to_string(theta.size()) + " coordinates, space has " + std::to_string(dim());
    for (std::size_t k = 0; k < dim(); ++k) {
      if (!std::isfinite(theta[k]) || theta[k] < lower_[k] || theta[k] > upper_[k])
        return "parameter coordinate " + std::to_string(k) + " = " + std::to_string(theta[k]) + " outside [" +
               std::to_string(lower_[k]) + ", " + std::to_string(upper_[k]) + "]";
    }
    if (kind_ == SpaceKind::simplex_interior && !residual_ok(theta))
      return "parameter residual mass 1 - sum(theta) is below the floor " + std::to_string(floor_);
    return {};
  }

  SpaceKind kind_ = SpaceKind::interval;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<std::size_t> points_;
  double floor_ = 0.0;
};

}  // namespace depbandits
