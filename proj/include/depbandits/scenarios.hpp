#pragma once

#include <vector>

#include "depbandits/instance.hpp"

namespace depbandits::scenarios {

/// One identity and one mirror Bernoulli arm per cluster, Theta = [0.01, 0.99].
inline InstanceSpec mirrored_bernoulli(const std::vector<double>& thetas) {
  InstanceSpec spec;
  for (double th : thetas)
    spec.add_cluster(ParameterSpace::interval(0.01, 0.99), {th},
                     {ArmModel::bernoulli(BernoulliLinkKind::identity), ArmModel::bernoulli(BernoulliLinkKind::mirror)});
  return spec;
}

inline InstanceSpec fig1a() { return mirrored_bernoulli({0.1, 0.5, 0.2}); }
inline InstanceSpec fig1b() { return mirrored_bernoulli({0.1, 0.5, 0.2, 0.3, 0.4, 0.2, 0.3, 0.4, 0.5}); }

/// Gaussian clusters on Theta = [-1, 1]; the arms of a cluster of size n have scales 1..n.
inline InstanceSpec scaled_gaussian(const std::vector<double>& thetas, const std::vector<int>& sizes) {
  InstanceSpec spec;
  for (std::size_t c = 0; c < thetas.size(); ++c) {
    std::vector<ArmModel> arms;
    for (int l = 1; l <= sizes.at(c); ++l) arms.push_back(ArmModel::gaussian(l, 1.0));
    spec.add_cluster(ParameterSpace::interval(-1.0, 1.0), {thetas[c]}, std::move(arms));
  }
  return spec;
}

inline InstanceSpec fig2a() { return scaled_gaussian({0.1, 0.5, 0.2}, {3, 2, 3}); }
inline InstanceSpec fig2b() { return scaled_gaussian({0.1, 0.5, 0.2}, {15, 10, 15}); }

}  // namespace depbandits::scenarios
