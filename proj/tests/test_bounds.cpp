#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "depbandits/bounds.hpp"
#include "depbandits/scenarios.hpp"

using namespace depbandits;

namespace {

// Clusters of single unit Gaussian arms on [lo, hi].
BanditInstance single_arm_gaussians(std::vector<double> thetas, double lo = 0.0, double hi = 1.0, double step = 1e-3) {
  InstanceSpec spec;
  for (double t : thetas) spec.add_cluster(ParameterSpace::interval(lo, hi, step), {t}, {ArmModel::gaussian(1.0)});
  return build_instance(spec);
}

BanditInstance random_instance(std::mt19937_64& gen, Family family) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  InstanceSpec spec;
  const int k = 2 + static_cast<int>(gen() % 3);
  for (int c = 0; c < k; ++c) {
    const int size = 1 + static_cast<int>(gen() % 3);
    std::vector<ArmModel> arms;
    if (family == Family::gaussian_scaled) {
      for (int a = 0; a < size; ++a) arms.push_back(ArmModel::gaussian(0.5 + 2.5 * u(gen), 0.5 + u(gen)));
      spec.add_cluster(ParameterSpace::interval(-1.0, 1.0, 0.01), {-0.9 + 1.8 * u(gen)}, std::move(arms));
    } else {
      for (int a = 0; a < size; ++a)
        arms.push_back(ArmModel::bernoulli(gen() % 2 ? BernoulliLinkKind::identity : BernoulliLinkKind::mirror));
      spec.add_cluster(ParameterSpace::interval(0.05, 0.95, 0.01), {0.1 + 0.8 * u(gen)}, std::move(arms));
    }
  }
  return build_instance(spec);
}

}  // namespace

TEST(PsiBar, ZeroAndGaussianForm) {
  auto inst = single_arm_gaussians({-1.0, 0.5}, -3.0, 3.0, 0.01);
  EXPECT_EQ(psi_bar(inst, 0, 0.0, BoundMethod::grid), 0.0);
  for (double x : {0.01, 0.1, 0.5, 1.0, 2.0}) {
    EXPECT_NEAR(psi_bar(inst, 0, x, BoundMethod::analytic), std::sqrt(2.0 * x), 1e-12);
    EXPECT_NEAR(psi_bar(inst, 0, x, BoundMethod::grid), std::sqrt(2.0 * x), 0.011);
    EXPECT_LE(psi_bar(inst, 0, x, BoundMethod::grid), std::sqrt(2.0 * x) + 1e-12);
  }
  double prev = 0.0;
  for (double x = 0.0; x < 3.0; x += 0.1) {
    const double v = psi_bar(inst, 0, x, BoundMethod::grid);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_THROW(psi_bar(inst, 0, -1.0), DomainError);
}

TEST(PsiInv, ZeroGaussianAndSentinel) {
  auto inst = single_arm_gaussians({-1.0, 0.5}, -3.0, 3.0, 0.01);
  EXPECT_EQ(psi_inv(inst, 0, 0.0), 0.0);
  for (double x : {0.05, 0.4, 1.0, 2.5}) {
    EXPECT_NEAR(psi_inv(inst, 0, x, BoundMethod::analytic), x * x / 2.0, 1e-12);
    EXPECT_NEAR(psi_inv(inst, 0, x, BoundMethod::grid), x * x / 2.0, 1e-9);
  }
  int diag = 0;
  ScopedDiagnosticSink sink([&](DiagnosticKind k, const std::string&) { diag += k == DiagnosticKind::infeasible_sentinel; });
  EXPECT_EQ(psi_inv(inst, 0, 6.5, BoundMethod::grid), kInfeasible);
  EXPECT_EQ(psi_inv(inst, 0, 6.5, BoundMethod::analytic), kInfeasible);
  EXPECT_EQ(diag, 2);
}

TEST(PsiInv, GeneralizedInverseOfPsiBar) {
  auto bern = build_instance(scenarios::mirrored_bernoulli({0.3, 0.6}));
  std::vector<double> xs{0.02, 0.1, 0.3, 0.6};
  for (ArmId i : {ArmId{0}, ArmId{1}}) {
    for (double x : xs) {
      // Gap direction: psi_bar(psi_inv(x)) >= x.
      const double k = psi_inv(bern, i, x, BoundMethod::grid);
      EXPECT_GE(psi_bar(bern, i, k, BoundMethod::grid), x - 1e-9);
    }
    for (double x : {0.001, 0.01, 0.1, 0.5}) {
      // KL direction: psi_inv(psi_bar(x)) <= x.
      const double g = psi_bar(bern, i, x, BoundMethod::grid);
      EXPECT_LE(psi_inv(bern, i, g, BoundMethod::grid), x + 1e-9);
    }
  }
}

TEST(Phi, SpecExamples) {
  auto inst = single_arm_gaussians({1.0, 0.2});
  EXPECT_EQ(phi(inst, 1, 0.2), 0.0);
  EXPECT_NEAR(phi(inst, 1, 1.0, BoundMethod::analytic), 0.32, 1e-12);
  EXPECT_NEAR(phi(inst, 1, 1.0, BoundMethod::grid), 0.32, 1e-12);
  EXPECT_EQ(phi(inst, 1, 1.5), kInfeasible);
}

TEST(Phi, GridMatchesAnalyticOnGaussianClusters) {
  auto inst = build_instance(scenarios::fig2a());
  for (ArmId i = 0; i < inst.num_arms(); ++i) {
    const double a = phi(inst, i, inst.best_mean(), BoundMethod::analytic);
    const double g = phi(inst, i, inst.best_mean(), BoundMethod::grid);
    if (a == kInfeasible) {
      EXPECT_EQ(g, kInfeasible) << i;
      continue;
    }
    EXPECT_GE(g, a - 1e-12) << i;
    EXPECT_NEAR(g, a, 0.02 * std::max(1.0, a)) << i;
    const double half = inst.gap(i) / 2.0;
    // The grid resolves mean gaps only to |l| * step.
    const double l = std::abs(inst.arm(i).as<GaussianScaled>()->scale);
    const double step = inst.cluster_of(i).space.grid_step(0);
    const double pg = psi_inv(inst, i, half, BoundMethod::grid);
    EXPECT_GE(pg, psi_inv(inst, i, half, BoundMethod::analytic) - 1e-12) << i;
    EXPECT_LE(pg, (half + l * step) * (half + l * step) / 2.0) << i;
  }
}

TEST(Phi, CanExceedGammaTimesPsiInverseOfHalfGap) {
  // Two single-arm clusters: Gamma = 1, psi_inv(0.4) = 0.08, phi = 0.32.
  auto inst = single_arm_gaussians({1.0, 0.2});
  auto report = bound_report(inst, certify_instance(inst), 2.0);
  const auto& a = report.arms[1];
  EXPECT_DOUBLE_EQ(a.Gamma, 1.0);
  EXPECT_NEAR(a.psi_inv_half_gap, 0.08, 1e-12);
  EXPECT_NEAR(a.phi, 0.32, 1e-12);
  EXPECT_GT(a.phi, a.Gamma * a.psi_inv_half_gap + 1e-6);
}

TEST(LowerBound, Examples) {
  auto two = single_arm_gaussians({1.0, 0.2});
  auto report = bound_report(two, certify_instance(two), 2.0);
  EXPECT_NEAR(report.lower_coefficient, 0.8 / 0.32, 1e-9);
  EXPECT_NEAR(report.lower_coefficient, 2.5, 1e-9);
  EXPECT_EQ(report.suboptimal_clusters, 1u);

  InstanceSpec one;
  one.add_cluster(ParameterSpace::interval(0, 1), {0.4}, {ArmModel::gaussian(1.0), ArmModel::gaussian(2.0)});
  auto k1 = build_instance(one);
  auto r1 = bound_report(k1, certify_instance(k1), 2.0);
  EXPECT_EQ(r1.lower_coefficient, 0.0);
  EXPECT_EQ(r1.suboptimal_clusters, 0u);
}

TEST(LowerBound, ScalesWithSuboptimalClusterCount) {
  double single = 0.0;
  for (int k = 2; k <= 5; ++k) {
    std::vector<double> thetas{1.0};
    for (int c = 1; c < k; ++c) thetas.push_back(0.2);
    auto inst = single_arm_gaussians(thetas);
    auto r = bound_report(inst, certify_instance(inst), 2.0);
    if (k == 2) single = r.lower_coefficient;
    EXPECT_EQ(r.suboptimal_clusters, static_cast<std::size_t>(k - 1));
    EXPECT_NEAR(r.lower_coefficient, (k - 1) * single, 1e-9);
  }
}

TEST(UpperBound, Examples) {
  auto two = single_arm_gaussians({1.0, 0.2});
  auto constants = certify_instance(two);
  auto r = bound_report(two, constants, 2.0);
  EXPECT_NEAR(r.upper_coefficient, 0.8 * 2.0 / (0.08 * 0.08), 1e-6);
  EXPECT_NEAR(r.upper_coefficient, 250.0, 1e-6);
  EXPECT_NEAR(r.clusters[1].play_count_coefficient, 2.0 / (0.08 * 0.08), 1e-6);
  auto r4 = bound_report(two, constants, 4.0);
  EXPECT_NEAR(r4.upper_coefficient, 2.0 * r.upper_coefficient, 1e-9);
  EXPECT_EQ(r.clusters[0].upper_term, 0.0);
  EXPECT_TRUE(r.ordered());
  EXPECT_FALSE(r.partial);
}

TEST(UpperBound, ClusterWithOnlyZeroGapArmsContributesNothing) {
  // Cluster 1 holds i* and an arm tied with it.
  InstanceSpec spec;
  spec.add_cluster(ParameterSpace::interval(-1, 1, 0.01), {0.5}, {ArmModel::gaussian(1.0), ArmModel::gaussian(1.0)});
  spec.add_cluster(ParameterSpace::interval(-1, 1, 0.01), {0.1}, {ArmModel::gaussian(1.0)});
  auto inst = build_instance(spec);
  auto r = bound_report(inst, certify_instance(inst), 2.0);
  EXPECT_EQ(r.clusters[0].upper_term, 0.0);
  EXPECT_EQ(r.clusters[0].play_count_coefficient, 0.0);
  EXPECT_GT(r.clusters[1].upper_term, 0.0);
}

TEST(UpperBound, SentinelMarksPartial) {
  // Gap 1.8 cannot be halved within a [0, 0.5] cluster of scale 1: psi_inv(0.9) is infeasible.
  InstanceSpec spec;
  spec.add_cluster(ParameterSpace::interval(-1, 1, 0.01), {1.0}, {ArmModel::gaussian(2.0)});
  spec.add_cluster(ParameterSpace::interval(0, 0.5, 0.01), {0.2}, {ArmModel::gaussian(1.0)});
  auto inst = build_instance(spec);
  auto r = bound_report(inst, certify_instance(inst), 2.0);
  EXPECT_EQ(r.arms[1].psi_inv_half_gap, kInfeasible);
  EXPECT_FALSE(r.clusters[1].upper_available);
  EXPECT_TRUE(r.partial);
  EXPECT_THROW(upper_bound(inst, 0.0, r), ConfigError);
}

TEST(KlBall, Examples) {
  auto inst = single_arm_gaussians({-0.5, 0.5}, -1.0, 1.0, 0.01);
  const auto grid = inst.cluster(0).space.scalar_grid();
  auto zero = kl_ball(inst, 0, Theta{0.5}, 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(zero[k] != 0, grid[k] == 0.5);
  EXPECT_EQ(std::count(zero.begin(), zero.end(), 1), 1);
  auto small = kl_ball(inst, 0, Theta{0.3}, 0.02);
  auto big = kl_ball(inst, 0, Theta{0.3}, 0.08);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_EQ(small[k] != 0, (grid[k] - 0.3) * (grid[k] - 0.3) / 2.0 <= 0.02);
    EXPECT_LE(small[k], big[k]);
  }
  EXPECT_THROW(kl_ball(inst, 0, Theta{0.3}, -1.0), DomainError);
}

TEST(Report, PureAndOrderedOnBundledScenarios) {
  for (auto spec : {scenarios::fig1a(), scenarios::fig2a()}) {
    auto inst = build_instance(spec);
    auto constants = certify_instance(inst);
    double sigma = 0.0;
    for (ArmId i = 0; i < inst.num_arms(); ++i) sigma = std::max(sigma, inst.arm(i).sub_gaussian().sigma);
    const double kappa = kappa_floor(inst, constants, 1.0, sigma, 4);
    auto a = bound_report(inst, constants, kappa);
    auto b = bound_report(inst, constants, kappa);
    EXPECT_EQ(a.lower_coefficient, b.lower_coefficient);
    EXPECT_EQ(a.upper_coefficient, b.upper_coefficient);
    for (std::size_t i = 0; i < a.arms.size(); ++i) {
      EXPECT_EQ(a.arms[i].phi, b.arms[i].phi);
      EXPECT_EQ(a.arms[i].psi_inv_half_gap, b.arms[i].psi_inv_half_gap);
    }
    EXPECT_TRUE(a.ordered());
    for (const auto& c : a.clusters) {
      EXPECT_GE(c.lower_term, 0.0);
      EXPECT_GE(c.upper_term, 0.0);
      EXPECT_GT(c.grid_step, 0.0);
    }
  }
}

TEST(Report, LowerBelowUpperOnRandomInstances) {
  std::mt19937_64 gen(77);
  for (Family f : {Family::gaussian_scaled, Family::bernoulli_link}) {
    for (int rep = 0; rep < 20; ++rep) {
      BanditInstance inst = [&] {
        for (;;) {
          try {
            return random_instance(gen, f);
          } catch (const ConfigError&) {
          }
        }
      }();
      auto constants = certify_instance(inst);
      double sigma = 0.0;
      for (ArmId i = 0; i < inst.num_arms(); ++i) sigma = std::max(sigma, inst.arm(i).sub_gaussian().sigma);
      auto r = bound_report(inst, constants, kappa_floor(inst, constants, 1.0, sigma, 4));
      EXPECT_LE(r.lower_coefficient, r.upper_coefficient) << to_string(f) << " rep " << rep;
    }
  }
}
