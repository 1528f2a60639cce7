#include <gtest/gtest.h>

#include <cmath>

#include "depbandits/bounds.hpp"
#include "depbandits/harness.hpp"
#include "depbandits/policies.hpp"
#include "depbandits/scenarios.hpp"

using namespace depbandits;

namespace {

const BanditInstance& fig1a() {
  static const BanditInstance inst = build_instance(scenarios::fig1a());
  return inst;
}

double bern_kl(double p, double q) { return p * std::log(p / q) + (1 - p) * std::log((1 - p) / (1 - q)); }

// Plain bisection for the ball edge of a mirrored pair, independent of the library solver.
double edge(double c, double toward, double w0, double w1, double r) {
  auto f = [&](double x) { return w0 * bern_kl(c, x) + w1 * bern_kl(1 - c, 1 - x) - r; };
  if (f(toward) <= 0) return toward;
  double in = c, out = toward;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (in + out);
    (f(mid) <= 0 ? in : out) = mid;
  }
  return in;
}

}  // namespace

TEST(UcbD, InitializationPlaysEachArmInOrder) {
  UcbD p(fig1a(), {2.0, 1});
  for (std::uint64_t t = 1; t <= 6; ++t) {
    auto d = p.select(t);
    EXPECT_EQ(d.arm, t - 1);
    EXPECT_EQ(d.phase, Phase::initialization);
    p.update(d.arm, 1.0);
  }
  EXPECT_EQ(p.select(7).phase, Phase::index);
}

TEST(VanillaUcb, InitializationAndIndexFormula) {
  VanillaUcb p(fig1a());
  const double rewards[] = {1, 0, 1, 1, 0, 1};
  for (std::uint64_t t = 1; t <= 6; ++t) {
    auto d = p.select(t);
    EXPECT_EQ(d.arm, t - 1);
    p.update(d.arm, rewards[t - 1]);
  }
  auto d = p.select(7);
  for (ArmId i = 0; i < 6; ++i)
    EXPECT_DOUBLE_EQ(d.indices[i], rewards[i] + std::sqrt(2.0 * 0.25 * std::log(7.0) / 1.0));
  EXPECT_EQ(d.arm, 0u);  // tie among arms 1, 3, 4, 6 goes to the lowest id
}

TEST(Policy, TieBreakIsLowestId) {
  InstanceSpec spec;
  spec.add_cluster(ParameterSpace::interval(-1, 1), {0.5}, {ArmModel::gaussian(1.0)});
  spec.add_cluster(ParameterSpace::interval(-1, 1), {0.5}, {ArmModel::gaussian(1.0)});
  spec.add_cluster(ParameterSpace::interval(-1, 1), {0.1}, {ArmModel::gaussian(1.0)});
  auto inst = build_instance(spec);
  for (auto kind : {PolicyKind::ucb_d, PolicyKind::vanilla_ucb}) {
    auto p = make_policy(kind, inst, {1.0, 1}, 0);
    for (std::uint64_t t = 1; t <= 3; ++t) p->update(p->select(t).arm, t == 3 ? 0.0 : 0.4);
    auto d = p->select(4);
    EXPECT_EQ(d.indices[0], d.indices[1]) << to_string(kind);
    EXPECT_EQ(d.arm, 0u) << to_string(kind);
  }
}

TEST(Policy, ProtocolErrors) {
  for (auto kind : {PolicyKind::ucb_d, PolicyKind::vanilla_ucb, PolicyKind::uniform_random}) {
    auto p = make_policy(kind, fig1a(), {1.0, 1}, 3);
    EXPECT_THROW(p->update(0, 1.0), ProtocolError);
    EXPECT_THROW(p->select(2), ProtocolError);
    auto d = p->select(1);
    EXPECT_THROW(p->select(1), ProtocolError);
    EXPECT_THROW(p->update((d.arm + 1) % 6, 1.0), ProtocolError);
    p->update(d.arm, 1.0);
    EXPECT_EQ(p->plays(), 1u);
  }
}

TEST(Policy, UpdateIncrementsExactlyOneCount) {
  UcbD p(fig1a(), {2.0, 1});
  CounterRng rng(CounterRng::derive_key(1, 0));
  for (std::uint64_t t = 1; t <= 50; ++t) {
    auto before = p.counts();
    std::vector<std::uint64_t> cluster_before;
    for (ClusterId c = 0; c < 3; ++c) cluster_before.push_back(p.history(c).total());
    auto d = p.select(t);
    p.update(d.arm, fig1a().arm(d.arm).sample(fig1a().cluster_of(d.arm).theta_star, rng));
    for (ArmId i = 0; i < 6; ++i) EXPECT_EQ(p.counts()[i], before[i] + (i == d.arm));
    for (ClusterId c = 0; c < 3; ++c)
      EXPECT_EQ(p.history(c).total(), cluster_before[c] + (c == fig1a().cluster_id_of(d.arm)));
  }
  std::uint64_t total = 0;
  for (ClusterId c = 0; c < 3; ++c) total += p.history(c).total();
  EXPECT_EQ(total, 50u);
}

TEST(UcbD, ReplayAuditSeed7Round100) {
  RunOptions opt;
  opt.audit = true;
  opt.checkpoints = {100};
  const double kappa = 2.0;
  auto tr = run_single(fig1a(), PolicyKind::ucb_d, 100, 7, kappa, opt);
  ASSERT_EQ(tr.audit.size(), 100u);

  // Rebuild per-arm successes from the log of rounds 1..99.
  std::vector<double> n(6, 0.0), s(6, 0.0);
  for (std::size_t k = 0; k < 99; ++k) {
    n[tr.audit[k].arm] += 1;
    s[tr.audit[k].arm] += tr.audit[k].reward;
  }
  std::vector<double> uc(6);
  for (int c = 0; c < 3; ++c) {
    const double n1 = n[2 * c], n2 = n[2 * c + 1], total = n1 + n2;
    const double theta = std::clamp((s[2 * c] + n2 - s[2 * c + 1]) / total, 0.01, 0.99);
    const double r = std::sqrt(kappa * std::log(100.0) / total);
    const double lo = edge(theta, 0.01, n1 / total, n2 / total, r);
    const double hi = edge(theta, 0.99, n1 / total, n2 / total, r);
    uc[2 * c] = hi;
    uc[2 * c + 1] = 1 - lo;
  }
  const auto& rec = tr.audit[99];
  const ArmId expected = static_cast<ArmId>(std::max_element(uc.begin(), uc.end()) - uc.begin());
  EXPECT_EQ(rec.arm, expected);
  for (ArmId i = 0; i < 6; ++i) EXPECT_NEAR(rec.indices[i], uc[i], 1e-9) << i;
}

TEST(UcbD, IndexDominatesPointEstimate) {
  RunOptions opt;
  opt.audit = true;
  opt.checkpoints = {2000};
  for (const auto& inst : {fig1a(), build_instance(scenarios::fig2a())}) {
    auto tr = run_single(inst, PolicyKind::ucb_d, 2000, 11, 1.0, opt);
    for (const auto& rec : tr.audit) {
      if (rec.phase != Phase::index) continue;
      for (ArmId i = 0; i < inst.num_arms(); ++i) {
        const auto& ca = rec.clusters[inst.cluster_id_of(i)];
        EXPECT_GE(rec.indices[i], inst.arm(i).mean(ca.theta_hat) - 1e-12);
      }
    }
  }
}

TEST(UcbD, PlayCountThresholdWhenBallsHoldTruth) {
  const auto& inst = fig1a();
  auto constants = certify_instance(inst);
  auto report = start_report(inst, constants);
  RunOptions opt;
  opt.audit = true;
  opt.checkpoints = {5000};
  std::size_t checked = 0;
  for (double kappa : {0.5, 2.0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto tr = run_single(inst, PolicyKind::ucb_d, 5000, seed, kappa, opt);
      for (const auto& rec : tr.audit) {
        if (rec.phase != Phase::index || inst.gap(rec.arm) <= 0.0) continue;
        if (!std::all_of(rec.clusters.begin(), rec.clusters.end(), [](const auto& c) { return c.truth_in_ball; }))
          continue;
        const auto& ca = rec.clusters[inst.cluster_id_of(rec.arm)];
        EXPECT_LE(static_cast<double>(ca.plays), play_count_threshold(report.arms[rec.arm], kappa, rec.round))
            << "seed " << seed << " round " << rec.round << " arm " << rec.arm + 1;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(Policy, DeterministicDecisions) {
  RunOptions opt;
  opt.audit = true;
  opt.checkpoints = {500};
  for (auto kind : {PolicyKind::ucb_d, PolicyKind::vanilla_ucb, PolicyKind::uniform_random}) {
    auto a = run_single(fig1a(), kind, 500, 99, 1.0, opt);
    auto b = run_single(fig1a(), kind, 500, 99, 1.0, opt);
    EXPECT_TRUE(a == b) << to_string(kind);
  }
  auto u1 = run_single(fig1a(), PolicyKind::uniform_random, 500, 1, 1.0, opt);
  auto u2 = run_single(fig1a(), PolicyKind::uniform_random, 500, 2, 1.0, opt);
  EXPECT_NE(u1.final_counts, u2.final_counts);
}

TEST(Policy, ParseKinds) {
  EXPECT_EQ(parse_policy_kind("ucb_d"), PolicyKind::ucb_d);
  EXPECT_EQ(parse_policy_kind("vanilla_ucb"), PolicyKind::vanilla_ucb);
  EXPECT_EQ(parse_policy_kind("uniform_random"), PolicyKind::uniform_random);
  EXPECT_THROW(parse_policy_kind("ucb_g"), ConfigError);
  EXPECT_THROW(UcbD(fig1a(), {0.0, 1}), ConfigError);
  EXPECT_THROW(UcbD(fig1a(), {1.0, 0}), ConfigError);
}

TEST(UcbD, RecomputeEveryKeepsEstimatesBetweenRefits) {
  UcbD p(fig1a(), {1.0, 5});
  CounterRng rng(CounterRng::derive_key(4, 0));
  Theta last;
  for (std::uint64_t t = 1; t <= 30; ++t) {
    auto d = p.select(t);
    if (t > 6) {
      const auto& th = p.estimate(0).theta_hat;
      if ((t - 7) % 5 != 0) EXPECT_EQ(th, last) << t;
      last = th;
    }
    p.update(d.arm, fig1a().arm(d.arm).sample(fig1a().cluster_of(d.arm).theta_star, rng));
  }
}
