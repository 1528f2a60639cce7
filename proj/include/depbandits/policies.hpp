#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "depbandits/errors.hpp"
#include "depbandits/estimation.hpp"
#include "depbandits/instance.hpp"
#include "depbandits/rng.hpp"

namespace depbandits {

enum class PolicyKind { ucb_d, vanilla_ucb, uniform_random };
enum class Phase { initialization, index };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::ucb_d: return "ucb_d";
    case PolicyKind::vanilla_ucb: return "vanilla_ucb";
    case PolicyKind::uniform_random: return "uniform_random";
  }
  return "?";
}

inline const char* to_string(Phase p) { return p == Phase::initialization ? "initialization" : "index"; }

inline PolicyKind parse_policy_kind(std::string_view s) {
  if (s == "ucb_d") return PolicyKind::ucb_d;
  if (s == "vanilla_ucb") return PolicyKind::vanilla_ucb;
  if (s == "uniform_random") return PolicyKind::uniform_random;
  throw ConfigError("unknown policy '" + std::string(s) + "' (expected ucb_d, vanilla_ucb or uniform_random)");
}

struct Decision {
  std::uint64_t round = 0;
  ArmId arm = 0;
  /// Index of every arm at decision time; +inf marks arms still owed an
  /// initial pull, empty for policies without indices.
  std::vector<double> indices;
  Phase phase = Phase::index;
};

/// Sequential decision interface shared by every policy.
///
/// Each round is one select(t) followed by one update(arm, reward) for the
/// chosen arm. Rounds are numbered from 1 and must be consecutive.
class Policy {
 public:
  explicit Policy(std::size_t num_arms) : counts_(num_arms, 0) {}
  virtual ~Policy() = default;

  virtual PolicyKind kind() const = 0;

  Decision select(std::uint64_t t) {
    if (pending_) throw ProtocolError("select called for round " + std::to_string(t) + " before round " +
                                      std::to_string(pending_->round) + " was updated");
    if (t != plays_ + 1)
      throw ProtocolError("select expected round " + std::to_string(plays_ + 1) + ", got " + std::to_string(t));
    Decision d = choose(t);
    pending_ = d;
    return d;
  }

  void update(ArmId arm, double reward) {
    if (!pending_) throw ProtocolError("update without a pending decision");
    if (arm != pending_->arm)
      throw ProtocolError("update for arm " + std::to_string(arm + 1) + " but round " +
                          std::to_string(pending_->round) + " chose arm " + std::to_string(pending_->arm + 1));
    observe(arm, reward);
    ++counts_[arm];
    ++plays_;
    pending_.reset();
  }

  std::uint64_t plays() const { return plays_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::size_t num_arms() const { return counts_.size(); }

 protected:
  virtual Decision choose(std::uint64_t t) = 0;
  virtual void observe(ArmId arm, double reward) = 0;

  /// First arm attaining the maximum (lowest id wins ties).
  static ArmId argmax(const std::vector<double>& v) {
    ArmId best = 0;
    for (ArmId i = 1; i < v.size(); ++i)
      if (v[i] > v[best]) best = i;
    return best;
  }

  Decision initialization(std::uint64_t t) const {
    return {t, static_cast<ArmId>(t - 1), std::vector<double>(num_arms(), std::numeric_limits<double>::infinity()),
            Phase::initialization};
  }

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t plays_ = 0;
  std::optional<Decision> pending_;
};

struct UcbdOptions {
  double kappa = 1.0;
  /// Recompute the MLE only every k rounds after initialization.
  std::uint64_t recompute_every = 1;
};

/// Optimistic policy over per-cluster KL confidence balls around the MLE.
class UcbD final : public Policy {
 public:
  UcbD(const BanditInstance& inst, UcbdOptions opt) : Policy(inst.num_arms()), inst_(&inst), opt_(opt) {
    if (!(opt_.kappa > 0.0) || !std::isfinite(opt_.kappa)) throw ConfigError("kappa must be positive and finite");
    if (opt_.recompute_every == 0) throw ConfigError("recompute_every must be at least 1");
    for (const auto& c : inst.clusters()) histories_.emplace_back(c);
    estimates_.resize(inst.num_clusters());
    balls_.resize(inst.num_clusters());
  }

  PolicyKind kind() const override { return PolicyKind::ucb_d; }
  double kappa() const { return opt_.kappa; }
  const ClusterHistory& history(ClusterId c) const { return histories_.at(c); }
  /// Estimate and ball from the latest index round; empty before round M + 1.
  const ClusterEstimate& estimate(ClusterId c) const { return estimates_.at(c); }
  const ConfidenceBall& ball(ClusterId c) const { return balls_.at(c); }

 protected:
  Decision choose(std::uint64_t t) override {
    const std::size_t m = num_arms();
    if (t <= m) return initialization(t);
    const bool refit = (t - m - 1) % opt_.recompute_every == 0;
    std::vector<double> uc(m);
    for (ClusterId c = 0; c < histories_.size(); ++c) {
      auto& h = histories_[c];
      const Cluster& cl = inst_->cluster(c);
      h.set_round(t);
      if (refit || estimates_[c].theta_hat.empty()) estimates_[c] = mle(h);
      balls_[c] = confidence_ball(h, estimates_[c], opt_.kappa);
      const auto interval = ball_interval(balls_[c], cl);
      for (std::size_t k = 0; k < cl.size(); ++k) {
        const ArmModel& arm = cl.arms[k];
        if (interval) {
          const double a = interval->lower, b = interval->upper;
          uc[cl.arm_ids[k]] = std::max({arm.mean(balls_[c].center), arm.mean(std::span<const double>(&a, 1)),
                                        arm.mean(std::span<const double>(&b, 1))});
        } else {
          uc[cl.arm_ids[k]] = sup_mean_over_ball(balls_[c], cl, k, SupMethod::grid);
        }
      }
    }
    const ArmId best = argmax(uc);
    return {t, best, std::move(uc), Phase::index};
  }

  void observe(ArmId arm, double reward) override {
    histories_[inst_->cluster_id_of(arm)].record(inst_->local_index(arm), reward);
  }

 private:
  const BanditInstance* inst_;
  UcbdOptions opt_;
  std::vector<ClusterHistory> histories_;
  std::vector<ClusterEstimate> estimates_;
  std::vector<ConfidenceBall> balls_;
};

/// Per-arm UCB with width sqrt(2 sigma_i^2 log t / N_i), ignoring clusters.
class VanillaUcb final : public Policy {
 public:
  explicit VanillaUcb(const BanditInstance& inst)
      : Policy(inst.num_arms()), sums_(inst.num_arms(), 0.0), sigma_(inst.num_arms()) {
    for (ArmId i = 0; i < inst.num_arms(); ++i) sigma_[i] = inst.arm(i).sub_gaussian().sigma;
  }

  PolicyKind kind() const override { return PolicyKind::vanilla_ucb; }

 protected:
  Decision choose(std::uint64_t t) override {
    const std::size_t m = num_arms();
    if (t <= m) return initialization(t);
    const double log_t = std::log(static_cast<double>(t));
    std::vector<double> idx(m);
    for (ArmId i = 0; i < m; ++i) {
      const double n = static_cast<double>(counts()[i]);
      idx[i] = sums_[i] / n + std::sqrt(2.0 * sigma_[i] * sigma_[i] * log_t / n);
    }
    const ArmId best = argmax(idx);
    return {t, best, std::move(idx), Phase::index};
  }

  void observe(ArmId arm, double reward) override { sums_[arm] += reward; }

 private:
  std::vector<double> sums_;
  std::vector<double> sigma_;
};

class UniformRandom final : public Policy {
 public:
  UniformRandom(std::size_t num_arms, std::uint64_t key) : Policy(num_arms), rng_(key) {}

  PolicyKind kind() const override { return PolicyKind::uniform_random; }

 protected:
  Decision choose(std::uint64_t t) override { return {t, static_cast<ArmId>(rng_.below(num_arms())), {}, Phase::index}; }
  void observe(ArmId, double) override {}

 private:
  CounterRng rng_;
};

/// `policy_key` seeds policies that randomise (uniform_random only).
inline std::unique_ptr<Policy> make_policy(PolicyKind kind, const BanditInstance& inst, const UcbdOptions& ucbd,
                                           std::uint64_t policy_key) {
  switch (kind) {
    case PolicyKind::ucb_d: return std::make_unique<UcbD>(inst, ucbd);
    case PolicyKind::vanilla_ucb: return std::make_unique<VanillaUcb>(inst);
    case PolicyKind::uniform_random: return std::make_unique<UniformRandom>(inst.num_arms(), policy_key);
  }
  throw ConfigError("unknown policy kind");
}

}  // namespace depbandits
