#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "depbandits/diagnostics.hpp"
#include "depbandits/errors.hpp"
#include "depbandits/estimation.hpp"
#include "depbandits/instance.hpp"
#include "depbandits/policies.hpp"
#include "depbandits/rng.hpp"

namespace depbandits {

/// Stream ids for CounterRng::derive_key.
enum RngStream : std::uint64_t { kRewardStream = 0, kPolicyStream = 1 };

struct RunOptions {
  /// Rounds at which regret is recorded; empty selects default_checkpoints.
  std::vector<std::uint64_t> checkpoints;
  bool audit = false;
  /// Record t * mu* - sum of rewards instead of the pseudo-regret.
  bool realized_regret = false;
  std::uint64_t recompute_every = 1;
};

/// {M, 2M, 4M, ...} and powers of two up to T, plus T itself.
inline std::vector<std::uint64_t> default_checkpoints(std::uint64_t num_arms, std::uint64_t horizon) {
  std::vector<std::uint64_t> out{horizon};
  for (std::uint64_t t = num_arms; t > 0 && t < horizon; t *= 2) out.push_back(t);
  for (std::uint64_t t = 1; t < horizon; t *= 2) out.push_back(t);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline void validate_checkpoints(const std::vector<std::uint64_t>& cps, std::uint64_t horizon) {
  if (cps.empty()) throw ConfigError("checkpoint list is empty");
  for (std::size_t k = 0; k < cps.size(); ++k) {
    if (cps[k] == 0) throw ConfigError("checkpoint rounds start at 1");
    if (k > 0 && cps[k] <= cps[k - 1]) throw ConfigError("checkpoint rounds must be strictly increasing");
  }
  if (cps.back() != horizon) throw ConfigError("the last checkpoint must equal the horizon");
}

struct ClusterAudit {
  Theta theta_hat;
  double radius = 0.0;
  std::uint64_t plays = 0;
  bool truth_in_ball = false;

  bool operator==(const ClusterAudit&) const = default;
};

struct AuditRecord {
  std::uint64_t round = 0;
  ArmId arm = 0;
  Phase phase = Phase::index;
  double reward = 0.0;
  std::vector<double> indices;
  std::vector<ClusterAudit> clusters;  // UCB-D index rounds only

  bool operator==(const AuditRecord&) const = default;
};

struct RunTrace {
  PolicyKind policy = PolicyKind::ucb_d;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> regret;
  std::vector<std::uint64_t> final_counts;
  std::vector<AuditRecord> audit;
  std::uint64_t diagnostics = 0;

  bool operator==(const RunTrace&) const = default;
};

/// Sum_i N_i * gap_i, accumulated in arm order.
inline double pseudo_regret(const BanditInstance& inst, const std::vector<std::uint64_t>& counts) {
  double r = 0.0;
  for (ArmId i = 0; i < counts.size(); ++i) r += static_cast<double>(counts[i]) * inst.gap(i);
  return r;
}

/// One seeded episode: select, draw the reward from the true instance, update.
inline RunTrace run_single(const BanditInstance& inst, PolicyKind kind, std::uint64_t horizon, std::uint64_t seed,
                           double kappa, const RunOptions& opt = {}) {
  if (horizon < inst.num_arms())
    throw ConfigError("horizon " + std::to_string(horizon) + " is shorter than the " +
                      std::to_string(inst.num_arms()) + " arms");
  RunTrace trace;
  trace.policy = kind;
  trace.seed = seed;
  trace.checkpoints = opt.checkpoints.empty() ? default_checkpoints(inst.num_arms(), horizon) : opt.checkpoints;
  validate_checkpoints(trace.checkpoints, horizon);

  ScopedDiagnosticSink sink([&trace](DiagnosticKind, const std::string&) { ++trace.diagnostics; });
  CounterRng rewards(CounterRng::derive_key(seed, kRewardStream));
  auto policy = make_policy(kind, inst, UcbdOptions{kappa, opt.recompute_every},
                            CounterRng::derive_key(seed, kPolicyStream));
  const auto* ucbd = dynamic_cast<const UcbD*>(policy.get());

  double reward_sum = 0.0;
  std::size_t next = 0;
  for (std::uint64_t t = 1; t <= horizon; ++t) {
    Decision d = policy->select(t);
    const Cluster& cl = inst.cluster_of(d.arm);
    const double r = inst.arm(d.arm).sample(cl.theta_star, rewards);
    if (opt.audit) {
      AuditRecord rec{t, d.arm, d.phase, r, d.indices, {}};
      if (ucbd != nullptr && d.phase == Phase::index) {
        for (const auto& c : inst.clusters()) {
          const auto& ball = ucbd->ball(c.id);
          rec.clusters.push_back({ucbd->estimate(c.id).theta_hat, ball.radius, ucbd->history(c.id).total(),
                                  ball_contains(ball, c, c.theta_star)});
        }
      }
      trace.audit.push_back(std::move(rec));
    }
    policy->update(d.arm, r);
    reward_sum += r;
    if (t == trace.checkpoints[next]) {
      trace.regret.push_back(opt.realized_regret ? static_cast<double>(t) * inst.best_mean() - reward_sum
                                                 : pseudo_regret(inst, policy->counts()));
      ++next;
    }
  }
  trace.final_counts = policy->counts();
  return trace;
}

// ---------------------------------------------------------------------------
// Replications

struct ExperimentConfig {
  std::vector<PolicyKind> policies;
  std::uint64_t horizon = 0;
  std::uint64_t replications = 1;
  std::uint64_t base_seed = 0;
  double kappa = 1.0;
  RunOptions options;
  unsigned threads = 1;
};

struct AggregatePoint {
  std::uint64_t t = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ci95 = 0.0;
};

struct AggregateSeries {
  PolicyKind policy = PolicyKind::ucb_d;
  std::vector<AggregatePoint> points;
};

struct MonteCarloResult {
  std::vector<RunTrace> traces;  // policy-major, then replication order
  std::vector<AggregateSeries> aggregate;

  const AggregateSeries& series(PolicyKind k) const {
    for (const auto& s : aggregate)
      if (s.policy == k) return s;
    throw StateError(std::string("no series for policy ") + to_string(k));
  }
};

/// Mean, sample sd and normal-approximation 95% half-width per checkpoint.
/// A single replication has sd and half-width 0.
inline AggregateSeries aggregate_traces(PolicyKind kind, const std::vector<const RunTrace*>& runs) {
  AggregateSeries s{kind, {}};
  if (runs.empty()) return s;
  const double n = static_cast<double>(runs.size());
  for (std::size_t c = 0; c < runs.front()->checkpoints.size(); ++c) {
    double sum = 0.0;
    for (const auto* r : runs) sum += r->regret[c];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto* r : runs) ss += (r->regret[c] - mean) * (r->regret[c] - mean);
    const double sd = runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.points.push_back({runs.front()->checkpoints[c], mean, sd, 1.96 * sd / std::sqrt(n)});
  }
  return s;
}

/// Runs seeds base .. base + R - 1 for every policy. Output is independent of
/// the thread count: each job writes its own slot and aggregation folds in
/// replication order.
inline MonteCarloResult run_monte_carlo(const BanditInstance& inst, const ExperimentConfig& cfg) {
  if (cfg.policies.empty()) throw ConfigError("no policies to run");
  if (cfg.replications == 0) throw ConfigError("replications must be at least 1");
  if (cfg.horizon < inst.num_arms()) throw ConfigError("horizon is shorter than the number of arms");

  const std::size_t reps = cfg.replications;
  const std::size_t jobs = cfg.policies.size() * reps;
  MonteCarloResult out;
  out.traces.resize(jobs);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::string err_msg;
  std::size_t err_job = jobs;

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs && !failed; j = next++) {
      const PolicyKind kind = cfg.policies[j / reps];
      const std::uint64_t seed = cfg.base_seed + j % reps;
      try {
        out.traces[j] = run_single(inst, kind, cfg.horizon, seed, cfg.kappa, cfg.options);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (j < err_job) {
          err_job = j;
          err_msg = std::string("replication with seed ") + std::to_string(seed) + " (" + to_string(kind) +
                    ") failed: " + e.what();
        }
        failed = true;
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(jobs)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  if (failed) throw Error(err_msg);

  for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
    std::vector<const RunTrace*> runs;
    for (std::size_t k = 0; k < reps; ++k) runs.push_back(&out.traces[p * reps + k]);
    out.aggregate.push_back(aggregate_traces(cfg.policies[p], runs));
  }
  return out;
}

// ---------------------------------------------------------------------------
// MLE consistency

inline double median(std::vector<double> v) {
  if (v.empty()) throw StateError("median of an empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of y on x.
inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Pull plan over the arms of one cluster; proportions empty means round-robin.
struct PullSchedule {
  std::vector<double> proportions;
};

struct ConsistencyRow {
  std::uint64_t n = 0;
  double median_kl = 0.0;
};

struct ConsistencyResult {
  std::vector<ConsistencyRow> rows;
  /// Slope of log(median KL) against log(n).
  double loglog_slope = 0.0;
};

/// Pulls the arms of one cluster by a fixed plan and tracks the median over
/// replications of KL_arm(theta* || theta_hat_n) at each n of `n_grid`.
inline ConsistencyResult mle_consistency_experiment(const BanditInstance& inst, ClusterId c,
                                                    const std::vector<std::uint64_t>& n_grid,
                                                    std::uint64_t replications, std::uint64_t base_seed,
                                                    const PullSchedule& schedule = {}, std::size_t kl_arm = 0) {
  const Cluster& cl = inst.cluster(c);
  if (n_grid.empty()) throw ConfigError("n grid is empty");
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    if (n_grid[k] == 0) throw ConfigError("sample sizes must be positive");
    if (k > 0 && n_grid[k] <= n_grid[k - 1]) throw ConfigError("sample sizes must be strictly increasing");
  }
  if (replications == 0) throw ConfigError("replications must be at least 1");
  if (kl_arm >= cl.size()) throw ConfigError("kl arm is not in the cluster");
  std::vector<double> share = schedule.proportions;
  if (share.empty()) share.assign(cl.size(), 1.0 / static_cast<double>(cl.size()));
  if (share.size() != cl.size()) throw ConfigError("schedule needs one proportion per arm of the cluster");

  std::vector<std::vector<double>> kls(n_grid.size());
  for (std::uint64_t rep = 0; rep < replications; ++rep) {
    CounterRng rng(CounterRng::derive_key(base_seed + rep, kRewardStream));
    ClusterHistory h(cl);
    std::size_t next = 0;
    for (std::uint64_t s = 1; s <= n_grid.back(); ++s) {
      // Largest deficit share * s - N_k; lowest position wins ties.
      std::size_t pick = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < cl.size(); ++k) {
        const double deficit = share[k] * static_cast<double>(s) - static_cast<double>(h.count(k));
        if (deficit > best) {
          best = deficit;
          pick = k;
        }
      }
      h.record(pick, cl.arms[pick].sample(cl.theta_star, rng));
      if (s == n_grid[next]) {
        kls[next].push_back(cl.arms[kl_arm].kl(cl.theta_star, mle(h).theta_hat));
        ++next;
      }
    }
  }
  ConsistencyResult res;
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    res.rows.push_back({n_grid[k], median(kls[k])});
    lx.push_back(std::log(static_cast<double>(n_grid[k])));
    ly.push_back(std::log(res.rows.back().median_kl));
  }
  res.loglog_slope = n_grid.size() > 1 ? least_squares(lx, ly).slope : 0.0;
  return res;
}

}  // namespace depbandits
