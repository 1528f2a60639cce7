#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "depbandits/bounds.hpp"
#include "depbandits/config.hpp"
#include "depbandits/errors.hpp"
#include "depbandits/harness.hpp"
#include "depbandits/instance.hpp"
#include "depbandits/output.hpp"
#include "depbandits/plot.hpp"

namespace depbandits::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kConfigFailure = 1, kRuntimeFailure = 2, kCertificationFailure = 3 };

struct Overrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> horizon;
  std::optional<std::uint64_t> reps;
  std::optional<std::string> kappa;  // a number or "floor"
  bool audit = false;
  std::optional<unsigned> threads;
};

/// --threads, else DEPBANDITS_THREADS, else the hardware concurrency.
inline unsigned resolve_threads(const std::optional<unsigned>& flag) {
  if (flag) {
    if (*flag == 0) throw ConfigError("--threads must be at least 1");
    return *flag;
  }
  if (const char* env = std::getenv("DEPBANDITS_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (*end != '\0' || v == 0 || v > 4096)
      throw ConfigError(std::string("DEPBANDITS_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void apply_overrides(ExperimentFile& f, const Overrides& o) {
  if (o.seed) f.seed = *o.seed;
  if (o.horizon) {
    f.horizon = *o.horizon;
    // Configured checkpoints belong to the configured horizon.
    f.checkpoints.clear();
  }
  if (o.reps) {
    if (*o.reps == 0) throw ConfigError("--reps must be at least 1");
    f.replications = *o.reps;
  }
  if (o.kappa) {
    if (*o.kappa == "floor") {
      f.kappa = KappaSetting{KappaMode::floor, 0.0};
    } else {
      char* end = nullptr;
      const double v = std::strtod(o.kappa->c_str(), &end);
      if (o.kappa->empty() || *end != '\0' || !(v > 0.0) || !std::isfinite(v))
        throw ConfigError("--kappa expects a positive number or 'floor', got '" + *o.kappa + "'");
      f.kappa = KappaSetting{KappaMode::value, v};
    }
  }
  if (o.audit) f.audit = true;
}

/// Explicit --out, then the config's output_dir, then a directory named after the config next to it.
inline std::filesystem::path output_directory(const ExperimentFile& f, const Overrides& o) {
  if (o.out) return *o.out;
  if (f.output_dir) return *f.output_dir;
  return f.path.parent_path() / ("out-" + f.path.stem().string());
}

/// Collects outputs in memory and writes them together; on any write failure
/// the files already written by this command are removed.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(std::string name, std::string contents) { files_.emplace_back(std::move(name), std::move(contents)); }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& f : files_) n.push_back(f.first);
    return n;
  }

  void commit() {
    std::vector<std::filesystem::path> written;
    try {
      std::filesystem::create_directories(dir_);
      for (const auto& [name, body] : files_) {
        const auto p = dir_ / name;
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
        written.push_back(p);
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        out.close();
        if (!out) throw std::runtime_error("failed writing " + p.string());
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) std::filesystem::remove(p, ec);
      throw;
    }
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Maps library exceptions onto the exit-code contract.
template <typename Fn>
int guarded(std::ostream& err, const char* command, Fn&& fn) {
  try {
    return fn();
  } catch (const AssumptionViolation& e) {
    err << command << ": certification failed: " << e.what() << '\n';
    return kCertificationFailure;
  } catch (const ConfigError& e) {
    err << command << ": configuration error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const TypeError& e) {
    err << command << ": configuration error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const DomainError& e) {
    err << command << ": configuration error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::exception& e) {
    err << command << ": runtime failure: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

inline ojson provenance(const ExperimentFile& f, const char* command) {
  ojson p;
  p["command"] = command;
  p["version"] = kVersion;
  p["config"] = f.path.filename().string();
  p["config_fnv1a64"] = hex64(f.hash);
  return p;
}

inline std::string violation_summary(const StructuralConstants& s) {
  std::ostringstream msg;
  std::size_t shown = 0, total = 0;
  for (const auto& c : s.clusters)
    for (const auto& v : c.violations) {
      if (shown++ < 4)
        msg << (shown > 1 ? "; " : "") << "cluster " << c.cluster + 1 << " lb(" << v.j + 1 << "," << v.i + 1
            << ") = " << format_double(v.value);
      ++total;
    }
  if (total > shown) msg << "; " << total - shown << " more";
  return msg.str();
}

inline int cmd_simulate(const std::filesystem::path& config, const Overrides& o, std::ostream& out,
                        std::ostream& err) {
  return guarded(err, "simulate", [&] {
    ExperimentFile f = load_experiment(config);
    apply_overrides(f, o);
    const unsigned threads = resolve_threads(o.threads);
    const BanditInstance inst = build_instance(f.instance);
    const StructuralConstants constants = certify_instance(inst, f.certification);
    if (!constants.satisfied()) {
      if (!f.force)
        throw AssumptionViolation(violation_summary(constants) +
                                  " (set certification.force to run anyway)");
      err << "simulate: warning: running an uncertified instance: " << violation_summary(constants) << '\n';
    }
    const ResolvedKappa kappa = resolve_kappa(f, inst, constants);

    ExperimentConfig cfg;
    cfg.policies = f.policies;
    cfg.horizon = f.horizon;
    cfg.replications = f.replications;
    cfg.base_seed = f.seed;
    cfg.kappa = kappa.value;
    cfg.options.checkpoints = f.checkpoints;
    cfg.options.audit = f.audit;
    cfg.options.realized_regret = f.realized_regret;
    cfg.options.recompute_every = f.recompute_every;
    cfg.threads = threads;
    const MonteCarloResult res = run_monte_carlo(inst, cfg);

    const auto dir = output_directory(f, o);
    OutputSet files(dir);
    std::ostringstream traces, aggregate;
    write_traces_csv(traces, res);
    write_aggregate_csv(aggregate, res);
    files.add("traces.csv", traces.str());
    files.add("aggregate.csv", aggregate.str());
    if (f.audit) {
      std::ostringstream audit;
      write_audit_jsonl(audit, res);
      files.add("audit.jsonl", audit.str());
    }

    ojson m;
    m["schema_version"] = kOutputSchemaVersion;
    m.update(provenance(f, "simulate"));
    ojson eff;
    eff["horizon"] = f.horizon;
    eff["replications"] = f.replications;
    eff["base_seed"] = f.seed;
    eff["kappa"] = kappa.value;
    eff["kappa_source"] = kappa.source;
    eff["kappa_floor"] = kappa.floor ? json_number(*kappa.floor) : ojson(nullptr);
    eff["strict_theory"] = f.strict_theory;
    eff["policies"] = ojson::array();
    for (auto p : f.policies) eff["policies"].push_back(to_string(p));
    eff["checkpoints"] = res.traces.front().checkpoints;
    eff["regret"] = f.realized_regret ? "realized" : "pseudo";
    eff["recompute_every"] = f.recompute_every;
    eff["audit"] = f.audit;
    eff["certified"] = constants.satisfied();
    m["effective"] = eff;
    ojson seeds = ojson::array();
    for (std::uint64_t k = 0; k < f.replications; ++k) seeds.push_back(f.seed + k);
    m["seeds"] = seeds;
    std::uint64_t diagnostics = 0;
    for (const auto& t : res.traces) diagnostics += t.diagnostics;
    m["diagnostics"] = diagnostics;
    ojson outputs = files.names();
    outputs.push_back("manifest.json");
    m["outputs"] = outputs;
    files.add("manifest.json", m.dump(2) + "\n");
    files.commit();

    out << "simulate: " << f.policies.size() << " policies x " << f.replications << " replications, T=" << f.horizon
        << ", kappa=" << format_double(kappa.value) << " (" << kappa.source << ") -> " << dir.string() << '\n';
    for (const auto& s : res.aggregate)
      out << "  " << to_string(s.policy) << ": mean regret at T = " << format_double(s.points.back().mean)
          << " +/- " << format_double(s.points.back().ci95) << '\n';
    return static_cast<int>(kOk);
  });
}

inline int cmd_bounds(const std::filesystem::path& config, const Overrides& o, std::ostream& out,
                      std::ostream& err) {
  return guarded(err, "bounds", [&] {
    ExperimentFile f = load_experiment(config);
    apply_overrides(f, o);
    const BanditInstance inst = build_instance(f.instance);
    const StructuralConstants constants = certify_instance(inst, f.certification);
    const ResolvedKappa kappa = resolve_kappa(f, inst, constants);
    const BoundReport r = bound_report(inst, constants, kappa.value);

    ojson doc = bounds_json(r, kappa.source);
    ojson full = provenance(f, "bounds");
    full.update(doc);
    full["certified"] = constants.satisfied();

    const auto dir = output_directory(f, o);
    OutputSet files(dir);
    files.add("bounds.json", full.dump(2) + "\n");
    files.commit();

    out << "bounds: lower coefficient " << format_double(r.lower_coefficient) << ", upper coefficient "
        << format_double(r.upper_coefficient) << " (kappa " << format_double(kappa.value) << ", "
        << r.suboptimal_clusters << " suboptimal clusters" << (r.partial ? ", partial" : "") << ") -> "
        << (dir / "bounds.json").string() << '\n';
    return static_cast<int>(kOk);
  });
}

inline int cmd_certify(const std::filesystem::path& config, const Overrides& o, std::ostream& out,
                       std::ostream& err) {
  return guarded(err, "certify", [&] {
    ExperimentFile f = load_experiment(config);
    apply_overrides(f, o);
    const BanditInstance inst = build_instance(f.instance);
    const StructuralConstants constants = certify_instance(inst, f.certification);

    ojson full = provenance(f, "certify");
    full.update(constants_json(inst, constants, f.certification));
    const auto dir = output_directory(f, o);
    OutputSet files(dir);
    files.add("constants.json", full.dump(2) + "\n");
    files.commit();

    for (const auto& c : constants.clusters)
      out << "certify: cluster " << c.cluster + 1 << ": max lb " << format_double(c.max_lb()) << ", max B "
          << format_double(c.max_B()) << (c.satisfied() ? "" : ", FAILED") << '\n';
    // The constants file is kept so a failing cluster can be inspected.
    if (!constants.satisfied()) throw AssumptionViolation(violation_summary(constants));
    return static_cast<int>(kOk);
  });
}

inline int cmd_plot(const std::filesystem::path& csv, const std::filesystem::path& svg, std::ostream& out,
                    std::ostream& err) {
  return guarded(err, "plot", [&] {
    std::ifstream in(csv, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + csv.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::vector<PlotSeries> series;
    try {
      series = parse_aggregate_csv(buf.str());
    } catch (const ConfigError& e) {
      throw ConfigError(csv.string() + ": " + e.what());
    }
    // The title is fixed so the bytes depend on the CSV contents only.
    const std::string body = render_svg(series, "Regret");
    const auto dir = svg.has_parent_path() ? svg.parent_path() : std::filesystem::path(".");
    OutputSet files(dir);
    files.add(svg.filename().string(), body);
    files.commit();
    out << "plot: " << series.size() << " series -> " << svg.string() << '\n';
    return static_cast<int>(kOk);
  });
}

}  // namespace depbandits::cli
