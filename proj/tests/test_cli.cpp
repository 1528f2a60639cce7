#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "depbandits/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("depbandits_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args, const std::string& env = "") {
    const char* bin = std::getenv("DEPBANDITS_BIN");
    EXPECT_NE(bin, nullptr) << "DEPBANDITS_BIN is not set";
    const fs::path o = dir_ / "stdout.txt", e = dir_ / "stderr.txt";
    const std::string cmd = env + " '" + std::string(bin ? bin : "depbandits") + "' " + args + " >'" + o.string() +
                            "' 2>'" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }

  fs::path config(const std::string& name, const json& doc) {
    const auto p = dir_ / name;
    write_file(p, doc.dump(2));
    return p;
  }

  fs::path dir_;
};

json bernoulli_cluster(double theta) {
  return {{"theta_star", {theta}},
          {"space", {{"kind", "interval"}, {"lower", 0.01}, {"upper", 0.99}, {"grid_step", 0.01}}},
          {"arms", {{{"family", "bernoulli_link"}, {"link", "identity"}}, {{"family", "bernoulli_link"}, {"link", "mirror"}}}}};
}

json gaussian_cluster(double theta, std::vector<double> scales) {
  json arms = json::array();
  for (double s : scales) arms.push_back({{"family", "gaussian_scaled"}, {"scale", s}});
  return {{"theta_star", {theta}},
          {"space", {{"kind", "interval"}, {"lower", -1.0}, {"upper", 1.0}, {"grid_step", 0.01}}},
          {"arms", arms}};
}

json experiment(json clusters) {
  return {{"schema_version", 1},
          {"instance", {{"clusters", clusters}}},
          {"policies", {"ucb_d", "vanilla_ucb"}},
          {"horizon", 400},
          {"replications", 4},
          {"seed", 3},
          {"kappa", 0.5}};
}

json fig1a_small() { return experiment({bernoulli_cluster(0.1), bernoulli_cluster(0.5), bernoulli_cluster(0.2)}); }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(Cli, UnknownKeyIsRejected) {
  auto doc = fig1a_small();
  doc["horizn"] = 10;
  auto r = run("simulate --config " + config("c.json", doc).string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("horizn"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "o"));
}

TEST_F(Cli, SyntaxErrorReportsLineAndColumn) {
  const auto p = dir_ / "broken.json";
  write_file(p, "{\n  \"schema_version\": 1,\n  \"horizon\": ,\n}\n");
  auto r = run("simulate --config " + p.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("broken.json:3:"), std::string::npos) << r.err;
}

TEST_F(Cli, FieldErrorsCarryTheirPath) {
  auto doc = fig1a_small();
  doc["instance"]["clusters"][0]["arms"][1]["family"] = "poisson";
  auto r = run("certify --config " + config("c.json", doc).string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("instance.clusters[0].arms[1].family"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingKappaNamesTheMissingFields) {
  auto doc = fig1a_small();
  doc.erase("kappa");
  auto r = run("bounds --config " + config("c.json", doc).string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("kappa_floor.L_p"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("kappa_floor.m"), std::string::npos) << r.err;

  doc["kappa_floor"] = {{"L_p", 1.0}};
  r = run("bounds --config " + config("c2.json", doc).string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("kappa_floor.m"), std::string::npos) << r.err;
  EXPECT_EQ(r.err.find("kappa_floor.L_p"), std::string::npos) << r.err;
}

TEST_F(Cli, FloorKappaFromConfigInputs) {
  auto doc = fig1a_small();
  doc.erase("kappa");
  doc["kappa_floor"] = {{"L_p", 1.0}, {"m", 4}};
  auto r = run("bounds --config " + config("c.json", doc).string() + " --out " + (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto rep = json::parse(slurp(dir_ / "o" / "bounds.json"));
  EXPECT_EQ(rep["kappa_source"], "floor");
  EXPECT_GT(rep["kappa"].get<double>(), 0.0);
}

TEST_F(Cli, StrictTheoryRejectsKappaBelowFloor) {
  auto doc = fig1a_small();
  doc["kappa_floor"] = {{"L_p", 1.0}, {"m", 4}};
  doc["strict_theory"] = true;
  auto r = run("simulate --config " + config("c.json", doc).string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("below the floor"), std::string::npos) << r.err;
  r = run("simulate --config " + config("c.json", doc).string() + " --out " + (dir_ / "o").string() +
          " --kappa floor --horizon 50 --reps 1");
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(Cli, OverridesAreRecordedInManifest) {
  auto doc = fig1a_small();
  doc["horizon"] = 50;
  const auto out = dir_ / "o";
  auto r = run("simulate --config " + config("c.json", doc).string() + " --out " + out.string() +
               " --horizon 1000 --reps 5 --seed 9 --kappa 0.75 --threads 2");
  ASSERT_EQ(r.code, 0) << r.err;
  auto m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["command"], "simulate");
  EXPECT_EQ(m["config"], "c.json");
  EXPECT_EQ(m["config_fnv1a64"], depbandits::cli::hex64(depbandits::fnv1a64(slurp(dir_ / "c.json"))));
  EXPECT_EQ(m["effective"]["horizon"], 1000);
  EXPECT_EQ(m["effective"]["replications"], 5);
  EXPECT_EQ(m["effective"]["base_seed"], 9);
  EXPECT_EQ(m["effective"]["kappa"], 0.75);
  EXPECT_EQ(m["effective"]["kappa_source"], "config");
  EXPECT_EQ(m["seeds"], json({9, 10, 11, 12, 13}));
  EXPECT_FALSE(m.contains("threads"));

  const auto cps = m["effective"]["checkpoints"].size();
  EXPECT_EQ(m["effective"]["checkpoints"].back(), 1000);
  EXPECT_EQ(count_lines(slurp(out / "traces.csv")), 1 + 2 * 5 * cps);
  EXPECT_EQ(count_lines(slurp(out / "aggregate.csv")), 1 + 2 * cps);
  EXPECT_EQ(slurp(out / "traces.csv").substr(0, 21), "policy,seed,t,regret\n");
  EXPECT_EQ(slurp(out / "aggregate.csv").substr(0, 22), "policy,t,mean,sd,ci95\n");
}

TEST_F(Cli, RerunsAreByteIdenticalAcrossThreadCounts) {
  auto doc = fig1a_small();
  doc["policies"] = {"ucb_d", "vanilla_ucb", "uniform_random"};
  doc["audit"] = true;
  const auto cfg = config("c.json", doc);
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir_ / "a").string() + " --threads 1").code, 0);
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir_ / "b").string() + " --threads 3").code, 0);
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir_ / "c").string(), "DEPBANDITS_THREADS=2").code,
            0);
  for (const char* f : {"traces.csv", "aggregate.csv", "manifest.json", "audit.jsonl"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "c" / f)) << f;
  }
  const auto audit = slurp(dir_ / "a" / "audit.jsonl");
  EXPECT_EQ(count_lines(audit), 3u * 4u * 400u);
  auto first = json::parse(audit.substr(0, audit.find('\n')));
  EXPECT_EQ(first["t"], 1);
  EXPECT_EQ(first["arm"], 1);
  EXPECT_EQ(first["phase"], "initialization");
}

TEST_F(Cli, BadThreadEnvironmentIsAConfigError) {
  auto r = run("simulate --config " + config("c.json", fig1a_small()).string() + " --out " + (dir_ / "o").string(),
               "DEPBANDITS_THREADS=many");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("DEPBANDITS_THREADS"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("simulate").code, 1);
  EXPECT_EQ(run("simulate --config " + (dir_ / "missing.json").string()).code, 1);
  EXPECT_EQ(run("simulate --config " + config("c.json", fig1a_small()).string() + " --kappa -1").code, 1);
}

TEST_F(Cli, UnwritableOutputIsARuntimeFailure) {
  write_file(dir_ / "blocker", "");
  auto r = run("simulate --config " + config("c.json", fig1a_small()).string() + " --out " +
               (dir_ / "blocker" / "o").string());
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST_F(Cli, CertifyGaussianScaleTwo) {
  auto doc = experiment({gaussian_cluster(0.3, {1.0, 2.0})});
  auto r = run("certify --config " + config("g.json", doc).string() + " --out " + (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto c = json::parse(slurp(dir_ / "o" / "constants.json"));
  EXPECT_TRUE(c["satisfied"].get<bool>());
  const auto& cl = c["clusters"][0];
  EXPECT_EQ(cl["cluster"], 1);
  EXPECT_EQ(cl["arms"], json({1, 2}));
  for (const auto& e : cl["lb"]) {
    const int j = e["pair"][0], i = e["pair"][1];
    const double expect = j == i ? 1.0 : (j == 2 ? 4.0 : 0.25);
    EXPECT_NEAR(e["lb"].get<double>(), expect, 1e-6) << e.dump();
  }
  EXPECT_NEAR(cl["B"][0].get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(cl["B"][1].get<double>(), 1.0, 1e-6);
  // Sigma_i / Gamma_i are the min / max of lb(j, i) over j.
  EXPECT_NEAR(cl["Sigma"][0].get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(cl["Gamma"][0].get<double>(), 4.0, 1e-6);
  EXPECT_NEAR(cl["Sigma"][1].get<double>(), 0.25, 1e-6);
  EXPECT_NEAR(cl["Gamma"][1].get<double>(), 1.0, 1e-6);
}

TEST_F(Cli, CertifyMirroredBernoulli) {
  auto r = run("certify --config " + config("b.json", fig1a_small()).string() + " --out " + (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto c = json::parse(slurp(dir_ / "o" / "constants.json"));
  ASSERT_EQ(c["clusters"].size(), 3u);
  for (const auto& cl : c["clusters"])
    for (const auto& e : cl["lb"]) EXPECT_NEAR(e["lb"].get<double>(), 1.0, 1e-6);
}

TEST_F(Cli, ConstantMeanArmFailsCertification) {
  auto doc = experiment({gaussian_cluster(0.3, {1.0, 0.0})});
  const auto cfg = config("z.json", doc);
  auto r = run("certify --config " + cfg.string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("cluster 1"), std::string::npos) << r.err;
  auto c = json::parse(slurp(dir_ / "o" / "constants.json"));
  EXPECT_FALSE(c["satisfied"].get<bool>());
  EXPECT_FALSE(c["clusters"][0]["violations"].empty());

  // simulate refuses the uncertified instance and leaves nothing behind
  r = run("simulate --config " + cfg.string() + " --out " + (dir_ / "s").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(fs::exists(dir_ / "s"));
}

TEST_F(Cli, BoundsReportForFig2a) {
  auto doc = experiment({gaussian_cluster(0.1, {1, 2, 3}), gaussian_cluster(0.5, {1, 2}), gaussian_cluster(0.2, {1, 2, 3})});
  doc["kappa"] = 2.0;
  auto r = run("bounds --config " + config("f.json", doc).string() + " --out " + (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto rep = json::parse(slurp(dir_ / "o" / "bounds.json"));
  EXPECT_EQ(rep["suboptimal_clusters"], 2);
  EXPECT_EQ(rep["kappa"], 2.0);
  double sum = 0.0;
  for (const auto& c : rep["clusters"]) {
    ASSERT_TRUE(c.contains("lower_term"));
    if (c["optimal"].get<bool>()) EXPECT_EQ(c["lower_term"], 0.0);
    sum += c["lower_term"].get<double>();
  }
  EXPECT_NEAR(rep["lower_bound_coefficient"].get<double>(), sum, 1e-12);
  EXPECT_GT(rep["lower_bound_coefficient"].get<double>(), 0.0);
  EXPECT_EQ(rep["arms"].size(), 8u);
  EXPECT_EQ(rep["arms"][0]["arm"], 1);
}

TEST_F(Cli, BoundsSingleClusterHasZeroLowerBound) {
  auto r = run("bounds --config " + config("k1.json", experiment({bernoulli_cluster(0.3)})).string() + " --out " +
               (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto rep = json::parse(slurp(dir_ / "o" / "bounds.json"));
  EXPECT_EQ(rep["lower_bound_coefficient"], 0.0);
  EXPECT_EQ(rep["suboptimal_clusters"], 0);
}

TEST_F(Cli, PlotRendersSeriesAndLegend) {
  const auto cfg = config("c.json", fig1a_small());
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir_ / "o").string()).code, 0);
  const auto csv = (dir_ / "o" / "aggregate.csv").string();
  ASSERT_EQ(run("plot " + csv + " " + (dir_ / "a.svg").string()).code, 0);
  ASSERT_EQ(run("plot " + csv + " " + (dir_ / "b.svg").string()).code, 0);
  const auto svg = slurp(dir_ / "a.svg");
  EXPECT_EQ(svg, slurp(dir_ / "b.svg"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("data-policy=\"ucb_d\""), std::string::npos);
  EXPECT_NE(svg.find("data-policy=\"vanilla_ucb\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"legend\""), std::string::npos);
  EXPECT_NE(svg.find(">ucb_d</text>"), std::string::npos);
  EXPECT_NE(svg.find("<polygon"), std::string::npos);
}

TEST_F(Cli, PlotRejectsEmptyAndMalformedCsv) {
  write_file(dir_ / "empty.csv", "");
  auto r = run("plot " + (dir_ / "empty.csv").string() + " " + (dir_ / "x.svg").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("empty"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "x.svg"));

  write_file(dir_ / "bad.csv", "policy,t,mean,sd,ci95\nucb_d,1,0,0,0\nucb_d,2,1.5,oops,0\n");
  r = run("plot " + (dir_ / "bad.csv").string() + " " + (dir_ / "x.svg").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("row 3"), std::string::npos) << r.err;

  write_file(dir_ / "short.csv", "policy,t,mean,sd,ci95\nucb_d,1,0\n");
  r = run("plot " + (dir_ / "short.csv").string() + " " + (dir_ / "x.svg").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("row 2"), std::string::npos) << r.err;
}

TEST(AggregateCsv, ParsesSeriesInOrder) {
  auto s = depbandits::parse_aggregate_csv("policy,t,mean,sd,ci95\nb,1,1,0,0\na,1,2,1,0.5\nb,2,3,0,0\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].policy, "b");
  EXPECT_EQ(s[0].points.size(), 2u);
  EXPECT_DOUBLE_EQ(s[1].points[0].ci95, 0.5);
  EXPECT_THROW(depbandits::parse_aggregate_csv("policy,t,mean,sd,ci95\n"), depbandits::ConfigError);
  EXPECT_THROW(depbandits::parse_aggregate_csv("policy,t,mean,sd,ci95\na,2,1,0,0\na,1,1,0,0\n"),
               depbandits::ConfigError);
}

TEST(BundledConfigs, ParseAndResolve) {
  for (const char* name : {"fig1a", "fig1b", "fig2a", "fig2b"}) {
    auto f = depbandits::load_experiment(fs::path(DEPBANDITS_CONFIG_DIR) / (std::string(name) + ".json"));
    EXPECT_EQ(f.horizon, 10000u) << name;
    EXPECT_EQ(f.replications, 100u) << name;
    ASSERT_TRUE(f.output_dir.has_value());
    EXPECT_TRUE(f.output_dir->is_absolute() || f.output_dir->parent_path() != fs::path());
  }
}
