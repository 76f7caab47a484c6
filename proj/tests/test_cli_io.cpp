#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "hsurvey/cli_io.hpp"
#include "test_util.hpp"

using namespace hsurvey;
using namespace hsurvey::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("hsurvey_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path file(const std::string& name, const std::string& contents) const {
    const auto p = path_ / name;
    std::ofstream(p) << contents;
    return p;
  }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string> kCoralArgs = {"plan",           "--sigma-p",    "0.16", "--sigma-b", "0.047",
                                             "--sigma-a",      "0",            "--d",  "0.058",     "--delta",
                                             "0.05",           "--cost-primary", "10", "--cost-collect", "1",
                                             "--cost-aux",     "0"};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HSURVEY_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(ParseConfig, MinimalPlan) {
  const auto cfg = parse_config(kCoralArgs);
  EXPECT_EQ(cfg.command, Command::Plan);
  EXPECT_DOUBLE_EQ(cfg.sigma_p, 0.16);
  EXPECT_DOUBLE_EQ(cfg.sigma_b, 0.047);
  EXPECT_DOUBLE_EQ(cfg.d, 0.058);
  EXPECT_DOUBLE_EQ(cfg.costs.c_a, 10.0);
  EXPECT_DOUBLE_EQ(cfg.costs.c_c, 1.0);
  EXPECT_TRUE(cfg.warnings.empty());
  EXPECT_NO_THROW(cfg.planning_inputs());
}

TEST(ParseConfig, NegativeCostNamesField) {
  auto args = kCoralArgs;
  args[12] = "-3";  // --cost-primary
  EXPECT_INVALID(parse_config(args), "--cost-primary");
}

TEST(ParseConfig, MissingAndUnknownFields) {
  EXPECT_INVALID(parse_config({"plan", "--sigma-p", "0.1"}), "requires --");
  EXPECT_INVALID(parse_config({"plan", "--sigma-q", "0.1"}), "usage");
  EXPECT_INVALID(parse_config({"frobnicate"}), "usage");
  EXPECT_INVALID(parse_config({"plan", "--sigma-p", "abc"}), "--sigma-p");
}

TEST(ParseConfig, FlagsOverrideConfigFileWithWarning) {
  TempDir dir;
  const auto conf = dir.file("run.conf",
                             "# coral survey\n"
                             "sigma-p = 0.2\n"
                             "sigma-b = 0.047\n"
                             "d = 0.058\n"
                             "cost-collect = 1\n"
                             "cost-primary = 10\n");
  const auto cfg = parse_config({"plan", "--config", conf.string(), "--sigma-p", "0.16"});
  EXPECT_DOUBLE_EQ(cfg.sigma_p, 0.16);
  EXPECT_DOUBLE_EQ(cfg.sigma_b, 0.047);
  ASSERT_EQ(cfg.warnings.size(), 1u);
  EXPECT_NE(cfg.warnings[0].find("sigma-p"), std::string::npos);

  const auto bad = dir.file("bad.conf", "sigma-p = 0.2\ncolour = blue\n");
  EXPECT_INVALID(parse_config({"plan", "--config", bad.string()}), "unknown key 'colour'");
}

TEST(ParseConfig, BudgetsAndPaths) {
  TempDir dir;
  const std::vector<std::string> base = {"simulate", "--cost-collect", "1", "--cost-primary", "10",
                                         "--mu-p",   "0.3",            "--sigma-p", "0.16", "--sigma-b", "0.05"};
  auto ok = base;
  ok.insert(ok.end(), {"--budget", "60,120,180"});
  const auto cfg = parse_config(ok, dir.path().string());
  EXPECT_EQ(cfg.budgets, (std::vector<double>{60, 120, 180}));
  EXPECT_EQ(cfg.outdir, dir.path());

  auto unsorted = base;
  unsorted.insert(unsorted.end(), {"--budget", "60,30"});
  EXPECT_INVALID(parse_config(unsorted), "increasing");
  auto negative = base;
  negative.insert(negative.end(), {"--budget", "-5"});
  EXPECT_INVALID(parse_config(negative), "positive");

  EXPECT_INVALID(parse_config({"estimate", "--design", "offset", "--input", (dir.path() / "nope.csv").string()}),
                 "file not found");
}

TEST(ParseConfig, ConfusionNeedsBinaryFlag) {
  auto args = kCoralArgs;
  args.insert(args.end(), {"--alpha", "0.9", "--beta", "0.9"});
  EXPECT_INVALID(parse_config(args), "--binary");
  args.push_back("--binary");
  EXPECT_TRUE(parse_config(args).confusion.has_value());
}

TEST(IngestPaired, FullyAnnotatedPool) {
  TempDir dir;
  std::string csv = "sample_id,aux_value,primary_value\n";
  for (int i = 0; i < 40; ++i) csv += "img" + std::to_string(i) + ",0.3,0.25\n";
  const auto data = ingest_paired_csv(dir.file("pool.csv", csv));
  EXPECT_EQ(data.samples.n_a(), 40u);
  EXPECT_EQ(data.samples.n_b(), 40u);
}

TEST(IngestPaired, MixedRowsMoveToPrefix) {
  TempDir dir;
  const auto data = ingest_paired_csv(dir.file("m.csv",
                                               "sample_id,aux_value,primary_value\n"
                                               "a,0.1,\n"
                                               "b,0.2,0.25\n"
                                               "c,0.3,\n"
                                               "d,0.4,0.35\n"));
  EXPECT_EQ(data.samples.n_a(), 2u);
  EXPECT_EQ(data.samples.n_b(), 4u);
  EXPECT_EQ(data.ids, (std::vector<std::string>{"b", "d", "a", "c"}));
  EXPECT_EQ(data.original_row, (std::vector<std::size_t>{1, 3, 0, 2}));
  EXPECT_DOUBLE_EQ(data.samples.paired_aux()[1], 0.4);
}

TEST(IngestPaired, Errors) {
  TempDir dir;
  EXPECT_INVALID(ingest_paired_csv(dir.file("e.csv", "")), "empty file");
  EXPECT_INVALID(ingest_paired_csv(dir.file("h.csv", "sample_id,aux_value,primary_value\n")), "no data rows");
  EXPECT_INVALID(ingest_paired_csv(dir.file("r.csv", "sample_id,aux_value,primary_value\na,0.1,0.2\nb,1.2,\n")),
                 "row 3");
  EXPECT_INVALID(ingest_paired_csv(dir.file("d.csv", "sample_id,aux_value,primary_value\na,0.1,0.2\na,0.2,\n")),
                 "duplicate sample_id 'a'");
  EXPECT_INVALID(ingest_paired_csv(dir.file("w.csv", "id,aux,primary\na,0.1,0.2\n")), "expected header");
}

TEST(IngestPoint, Aggregation) {
  TempDir dir;
  std::string csv = "sample_id,point_id,aux_label,primary_label\n";
  for (int p = 0; p < 200; ++p) csv += "s1," + std::to_string(p) + ",1,\n";
  for (int p = 0; p < 200; ++p) csv += "s2," + std::to_string(p) + "," + (p < 137 ? "1" : "0") + "," + (p < 100 ? "1" : "0") + "\n";
  const auto data = ingest_csv(dir.file("points.csv", csv));
  ASSERT_EQ(data.samples.n_b(), 2u);
  ASSERT_EQ(data.samples.n_a(), 1u);
  EXPECT_EQ(data.ids[0], "s2");
  EXPECT_DOUBLE_EQ(data.samples.aux_values()[0], 0.685);
  EXPECT_DOUBLE_EQ(data.samples.primary_values()[0], 0.5);
  EXPECT_DOUBLE_EQ(data.samples.aux_values()[1], 1.0);
  EXPECT_EQ(data.point_pairs.size(), 200u);
}

TEST(IngestPoint, Errors) {
  TempDir dir;
  EXPECT_INVALID(ingest_point_csv(dir.file("nb.csv", "sample_id,point_id,aux_label,primary_label\ns,1,1,\ns,2,2,\n")),
                 "row 3");
  EXPECT_INVALID(ingest_point_csv(dir.file("pm.csv", "sample_id,point_id,aux_label,primary_label\ns,1,1,1\ns,2,0,\n")),
                 "only some");
  EXPECT_INVALID(ingest_point_csv(dir.file("dp.csv", "sample_id,point_id,aux_label,primary_label\ns,1,1,1\ns,1,0,0\n")),
                 "duplicate point_id");
}

TEST(PairedCsv, RoundTripIsExact) {
  TempDir dir;
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::string csv = "sample_id,aux_value,primary_value\n";
  char buf[64];
  for (int i = 0; i < 100; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", u(gen));
    csv += "id" + std::to_string(i) + "," + buf + ",";
    if (gen() % 3 == 0) {
      std::snprintf(buf, sizeof buf, "%.17g", u(gen));
      csv += buf;
    }
    csv += "\n";
  }
  const auto original = ingest_paired_csv(dir.file("in.csv", csv));
  write_paired_csv(dir.path() / "out.csv", original);
  EXPECT_EQ(slurp(dir.path() / "out.csv"), csv);
  const auto again = ingest_paired_csv(dir.path() / "out.csv");
  EXPECT_TRUE(std::equal(original.samples.aux_values().begin(), original.samples.aux_values().end(),
                         again.samples.aux_values().begin()));
  EXPECT_EQ(original.ids, again.ids);
}

TEST(Emit, CoralPlanFiles) {
  TempDir dir;
  auto args = kCoralArgs;
  args.insert(args.end(), {"--outdir", dir.path().string()});
  std::ostringstream out, err;
  ASSERT_EQ(main_entry(args, out, err), kExitOk) << err.str();

  const auto plan = nlohmann::json::parse(slurp(dir.path() / "plan.json"));
  EXPECT_EQ(plan["design"], "HybridOffset");
  EXPECT_EQ(plan["n_b"], 53);
  EXPECT_EQ(plan["n_a"], 5);
  EXPECT_DOUBLE_EQ(plan["tsc"].get<double>(), 103.0);
  EXPECT_NEAR(plan["diagnostics"]["sigma_delta"].get<double>(), 0.0944380317216, 1e-13);
  EXPECT_DOUBLE_EQ(plan["diagnostics"]["k"].get<double>(), 10.0);
  EXPECT_DOUBLE_EQ(plan["diagnostics"]["k_prime"].get<double>(), 11.0);

  std::ifstream tradeoff(dir.path() / "tradeoff.csv");
  std::string header, first;
  std::getline(tradeoff, header);
  std::getline(tradeoff, first);
  EXPECT_EQ(header, "n_b,n_a");
  EXPECT_EQ(first, "29.2334559482,29.2334559482");

  std::ifstream diff(dir.path() / "tsc_diff.csv");
  std::getline(diff, header);
  EXPECT_EQ(header, "k,sigma_delta,tsc_conventional,tsc_hybrid_offset,difference");
}

TEST(Emit, TwelveSignificantDigits) {
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_number(103.0), "103");
  EXPECT_EQ(format_number(123456789012345.0), "1.23456789012e+14");
}

TEST(Emit, UnwritablePath) {
  TempDir dir;
  const auto blocker = dir.file("blocker", "x");
  const auto in = PlanningInputs::make(0.16, 0, 0.047, CostModel{1, 10, 0}, PrecisionTarget(0.058, 0.05));
  EXPECT_HS_ERROR(emit_tradeoff_csv(blocker / "sub" / "t.csv", in), ErrorKind::Io, "cannot write");
}

TEST(Estimate, OffsetFromCsv) {
  TempDir dir;
  const auto csv = dir.file("s.csv",
                            "sample_id,aux_value,primary_value\n"
                            "a,0.6,0.5\nb,0.6,0.5\nc,0.6,\nd,0.6,\n");
  std::ostringstream out, err;
  ASSERT_EQ(main_entry({"estimate", "--design", "offset", "--input", csv.string(), "--outdir", dir.path().string()},
                       out, err),
            kExitOk)
      << err.str();
  const auto doc = nlohmann::json::parse(slurp(dir.path() / "estimate.json"));
  EXPECT_NEAR(doc["estimate"].get<double>(), 0.5, 1e-12);
  EXPECT_EQ(doc["n_a"], 2);
}

TEST(Estimate, ClampIsOptIn) {
  TempDir dir;
  const auto csv = dir.file("s.csv", "sample_id,aux_value,primary_value\na,0.4,0.1\nb,0,\nc,0,\n");
  std::ostringstream out, err;
  const std::vector<std::string> base = {"estimate", "--design", "offset", "--input", csv.string(),
                                         "--outdir", dir.path().string()};
  ASSERT_EQ(main_entry(base, out, err), kExitOk);
  EXPECT_LT(nlohmann::json::parse(slurp(dir.path() / "estimate.json"))["estimate"].get<double>(), 0.0);
  auto clamped = base;
  clamped.push_back("--clamp");
  ASSERT_EQ(main_entry(clamped, out, err), kExitOk);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir.path() / "estimate.json"))["estimate"].get<double>(), 0.0);
}

TEST(ExitCodes, StableContract) {
  TempDir dir;
  const std::string outdir = " --outdir " + dir.path().string();
  const std::string coral =
      "plan --sigma-p 0.16 --sigma-b 0.047 --d 0.058 --cost-primary 10 --cost-collect 1" + outdir;
  EXPECT_EQ(run_cli(coral), 0);
  EXPECT_EQ(run_cli("plan --sigma-p 0.16" + outdir), 1);
  EXPECT_EQ(run_cli("plan --bogus 1" + outdir), 1);
  EXPECT_EQ(run_cli(coral + " --budget 5"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Simulate, ByteIdenticalAcrossThreadCounts) {
  TempDir a, b, c;
  const std::string common =
      "simulate --mu-p 0.3 --sigma-p 0.16 --sigma-b 0.047 --cost-primary 10 --cost-collect 1 "
      "--budget 60,120,240 --replicates 200 --seed 42 --pool-size 60";
  ASSERT_EQ(run_cli(common + " --threads 1 --outdir " + a.path().string()), 0);
  ASSERT_EQ(run_cli(common + " --threads 1 --outdir " + b.path().string()), 0);
  ASSERT_EQ(run_cli(common + " --threads 8 --outdir " + c.path().string()), 0);
  const auto first = slurp(a.path() / "simulation.csv");
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, slurp(b.path() / "simulation.csv"));
  EXPECT_EQ(first, slurp(c.path() / "simulation.csv"));
}
