#include "squeeze_amp/cli/runner.hpp"

#include <gtest/gtest.h>

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace squeeze_amp::cli;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("squeeze_amp_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  static int invoke(std::initializer_list<std::string> args) {
    std::vector<std::string> store{"squeeze-amp"};
    store.insert(store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : store) argv.push_back(s.data());
    return main_entry(static_cast<int>(argv.size()), argv.data());
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  // Parses results.csv into a header and rows of raw cells.
  static std::pair<std::vector<std::string>, std::vector<std::vector<std::string>>> csv(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line;
    std::vector<std::vector<std::string>> rows;
    auto split = [](const std::string& l) {
      std::vector<std::string> cells;
      std::stringstream ss(l);
      std::string c;
      while (std::getline(ss, c, ',')) cells.push_back(c);
      return cells;
    };
    std::getline(in, line);
    const auto header = split(line);
    while (std::getline(in, line))
      if (!line.empty()) rows.push_back(split(line));
    return {header, rows};
  }

  static std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    ADD_FAILURE() << "missing column " << name;
    return 0;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, PhaseSweepWritesTenRowsAtCoshGain) {
  const std::string cfg = write_config("c.json", R"({"experiment": "phase_sweep", "r": 1.38, "alpha_mag": 0.55, "N": 1})");
  ASSERT_EQ(invoke({"run", cfg, "--jobs", "2", "--output", out("o")}), exit_code::ok);
  const auto [header, rows] = csv(dir_ / "o" / "results.csv");
  ASSERT_EQ(rows.size(), 10u);
  const std::size_t g = column(header, "g_ha_abs");
  for (const auto& row : rows) EXPECT_NEAR(std::stod(row[g]) / std::cosh(1.38), 1.0, 1e-6);

  const json report = json::parse(slurp(dir_ / "o" / "report.json"));
  EXPECT_EQ(report.at("config").at("experiment"), "phase_sweep");
  EXPECT_EQ(report.at("config").at("phi_list").size(), 10u);
  EXPECT_TRUE(report.at("config").contains("leakage_tol"));
  EXPECT_TRUE(report.contains("wall_time_s"));
  EXPECT_TRUE(report.contains("versions"));
  EXPECT_EQ(report.at("rows"), 10);
}

TEST_F(CliTest, IdenticalSeedGivesIdenticalBytes) {
  const std::string cfg = write_config(
      "c.json", R"({"experiment": "tomography_roundtrip", "state": "squeezed_vacuum", "repetitions": 4, "seed": 9})");
  ASSERT_EQ(invoke({"run", cfg, "--jobs", "1", "--output", out("a")}), exit_code::ok);
  ASSERT_EQ(invoke({"run", cfg, "--jobs", "3", "--output", out("b")}), exit_code::ok);
  EXPECT_EQ(slurp(dir_ / "a" / "results.csv"), slurp(dir_ / "b" / "results.csv"));
  ASSERT_EQ(invoke({"run", cfg, "--seed", "10", "--output", out("c")}), exit_code::ok);
  EXPECT_NE(slurp(dir_ / "a" / "results.csv"), slurp(dir_ / "c" / "results.csv"));
}

TEST_F(CliTest, ParseAndValidationErrorsUseDocumentedExitCodes) {
  EXPECT_EQ(invoke({"run", write_config("a.json", "{\"experiment\": \"phase_sweep\",\n \"r\": }")}), exit_code::parse);
  EXPECT_EQ(invoke({"run", write_config("b.json", R"({"experiment": "phase_sweep", "r": "big"})")}), exit_code::parse);
  EXPECT_EQ(invoke({"run", write_config("c.json", R"({"experiment": "phase_sweep", "rr": 1.0})")}), exit_code::validation);
  EXPECT_EQ(invoke({"run", write_config("d.json", R"({"experiment": "warp_drive"})")}), exit_code::validation);
  EXPECT_EQ(invoke({"run", write_config("e.json", R"({"experiment": "phase_sweep", "r": -1.0})")}), exit_code::validation);
  EXPECT_EQ(invoke({"run", write_config("f.json", R"({"r": 1.0})")}), exit_code::validation);
  EXPECT_EQ(invoke({"run", out("missing.json")}), exit_code::parse);
  EXPECT_EQ(invoke({"frobnicate"}), exit_code::usage);
}

TEST_F(CliTest, ParseErrorMessageNamesTheLine) {
  try {
    parse_config("{\n\"experiment\": \"phase_sweep\",\n\"r\": ,\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.code(), exit_code::parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  try {
    parse_config(R"({"experiment": "phase_sweep", "cutoff": 1.5})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.code(), exit_code::parse);
    EXPECT_NE(std::string(e.what()).find("cutoff"), std::string::npos) << e.what();
  }
}

TEST_F(CliTest, NumericalFailureExitsFour) {
  const std::string cfg = write_config("c.json", R"({"experiment": "phase_sweep", "r": 1.38, "cutoff": 20})");
  EXPECT_EQ(invoke({"run", cfg, "--output", out("o")}), exit_code::numerical);
}

TEST_F(CliTest, SweepOverSqueezingGivesCoshPerGroup) {
  const std::string cfg = write_config("c.json", R"({"experiment": "phase_sweep", "alpha_mag": 0.55})");
  ASSERT_EQ(invoke({"sweep", cfg, "--param", "r", "--values", "0,0.5,1.1,1.38", "--output", out("s")}), exit_code::ok);
  const auto [header, rows] = csv(dir_ / "s" / "results.csv");
  ASSERT_EQ(rows.size(), 40u);
  EXPECT_EQ(header[0], "sweep_param");
  EXPECT_EQ(header[1], "sweep_value");
  const std::size_t g = column(header, "g_ha_abs");
  for (const auto& row : rows) {
    EXPECT_EQ(row[0], "r");
    EXPECT_NEAR(std::stod(row[g]) / std::cosh(std::stod(row[1])), 1.0, 1e-6);
  }
  const json report = json::parse(slurp(dir_ / "s" / "report.json"));
  EXPECT_EQ(report.at("groups").size(), 4u);
}

TEST_F(CliTest, SweepOverRoundsGivesIdenticalGain) {
  const std::string cfg = write_config("c.json", R"({"experiment": "phase_sweep", "r": 1.38, "phi_list": [0.0, 1.0]})");
  ASSERT_EQ(invoke({"sweep", cfg, "--param", "N", "--values", "1,3", "--output", out("s")}), exit_code::ok);
  const auto [header, rows] = csv(dir_ / "s" / "results.csv");
  ASSERT_EQ(rows.size(), 4u);
  const std::size_t g = column(header, "g_ha_abs");
  EXPECT_NEAR(std::stod(rows[0][g]), std::stod(rows[2][g]), 1e-6);
  EXPECT_NEAR(std::stod(rows[1][g]), std::stod(rows[3][g]), 1e-6);
}

TEST_F(CliTest, SweepRejectsBadParameterOrValues) {
  const std::string cfg = write_config("c.json", R"({"experiment": "phase_sweep"})");
  EXPECT_EQ(invoke({"sweep", cfg, "--param", "r", "--values", "", "--output", out("s")}), exit_code::validation);
  EXPECT_EQ(invoke({"sweep", cfg, "--param", "warp", "--values", "1", "--output", out("s")}), exit_code::validation);
  EXPECT_EQ(invoke({"sweep", cfg, "--param", "r", "--values", "1,x", "--output", out("s")}), exit_code::validation);
  EXPECT_EQ(invoke({"sweep", cfg, "--param", "output_path", "--values", "1", "--output", out("s")}),
            exit_code::validation);
}

TEST_F(CliTest, JcWithoutSqueezingHasUnitRatio) {
  const std::string cfg = write_config("c.json", R"({"experiment": "jc_ha", "r": 0.0, "N": 6, "points": 31})");
  ASSERT_EQ(invoke({"run", cfg, "--output", out("o")}), exit_code::ok);
  const auto [header, rows] = csv(dir_ / "o" / "results.csv");
  ASSERT_FALSE(rows.empty());
  const std::size_t ratio = column(header, "omega_ratio");
  for (const auto& row : rows) EXPECT_NEAR(std::stod(row[ratio]), 1.0, 1e-3);
}

TEST_F(CliTest, TrotterDeviationIsMonotone) {
  const std::string cfg = write_config("c.json", R"({"experiment": "trotter_convergence", "N_list": [2, 4, 8, 16]})");
  ASSERT_EQ(invoke({"run", cfg, "--output", out("o")}), exit_code::ok);
  const auto [header, rows] = csv(dir_ / "o" / "results.csv");
  ASSERT_EQ(rows.size(), 4u);
  const std::size_t d = column(header, "deviation");
  EXPECT_EQ(rows[0][column(header, "ratio_to_prev")], "nan");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(std::stod(rows[i][d]), std::stod(rows[i - 1][d]));
}

TEST_F(CliTest, LindbladCompareProducesBoundedDistances) {
  const std::string cfg =
      write_config("c.json", R"({"experiment": "lindblad_compare", "cutoff": 10, "points": 3, "N": 16})");
  ASSERT_EQ(invoke({"run", cfg, "--output", out("o")}), exit_code::ok);
  const auto [header, rows] = csv(dir_ / "o" / "results.csv");
  ASSERT_EQ(rows.size(), 3u);
  const std::size_t td = column(header, "trace_distance");
  EXPECT_EQ(std::stod(rows[0][td]), 0.0);
  for (const auto& row : rows) {
    EXPECT_GE(std::stod(row[td]), 0.0);
    EXPECT_LE(std::stod(row[td]), 1.0);
  }
}

TEST(CsvFormat, TwelveSignificantDigits) {
  EXPECT_EQ(format_cell(Cell{1.0 / 3.0}), "0.333333333333");
  EXPECT_EQ(format_cell(Cell{std::int64_t{-4}}), "-4");
  EXPECT_EQ(format_cell(Cell{std::string("r")}), "r");
  EXPECT_EQ(format_cell(Cell{std::nan("")}), "nan");
  Table t;
  t.columns = {"a", "b"};
  t.rows = {{Cell{2.0}, Cell{std::int64_t{3}}}};
  EXPECT_EQ(format_csv(t), "a,b\n2,3\n");
}

TEST(ConfigOverride, RejectsNonNumericFields) {
  const std::string text = R"({"experiment": "phase_sweep"})";
  EXPECT_NEAR(parse_config(override_param(text, "r", 0.7)).r, 0.7, 0.0);
  EXPECT_THROW(override_param(text, "nope", 1.0), ConfigError);
}
