// Copyright 2026 The ebitcert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kData = EBITCERT_DATA_DIR;

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ebitcert_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Runs the CLI with output captured to a file and returns the exit code.
    int run(const std::string& args) {
        const std::string cmd =
            std::string("\"") + EBITCERT_CLI + "\" " + args + " > \"" + (dir_ / "stdout.txt").string() + "\" 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string output() const { return slurp(dir_ / "stdout.txt"); }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

TEST_F(Cli, CertifyTimeBinWindow) {
    const auto report = dir_ / "report.json";
    ASSERT_EQ(run("certify \"" + (kData / "time_bin_table1.json").string() + "\" --n 7 --jobs 1 --out \"" +
                  report.string() + "\""),
              0)
        << output();
    const json r = json::parse(slurp(report));
    EXPECT_EQ(r["schema_version"], 1);
    EXPECT_EQ(r["command"], "certify");
    EXPECT_EQ(r["input"]["sha256"].get<std::string>().size(), 64u);
    EXPECT_NEAR(r["result"]["eof_ebits"].get<double>(), 2.09, 0.10);
    EXPECT_EQ(r["result"]["d_min"], 5);
    EXPECT_NE(output().find("d_min       5"), std::string::npos) << output();
}

TEST_F(Cli, ReplayedConfigReproducesResult) {
    const auto a = dir_ / "a.json";
    const auto b = dir_ / "b.json";
    const std::string file = "\"" + (kData / "time_bin_table1.json").string() + "\"";
    ASSERT_EQ(run("certify " + file + " --n 5 --start 2 --out \"" + a.string() + "\""), 0) << output();
    const json ra = json::parse(slurp(a));
    const json cfg = ra["config"];
    std::ostringstream args;
    args << "certify " << file << " --n " << cfg["n"] << " --start " << cfg["start"] << " --tol "
         << cfg["solver"]["tol_eq"].get<double>() << " --max-iter " << cfg["solver"]["max_iter"]
         << " --car-convention " << cfg["car_convention"].get<std::string>() << " --pin-slack "
         << cfg["solver"]["slack"].get<std::string>() << " --out \"" << b.string() << "\"";
    ASSERT_EQ(run(args.str()), 0) << output();
    EXPECT_EQ(ra["result"]["eof_ebits"], json::parse(slurp(b))["result"]["eof_ebits"]);
}

TEST_F(Cli, MalformedFileIsAnInputError) {
    const auto bad = dir_ / "bad.json";
    std::ofstream(bad) << R"({"experiment": "time-bin", "n_modes": "eight"})";
    EXPECT_EQ(run("certify \"" + bad.string() + "\""), 1);
    EXPECT_NE(output().find("n_modes"), std::string::npos) << output();

    std::ofstream(dir_ / "junk.json") << "{not json";
    EXPECT_EQ(run("certify \"" + (dir_ / "junk.json").string() + "\""), 1);
    EXPECT_EQ(run("certify \"" + (dir_ / "missing.json").string() + "\""), 1);
}

TEST_F(Cli, EmptyScanRangeIsAnInputError) {
    EXPECT_EQ(run("scan \"" + (kData / "time_bin_table1.json").string() + "\" --n-min 9 --n-max 8"), 1);
    EXPECT_NE(output().find("range"), std::string::npos) << output();
}

TEST_F(Cli, ScanWritesCurve) {
    const auto csv = dir_ / "curve.csv";
    ASSERT_EQ(run("scan \"" + (kData / "time_bin_table1.json").string() + "\" --n-min 2 --n-max 4 --csv \"" +
                  csv.string() + "\""),
              0)
        << output();
    std::istringstream in(slurp(csv));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "n,eof,eof_sigma");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 3);
}

TEST_F(Cli, MonteCarloIsReproducible) {
    const std::string args = "mc \"" + (kData / "time_bin_table1.json").string() + "\" --n 4 --trials 12 --seed 7";
    ASSERT_EQ(run(args + " --jobs 1 --csv \"" + (dir_ / "a.csv").string() + "\""), 0) << output();
    ASSERT_EQ(run(args + " --jobs 3 --csv \"" + (dir_ / "b.csv").string() + "\""), 0) << output();
    const std::string a = slurp(dir_ / "a.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir_ / "b.csv"));
}

TEST_F(Cli, DrawnSeedIsPrinted) {
    ASSERT_EQ(run("mc \"" + (kData / "time_bin_table1.json").string() + "\" --n 3 --trials 3"), 0) << output();
    EXPECT_NE(output().find("seed"), std::string::npos) << output();
}

TEST_F(Cli, SimulateThenCertifyRecoversLog2n) {
    const auto meas = dir_ / "sim.json";
    ASSERT_EQ(run("simulate \"" + (kData / "uniform_n8_spec.json").string() + "\" --seed 3 --out \"" + meas.string() +
                  "\""),
              0)
        << output();
    const auto report = dir_ / "report.json";
    ASSERT_EQ(run("certify \"" + meas.string() + "\" --out \"" + report.string() + "\""), 0) << output();
    EXPECT_NEAR(json::parse(slurp(report))["result"]["eof_ebits"].get<double>(), 3.0, 0.1);
}

TEST_F(Cli, SimulateEnergyTimeShape) {
    const auto meas = dir_ / "et.json";
    ASSERT_EQ(run("simulate \"" + (kData / "energy_time_like_spec.json").string() +
                  "\" --experiment energy-time --offsets 12..29 --seed 1 --out \"" + meas.string() + "\""),
              0)
        << output();
    const json m = json::parse(slurp(meas));
    EXPECT_EQ(m["experiment"], "energy-time");
    EXPECT_EQ(m["band_averages"].size(), 18u);
}

TEST_F(Cli, SimulateMissingSpecIsAnInputError) {
    EXPECT_EQ(run("simulate \"" + (dir_ / "nope.json").string() + "\" --out \"" + (dir_ / "x.json").string() + "\""),
              1);
}

}  // namespace
