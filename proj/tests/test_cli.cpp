#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kData = std::string(SROSR_DATA_DIR) + "/mnist3k-images-idx3-ubyte";
const std::string kLabels = std::string(SROSR_DATA_DIR) + "/mnist3k-labels-idx1-ubyte";

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "srosr_test_cli";
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const auto log = work_dir() / "last.log";
  const std::string cmd = std::string(SROSR_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path points_csv() {
  const auto csv = work_dir() / "points.csv";
  std::ofstream out(csv);
  out << "x,y,z,label\n";
  for (int i = 0; i < 60; ++i) {
    const double t = 0.01 * i;
    out << 1.0 << ',' << t << ',' << 0.0 << ",a\n";
    out << 0.0 << ',' << 1.0 << ',' << t << ",b\n";
  }
  return csv;
}

}  // namespace

TEST(Cli, UnknownSubcommandIsConfigError) { EXPECT_EQ(run("frobnicate"), 2); }

TEST(Cli, SweepWithoutSeedIsConfigError) {
  const auto cfg = work_dir() / "noseed.json";
  std::ofstream(cfg) << R"({"methods": [{"kind": "sci"}], "levels": [{"n_known": 3, "n_open": 1}]})";
  EXPECT_EQ(run("sweep " + cfg.string()), 2);
}

TEST(Cli, UnknownConfigKeyIsConfigError) {
  const auto cfg = work_dir() / "typo.json";
  std::ofstream(cfg) << R"({"trails": 3})";
  EXPECT_EQ(run("sweep " + cfg.string() + " --seed 1"), 2);
}

TEST(Cli, MissingDataIsDataError) {
  EXPECT_EQ(run("train --data /nonexistent --labels /nonexistent -o " + (work_dir() / "m.json").string() +
                " --seed 1"),
            3);
}

TEST(Cli, FitGpdExitCodes) {
  const auto in = work_dir() / "few.txt";
  {
    std::ofstream out(in);
    for (int i = 0; i < 30; ++i) out << i << "\n";
  }
  EXPECT_EQ(run("fit-gpd " + in.string() + " --rho 0.1"), 3);
  const auto good = work_dir() / "many.txt";
  {
    std::ofstream out(good);
    for (int i = 1; i <= 400; ++i) out << std::log(400.0 / i) << "\n";
  }
  const auto out = work_dir() / "fit.json";
  ASSERT_EQ(run("fit-gpd " + good.string() + " --rho 0.25 -o " + out.string()), 0);
  const auto j = nlohmann::json::parse(slurp(out));
  EXPECT_GT(j.at("sigma").get<double>(), 0.0);
  EXPECT_EQ(j.at("n_exceedances").get<int>(), 100);
}

TEST(Cli, TrainWithStarvedTailIsNumericalError) {
  // one round leaves 12 cross-test samples per class, far below 20 exceedances
  EXPECT_EQ(run("train --data " + points_csv().string() + " --rounds 1 --seed 3 -o " +
                (work_dir() / "starved.json").string()),
            4);
}

TEST(Cli, SweepWritesReport) {
  const auto cfg = work_dir() / "sweep.json";
  std::ofstream(cfg) << R"({"dataset": {"loader": "idx", "path": ")" << kData << R"(", "labels_path": ")" << kLabels
                     << R"("}, "methods": [{"kind": "sci", "alpha": 0.3}, {"kind": "ratio", "tau": 1.5}],
                           "levels": [{"n_known": 3, "n_open": 1}], "trials": 1, "max_per_class": 20})";
  const auto report = work_dir() / "report.csv";
  ASSERT_EQ(run("sweep " + cfg.string() + " --seed 5 -o " + report.string()), 0);
  const auto text = slurp(report);
  EXPECT_EQ(text.substr(0, text.find('\n')), "openness,method,f_measure_mean,f_measure_std,accuracy_mean,accuracy_std,trials");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  const auto again = work_dir() / "report2.csv";
  ASSERT_EQ(run("sweep " + cfg.string() + " --seed 5 -o " + again.string()), 0);
  EXPECT_EQ(slurp(again), text);
}

TEST(Cli, TrainThenClassifyCsv) {
  const auto csv = points_csv();
  const auto model = work_dir() / "naive.json";
  ASSERT_EQ(run("train --method naive --data " + csv.string() + " --rounds 2 --seed 1 -o " + model.string()), 0);
  EXPECT_TRUE(fs::exists(model.string() + ".dict"));
  const auto out = work_dir() / "decisions.csv";
  ASSERT_EQ(run("classify --model " + model.string() + " --data " + csv.string() + " -o " + out.string()), 0);
  const auto text = slurp(out);
  EXPECT_EQ(text.substr(0, text.find('\n')), "index,truth,prediction");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 121);
}

TEST(Cli, SetOverridesConfigFields) {
  const auto cfg = work_dir() / "override.json";
  std::ofstream(cfg) << R"({"dataset": {"loader": "idx", "path": ")" << kData << R"(", "labels_path": ")" << kLabels
                     << R"("}, "methods": [{"kind": "sci", "alpha": 0.3}],
                           "levels": [{"n_known": 3, "n_open": 1}], "trials": 1, "max_per_class": 20})";
  EXPECT_EQ(run("sweep " + cfg.string() + " --seed 5 --set trials=0"), 2);
  EXPECT_EQ(run("sweep " + cfg.string() + " --seed 5 --set nonsense"), 2);
  const auto out = work_dir() / "override.json.out";
  ASSERT_EQ(run("sweep " + cfg.string() + " --seed 5 --format json --set trials=2 --set methods/0/alpha=0.9 -o " +
                out.string()),
            0);
  const auto j = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(j.at("config").at("trials").get<int>(), 2);
  EXPECT_EQ(j.at("config").at("methods").at(0).at("alpha").get<double>(), 0.9);
  EXPECT_EQ(j.at("levels").at(0).at("trials").size(), 2u);
}
