// Runs the sindyae executable end to end and checks exit codes and outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "sindyae/datagen.hpp"
#include "sindyae/io.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace sindyae;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sindyae_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("'") + SINDYAE_CLI + "' " + args + " > '" + out.string() +
                            "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Lorenz samples in latent coordinates as a z1..z3,dz1..dz3 CSV.
  void write_lorenz_csv(const std::string& name) const {
    Vector z0(3);
    z0 << -8.0, 7.0, 27.0;
    const auto [z, dz] = lorenz_trajectory(lorenz_desk_preset(0), z0);
    std::ofstream out(dir_ / name);
    out << "z1,z2,z3,dz1,dz2,dz3\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      out << z(i, 0) << "," << z(i, 1) << "," << z(i, 2) << "," << dz(i, 0) << "," << dz(i, 1) << ","
          << dz(i, 2) << "\n";
  }

  // A tiny linear dataset with n = 4 and a matching config.
  void write_tiny_problem() const {
    RngStream rng(5);
    const Matrix embed = sindyae::testing::random_matrix(2, 4, rng);
    Dataset d;
    const int m = 64;
    d.x.resize(m, 4);
    d.dx.resize(m, 4);
    d.dt = 0.1;
    for (int i = 0; i < m; ++i) {
      RowVector s(2), ds(2);
      s << std::cos(0.1 * i), std::sin(0.1 * i);
      ds << -s(1), s(0);
      d.x.row(i) = s * embed;
      d.dx.row(i) = ds * embed;
    }
    d.trajectories.push_back({0, static_cast<std::size_t>(m)});
    write_dataset(dir_ / "tiny" / "train", d);
    write_dataset(dir_ / "tiny" / "val", d);
    write_dataset(dir_ / "tiny" / "test", d);
    nlohmann::json c = {{"input_dim", 4},       {"latent_dim", 2},        {"encoder_widths", {6}},
                        {"decoder_widths", {6}}, {"learning_rate", 1e-3}, {"batch_size", 32},
                        {"epochs_main", 20},     {"epochs_refine", 5},     {"threshold", 0.1},
                        {"threshold_interval", 10}, {"validation_interval", 5},
                        {"lambda1", 0.1},        {"lambda2", 0.0},         {"lambda3", 1e-3},
                        {"library", {{"state_dim", 2}, {"poly_order", 1}, {"include_sine", false},
                                     {"model_order", 1}}},
                        {"seed", 7}};
    write_json(dir_ / "tiny.json", c);
    c["input_dim"] = 5;
    write_json(dir_ / "tiny_wrong_n.json", c);
    c["input_dim"] = 4;
    c["batch_size"] = 0;
    write_json(dir_ / "tiny_invalid.json", c);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, NoSubcommandIsUsageError) {
  const auto r = run("");
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, MissingOutPrintsUsage) {
  const auto r = run("gen-data --system lorenz");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE((r.out + r.err).find("--out"), std::string::npos);
}

TEST_F(Cli, UnknownSystemIsUsageError) {
  EXPECT_EQ(run("gen-data --system duffing --out " + path("d")).code, 2);
}

TEST_F(Cli, VersionFlag) {
  const auto r = run("--version");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(version_string()), std::string::npos);
}

TEST_F(Cli, GenDataLorenzDesk) {
  const auto r = run("gen-data --system lorenz --preset desk --seed 1 --out " + path("lz"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = read_json(dir_ / "lz" / "manifest.json");
  EXPECT_EQ(manifest["n_ic"]["train"], 64);
  EXPECT_EQ(manifest["seeds"][0], 1);
  EXPECT_TRUE(manifest.contains("tool_version"));
  EXPECT_TRUE(manifest["dataset_hash"].contains("test"));
  const Dataset train = read_dataset(dir_ / "lz" / "train");
  EXPECT_EQ(train.x.cols(), 128);
  EXPECT_EQ(train.x.rows(), 64 * 250);
  EXPECT_EQ(manifest["dataset_hash"]["train"], dataset_hash(dir_ / "lz" / "train"));
}

TEST_F(Cli, StlsqRecoversLorenzAndEvalAgrees) {
  write_lorenz_csv("lorenz.csv");
  const auto r = run("stlsq --csv " + path("lorenz.csv") + " --threshold 0.5 --poly-order 3 --out " +
                     path("lorenz_model.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("dz1/dt = -10.000 z1 + 10.000 z2"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("dz3/dt = -2.667 z3 + 1.000 z1*z2"), std::string::npos) << r.out;
  const auto model = read_model(dir_ / "lorenz_model.json");
  EXPECT_EQ(model.sindy.active_terms(), 7);

  // The same model evaluated on latent Lorenz data explains all of dZ.
  ASSERT_EQ(run("gen-data --system lorenz --latent --seed 2 --out " + path("latent")).code, 0);
  const auto e = run("eval --model " + path("lorenz_model.json") + " --data " + path("latent") +
                     " --no-simulate --out " + path("report.json"));
  ASSERT_EQ(e.code, 0) << e.err;
  const auto report = read_json(dir_ / "report.json");
  EXPECT_LT(report["fuv_dx"].get<double>(), 1e-10);
  EXPECT_EQ(report["active_terms"], 7);
}

TEST_F(Cli, StlsqBadCsvIsCorruption) {
  std::ofstream(dir_ / "bad.csv") << "z1,dz1\n1,2\n3,oops\n";
  const auto r = run("stlsq --csv " + path("bad.csv"));
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find(":3:"), std::string::npos) << r.err;
}

TEST_F(Cli, SimulateWritesTrajectory) {
  write_lorenz_csv("lorenz.csv");
  ASSERT_EQ(run("stlsq --csv " + path("lorenz.csv") + " --threshold 0.5 --poly-order 3 --out " +
                path("m.json"))
                .code,
            0);
  const auto r = run("simulate --model " + path("m.json") + " --z0 1,1,20 --t-end 1 --dt 0.01 --out " +
                     path("traj.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable t = read_csv(dir_ / "traj.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"t", "z1", "z2", "z3"}));
  EXPECT_EQ(t.values.rows(), 101);
  EXPECT_NEAR(t.values(100, 0), 1.0, 1e-12);
}

TEST_F(Cli, SimulateRejectsBadArguments) {
  write_lorenz_csv("lorenz.csv");
  ASSERT_EQ(run("stlsq --csv " + path("lorenz.csv") + " --threshold 0.5 --poly-order 3 --out " +
                path("m.json"))
                .code,
            0);
  EXPECT_EQ(run("simulate --model " + path("m.json") + " --z0 1,1,20 --dt 0").code, 2);
  EXPECT_EQ(run("simulate --model " + path("m.json") + " --z0 1,1,20 --dt -0.1").code, 2);
  EXPECT_EQ(run("simulate --model " + path("m.json") + " --z0 1,1").code, 3);
}

TEST_F(Cli, TrainWritesOneModelPerSeed) {
  write_tiny_problem();
  const auto r = run("train --data " + path("tiny") + " --config " + path("tiny.json") +
                     " --seeds 3 --out " + path("runs"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (int seed : {7, 8, 9}) {
    const std::string s = std::to_string(seed);
    EXPECT_TRUE(fs::exists(dir_ / "runs" / ("model_seed" + s + ".json"))) << seed;
    EXPECT_TRUE(fs::exists(dir_ / "runs" / ("history_seed" + s + ".csv"))) << seed;
    EXPECT_EQ(read_history_csv(dir_ / "runs" / ("history_seed" + s + ".csv")).records.size(), 25u);
  }
  const auto manifest = read_json(dir_ / "runs" / "manifest.json");
  EXPECT_TRUE(manifest.contains("selected_seed"));
  const auto model = read_model(dir_ / "runs" / "model_seed8.json");
  ASSERT_TRUE(model.config.has_value());
  EXPECT_EQ(model.config->seed, 8u);
}

TEST_F(Cli, TrainConsistencyErrors) {
  write_tiny_problem();
  const auto wrong_n = run("train --data " + path("tiny") + " --config " + path("tiny_wrong_n.json") +
                           " --out " + path("runs"));
  EXPECT_EQ(wrong_n.code, 3);
  EXPECT_NE(wrong_n.err.find("4"), std::string::npos);
  EXPECT_NE(wrong_n.err.find("5"), std::string::npos);
  EXPECT_EQ(run("train --data " + path("tiny") + " --config " + path("tiny_invalid.json") + " --out " +
                path("runs"))
                .code,
            3);
}

TEST_F(Cli, CorruptDatasetExitsWithFour) {
  write_tiny_problem();
  fs::resize_file(dir_ / "tiny" / "train" / "X.bin", 10);
  const auto r = run("train --data " + path("tiny") + " --config " + path("tiny.json") + " --out " +
                     path("runs"));
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("X.bin"), std::string::npos) << r.err;
}
