#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lowrank_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string file(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  CliResult run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const std::string cmd = std::string(LOWRANK_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
  }

  fs::path dir_;
};

// key=value lines; later keys overwrite earlier ones.
std::map<std::string, std::string> keys(const std::string& text) {
  std::map<std::string, std::string> m;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    const auto eq = l.find('=');
    if (eq != std::string::npos && l[0] != '#') m[l.substr(0, eq)] = l.substr(eq + 1);
  }
  return m;
}

std::vector<std::string> values_of(const std::string& text, const std::string& key) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (l.rfind(key + "=", 0) == 0) v.push_back(l.substr(key.size() + 1));
  }
  return v;
}

const char* kPsdTraceOne =
    "lowrank-problem 1\nkind affine\n[shape]\nsymmetric 3\npsd\n[constraints]\n"
    "eq 1 : 1 0 0 0 0 0\neq 0 : 0 1 0 0 0 0\neq 0 : 0 0 1 0 0 0\n"
    "eq 0 : 0 0 0 1 0 0\neq 0 : 0 0 0 0 1 0\neq 0 : 0 0 0 0 0 1\n";

}  // namespace

TEST_F(Cli, PhiValues) {
  const std::string id = file("id4.txt", "4 4\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
  const std::string zero = file("zero.txt", "2 3\n0 0 0\n0 0 0\n");
  const std::string d = file("d.txt", "2 2\n3 0\n0 0\n");
  const CliResult r = run("phi --epsilon 1 " + id + " " + zero + " " + d);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto phi = values_of(r.out, "phi");
  ASSERT_EQ(phi.size(), 3u);
  EXPECT_NEAR(std::stod(phi[0]), 2.0, 1e-12);
  EXPECT_EQ(std::stod(phi[1]), 0.0);
  EXPECT_NEAR(std::stod(phi[2]), 0.9, 1e-12);
  EXPECT_EQ(values_of(r.out, "file").size(), 3u);
}

TEST_F(Cli, PhiOnProblemFile) {
  const std::string p =
      file("m.prob", "lowrank-problem 1\nkind matrix\n[shape]\ngeneral 2 2\n[matrix]\n3 0\n0 0\n"
                     "[options]\nepsilon = 1\n");
  const CliResult r = run("phi " + p);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(std::stod(keys(r.out).at("phi")), 0.9, 1e-12);
}

TEST_F(Cli, RankValues) {
  std::ostringstream low;
  // Rows are combinations of three independent vectors.
  low << "10 7\n";
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 7; ++j) {
      const double v = (i % 3 == 0 ? 1.0 : 0.0) * (j + 1) + (i % 3 == 1 ? 1.0 : 0.0) * (j * j - 3) +
                       (i % 3 == 2 ? 1.0 : 0.0) * ((j % 2) ? 2.0 : -1.0) + 0.5 * (i % 3 == 0) * (j == 4);
      low << v << (j + 1 < 7 ? " " : "\n");
    }
  }
  const std::string a = file("low.txt", low.str());
  const std::string z = file("zero.txt", "3 3\n0 0 0\n0 0 0\n0 0 0\n");
  std::ostringstream eye;
  eye << "5 5\n";
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) eye << (i == j ? 1 : 0) << (j + 1 < 5 ? " " : "\n");
  }
  const std::string i5 = file("i5.txt", eye.str());
  const CliResult r = run("rank " + a + " " + z + " " + i5);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rank = values_of(r.out, "rank");
  ASSERT_EQ(rank.size(), 3u);
  EXPECT_EQ(rank[0], "3");
  EXPECT_EQ(rank[1], "0");
  EXPECT_EQ(rank[2], "5");
}

TEST_F(Cli, RankWithoutConvergenceExitsOne) {
  const std::string id = file("id4.txt", "4 4\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
  const CliResult r = run("rank --max-iters 2 " + id);
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_EQ(keys(r.out).at("status"), "no-convergence");
}

TEST_F(Cli, RankminWithNuclearBaseline) {
  const std::string p = file("a.prob", kPsdTraceOne);
  const CliResult r = run("rankmin --nuclear " + p);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto k = keys(r.out);
  EXPECT_EQ(k.at("status"), "converged");
  EXPECT_EQ(k.at("rank_estimate"), "1");
  EXPECT_NEAR(std::stod(k.at("least_fnorm_estimate")), 1.0, 1e-6);
  EXPECT_EQ(k.at("nuclear_rank"), "1");
  EXPECT_NEAR(std::stod(k.at("nuclear_norm")), 1.0, 1e-6);
  EXPECT_NE(r.out.find("stage,epsilon,gamma,trY,trZ,rank_rounded"), std::string::npos);
}

TEST_F(Cli, RankminZeroForcingSet) {
  const std::string p = file(
      "z.prob", "lowrank-problem 1\nkind affine\n[shape]\ngeneral 2 2\n[constraints]\n"
                "eq 0 : 1 0 0 0\neq 0 : 0 1 0 0\neq 0 : 0 0 1 0\neq 0 : 0 0 0 1\n");
  const CliResult r = run("rankmin " + p);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(keys(r.out).at("rank_estimate"), "0");
}

TEST_F(Cli, RankminInfeasibleExitsOne) {
  const std::string p =
      file("inf.prob", "lowrank-problem 1\nkind affine\n[shape]\nsymmetric 2\npsd\n[constraints]\neq -1 : 1 0 1\n");
  const CliResult r = run("rankmin " + p);
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_EQ(keys(r.out).at("status"), "infeasible");
}

TEST_F(Cli, RankminWritesCsvAndSdpa) {
  const std::string p = file("a.prob", kPsdTraceOne);
  const std::string csv = (dir_ / "traj.csv").string();
  const std::string sdpa = (dir_ / "model.sdpa").string();
  const CliResult r = run("rankmin --csv " + csv + " --sdpa-export " + sdpa + " " + p);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("stage,epsilon"), std::string::npos);
  std::ifstream c(csv);
  std::string header;
  std::getline(c, header);
  EXPECT_EQ(header, "stage,epsilon,gamma,trY,trZ,rank_rounded");
  std::ifstream s(sdpa);
  std::string first;
  std::getline(s, first);
  EXPECT_EQ(first[0], '*');
}

TEST_F(Cli, CertifyVerdicts) {
  const std::string i3 = file("i3.sys", "3 1\n1 0 0 1 0 1\n");
  const std::string indefinite = file("d.sys", "2 1\n1 0 -1\n");
  const std::string definite = file("def.sys", "3 2\n1 0 0 1 0 -1\n1 0 0 -1 0 3\n");
  const std::string solvable = file("sol.sys", "3 2\n1 0 0 1 0 -1\n1 0 0 -1 0 1\n");
  const CliResult r = run("--jobs 2 certify " + i3 + " " + indefinite + " " + definite + " " + solvable);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto verdicts = values_of(r.out, "verdict");
  ASSERT_EQ(verdicts.size(), 4u);
  EXPECT_EQ(verdicts[0], "certified-zero-only");
  EXPECT_EQ(verdicts[1], "counterexample-found");
  EXPECT_EQ(verdicts[2], "certified-zero-only");
  EXPECT_EQ(verdicts[3], "counterexample-found");
  const auto files = values_of(r.out, "file");
  ASSERT_EQ(files.size(), 4u);
  EXPECT_EQ(files[0], i3);
  EXPECT_EQ(files[3], solvable);
}

TEST_F(Cli, CertifyCounterexampleSolvesSystem) {
  const std::string indefinite = file("d.sys", "2 1\n1 0 -1\n");
  const CliResult r = run("certify " + indefinite);
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream in(keys(r.out).at("counterexample"));
  std::vector<double> x;
  for (std::string t; std::getline(in, t, ',');) x.push_back(std::stod(t));
  ASSERT_EQ(x.size(), 2u);
  EXPECT_NEAR(x[0] * x[0] + x[1] * x[1], 1.0, 1e-9);
  EXPECT_NEAR(x[0] * x[0] - x[1] * x[1], 0.0, 1e-9);
}

TEST_F(Cli, InputErrorsExitTwo) {
  const std::string bad = file("bad.txt", "2 2\n1 x\n");
  const CliResult r = run("phi " + bad);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("line 2"), std::string::npos) << r.out;
  EXPECT_EQ(run("phi " + (dir_ / "missing.txt").string()).code, 2);
  EXPECT_EQ(run("rank --beta 1.5 " + file("ok.txt", "1 1\n1\n")).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}
