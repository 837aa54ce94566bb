#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "tikreg/report.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run tikreg_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = tikreg::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() / ("tikreg_cli_" + tag + "_" + std::to_string(++counter));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Value of "key=" in the command output.
double field(const std::string& text, const std::string& key) {
  const auto p = text.find(key + "=");
  REQUIRE(p != std::string::npos);
  return std::stod(text.substr(p + key.size() + 1));
}

std::vector<double> column(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  return tikreg::read_csv_column(in, name);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("risk of the scalar unit instance") {
    const Run r = tikreg_run({"risk", "--n", "1", "--sigma", "1", "--prior", "unit"});
    REQUIRE(r.code == 0);
    CHECK(field(r.out, "minimal_risk") == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(field(r.out, "prior_trace") == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("optimal pair written to disk has no excess risk") {
    TempDir dir("pair");
    const std::string pair = dir / "pair.csv";
    REQUIRE(tikreg_run({"risk", "--n", "16", "--write-pair", pair}).code == 0);
    const Run r = tikreg_run({"risk", "--n", "16", "--pair-file", pair});
    REQUIRE(r.code == 0);
    CHECK(std::abs(field(r.out, "excess")) <= 1e-9);

    // A zero pair reconstructs every signal as 0: its risk is the prior second moment.
    const std::string zero = dir / "zero.csv";
    {
      std::ofstream f(zero);
      for (int i = 0; i < 16; ++i) {
        f << 0;
        for (int j = 0; j < 16; ++j) f << ",0";
        f << '\n';
      }
    }
    const Run z = tikreg_run({"risk", "--n", "16", "--pair-file", zero});
    REQUIRE(z.code == 0);
    CHECK(field(z.out, "excess") > 0.0);
    CHECK(field(z.out, "pair_risk") > field(z.out, "prior_trace"));
  }

  TEST_CASE("bad pair files are configuration errors") {
    TempDir dir("badpair");
    const std::string p = dir / "p.csv";
    {
      std::ofstream f(p);
      f << "0,1,2\n0,3,4\n";
    }
    CHECK(tikreg_run({"risk", "--n", "2", "--pair-file", p}).code == 2);
    CHECK(tikreg_run({"risk", "--n", "3", "--pair-file", p}).code == 2);
    CHECK(tikreg_run({"risk", "--n", "2", "--pair-file", dir / "missing.csv"}).code == 2);
  }

  TEST_CASE("configuration errors exit with 2") {
    TempDir dir("cfg");
    CHECK(tikreg_run({"sweep", "--case", "c", "--n", "48", "--out", dir / "o"}).code == 2);
    CHECK(tikreg_run({"sweep", "--quick", "--paper-default"}).code == 2);
    CHECK(tikreg_run({"sweep", "--m", "100,10", "--out", dir / "o"}).code == 2);
    CHECK(tikreg_run({"frobnicate"}).code == 2);
    CHECK(tikreg_run({}).code == 2);
    const std::string ini = dir / "bad.ini";
    {
      std::ofstream f(ini);
      f << "[sweep]\nrepetitions = 3\n";
    }
    const Run r = tikreg_run({"sweep", "--config", ini, "--out", dir / "o"});
    CHECK(r.code == 2);
    CHECK(r.err.find("repetitions") != std::string::npos);
    CHECK(tikreg_run({"sweep", "--quick", "--config", ini}).code == 2);
    CHECK(tikreg_run({"reconstruct", "--learner", "magic"}).code == 2);
  }

  TEST_CASE("help lists config keys and exit codes") {
    const Run r = tikreg_run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("sample_sizes") != std::string::npos);
    CHECK(r.out.find("Exit codes") != std::string::npos);
  }

  TEST_CASE("sweep outputs are reproducible and the plot regenerates") {
    TempDir dir("sweep");
    const std::vector<std::string> base{"sweep", "--n", "8,16", "--m", "200,400,800", "--reps", "3", "--seed", "7"};
    auto with = [&](std::vector<std::string> extra) {
      std::vector<std::string> a = base;
      a.insert(a.end(), extra.begin(), extra.end());
      return a;
    };
    const Run r1 = tikreg_run(with({"--threads", "1", "--out", dir / "one"}));
    const Run r2 = tikreg_run(with({"--threads", "3", "--out", dir / "two"}));
    REQUIRE(r1.code == 0);
    REQUIRE(r2.code == 0);
    CHECK(r1.out == r2.out);
    for (const char* f : {"sweep.csv", "summary.csv", "decay.svg"}) {
      CHECK(slurp(dir / (std::string("one/") + f)) == slurp(dir / (std::string("two/") + f)));
    }
    const std::string sweep = slurp(dir / "one/sweep.csv");
    CHECK(sweep.rfind("# seed=7\n", 0) == 0);
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 4 + 1 + 2 * 3 * 3);

    REQUIRE(tikreg_run({"plot", "--summary", dir / "one/summary.csv", "--out", dir / "again.svg"}).code == 0);
    CHECK(slurp(dir / "again.svg") == slurp(dir / "one/decay.svg"));

    const Run other = tikreg_run({"sweep", "--n", "8", "--m", "200,400,800", "--reps", "3", "--seed", "8",
                                  "--out", dir / "three"});
    REQUIRE(other.code == 0);
    CHECK(slurp(dir / "three/sweep.csv") != slurp(dir / "one/sweep.csv"));
  }

  TEST_CASE("a sweep where every cell fails exits with 1") {
    TempDir dir("fail");
    const Run r = tikreg_run({"sweep", "--n", "16", "--m", "10,12,14", "--reps", "2", "--out", dir / "o"});
    CHECK(r.code == 1);
    CHECK(r.err.find("numerical failure") != std::string::npos);
  }

  TEST_CASE("reconstruct is deterministic and honours a pair file") {
    TempDir dir("rec");
    const Run a = tikreg_run({"reconstruct", "--n", "32", "--seed", "5", "--learner", "supervised:500",
                              "--out", dir / "a.csv"});
    const Run b = tikreg_run({"reconstruct", "--n", "32", "--seed", "5", "--learner", "supervised:500",
                              "--out", dir / "b.csv"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(field(a.out, "expected_risk") >= field(a.out, "minimal_risk"));

    const Run u = tikreg_run({"reconstruct", "--n", "32", "--seed", "5", "--learner", "unsupervised:500",
                              "--out", dir / "u.csv"});
    REQUIRE(u.code == 0);
    // Same test draw whatever the learner.
    CHECK(column(dir / "u.csv", "x") == column(dir / "a.csv", "x"));
    CHECK(column(dir / "u.csv", "y") == column(dir / "a.csv", "y"));

    // B = 0 returns h whatever the data.
    const std::string pair = dir / "h.csv";
    std::vector<double> h(8);
    {
      std::ofstream f(pair);
      for (int i = 0; i < 8; ++i) {
        h[i] = 0.125 * i - 0.3;
        f << tikreg::format_double(h[i]);
        for (int j = 0; j < 8; ++j) f << ",0";
        f << '\n';
      }
    }
    REQUIRE(tikreg_run({"reconstruct", "--n", "8", "--pair-file", pair, "--out", dir / "h_out.csv"}).code == 0);
    CHECK(column(dir / "h_out.csv", "xhat") == h);
  }

  TEST_CASE("optimal reconstruction beats the raw observation on average") {
    TempDir dir("avg");
    double sum_xhat = 0.0, sum_y = 0.0;
    for (int seed = 0; seed < 100; ++seed) {
      const Run r = tikreg_run({"reconstruct", "--n", "32", "--seed", std::to_string(seed), "--out", dir / "s.csv"});
      REQUIRE(r.code == 0);
      sum_xhat += field(r.out, "error_xhat");
      sum_y += field(r.out, "error_y");
    }
    CHECK(sum_xhat < sum_y);
  }

  TEST_CASE("concentration of the empirical moments") {
    TempDir dir("conc");
    const Run r = tikreg_run({"concentration", "--n", "16", "--m", "100,400,1600,6400", "--reps", "20", "--seed",
                              "3", "--out", dir / "c.csv"});
    REQUIRE(r.code == 0);
    CHECK(field(r.out, "slope_mu") == doctest::Approx(-0.5).epsilon(0.3));
    CHECK(field(r.out, "slope_sigma") == doctest::Approx(-0.5).epsilon(0.3));
    CHECK(column(dir / "c.csv", "m") == std::vector<double>{100, 400, 1600, 6400});
  }

  TEST_CASE("transform") {
    TempDir dir("tr");
    const std::string in = dir / "v.csv";
    {
      std::ofstream f(in);
      f << "v\n1\n1\n";
    }
    const Run fwd = tikreg_run({"transform", "--in", in, "--column", "v"});
    REQUIRE(fwd.code == 0);
    std::istringstream fs(fwd.out);
    const std::vector<double> c = tikreg::read_csv_column(fs, "coefficient");
    REQUIRE(c.size() == 2);
    CHECK(c[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(std::abs(c[1]) <= 1e-15);

    const std::string sig = dir / "s.csv";
    {
      std::ofstream f(sig);
      f << "a,b\n";
      for (int i = 0; i < 16; ++i) f << i << ',' << tikreg::format_double(std::sin(0.7 * i)) << '\n';
    }
    REQUIRE(tikreg_run({"transform", "--in", sig, "--column", "b", "--out", dir / "w.csv"}).code == 0);
    REQUIRE(tikreg_run({"transform", "--in", dir / "w.csv", "--inverse", "--out", dir / "back.csv"}).code == 0);
    const std::vector<double> back = column(dir / "back.csv", "value");
    REQUIRE(back.size() == 16);
    for (int i = 0; i < 16; ++i) CHECK(back[i] == doctest::Approx(std::sin(0.7 * i)).epsilon(1e-12));

    const std::string odd = dir / "odd.csv";
    {
      std::ofstream f(odd);
      f << "1\n2\n3\n";
    }
    CHECK(tikreg_run({"transform", "--in", odd}).code == 2);
  }
}
