#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "cif_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(CIF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) return false;
    ++n;
  }
  return n > 0;
}

std::string p(const fs::path& path) { return path.string(); }

// Shared fixture: a small dataset and a two-epoch model.
struct Workspace {
  Workspace() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    ok = run("synth --family lshape --count 6 --n-points 128 --seed 3 --out " + p(kRoot / "data")) == 0 &&
         run("train --manifest " + p(kRoot / "data/manifest.txt") + " --out " + p(kRoot / "run") +
                " --epochs 2 --batch 3 --points-f 48 --points-h 48 --seed 1 --embedding-dim 4 --hidden 16") == 0;
  }
  bool ok = false;
  fs::path checkpoint() const { return kRoot / "run/checkpoint.bin"; }
  fs::path manifest() const { return kRoot / "data/manifest.txt"; }
};

const Workspace& workspace() {
  static Workspace w;
  REQUIRE(w.ok);
  return w;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("sample --bogus-flag 3") == 2);
    CHECK(run("eval --metric l2 --gen a --ref b --out c") == 2);
    CHECK(run("--help") == 0);
  }

  TEST_CASE("missing inputs are data errors") {
    CHECK(run("sample --checkpoint " + p(kRoot / "nope.bin") + " --out " + p(kRoot / "x")) == 3);
    CHECK(run("eval --gen " + p(kRoot / "nope.txt") + " --ref " + p(kRoot / "nope.txt") + " --out " + p(kRoot / "x")) == 3);
  }

  TEST_CASE("gradcheck passes on the toy configuration") {
    CHECK(run("gradcheck --seed 1") == 0);
    CHECK(run("gradcheck --seed 1 --tolerance 1e-30") == 4);
  }

  TEST_CASE("train writes a checkpoint and a loss log") {
    const auto& w = workspace();
    CHECK(fs::exists(w.checkpoint()));
    std::ifstream log(kRoot / "run/loss.tsv");
    std::size_t lines = 0;
    for (std::string s; std::getline(log, s);) ++lines;
    CHECK(lines == 2);
  }

  TEST_CASE("commands are reproducible and leave inputs untouched") {
    const auto& w = workspace();
    const std::string ck = " --checkpoint " + p(w.checkpoint());
    const std::string before_ck = slurp(w.checkpoint());
    const std::string before_manifest = slurp(w.manifest());
    const std::string cloud_a = p(kRoot / "data/lshape_0000.xyz"), cloud_b = p(kRoot / "data/lshape_0001.xyz");
    const std::vector<std::string> commands = {
        "sample" + ck + " --n-points 256 --temperature 1.0 --seed 7 --count 3",
        "reconstruct" + ck + " --manifest " + p(w.manifest()) + " --n-points 64 --seed 2",
        "interpolate" + ck + " --input " + cloud_a + " --input-b " + cloud_b + " --steps 3 --n-points 64 --seed 2",
        "align" + ck + " --input " + cloud_a + " --restarts 2 --generations 20 --seed 5",
        "rank" + ck + " --manifest " + p(w.manifest()),
        "eval --gen " + p(w.manifest()) + " --ref " + p(w.manifest()) + " --metric all --table",
    };
    for (std::size_t i = 0; i < commands.size(); ++i) {
      CAPTURE(commands[i]);
      const fs::path a = kRoot / ("rep" + std::to_string(i) + "a"), b = kRoot / ("rep" + std::to_string(i) + "b");
      REQUIRE(run(commands[i] + " --out " + p(a)) == 0);
      REQUIRE(run(commands[i] + " --out " + p(b)) == 0);
      CHECK(same_tree(a, b));
    }
    CHECK(slurp(w.checkpoint()) == before_ck);
    CHECK(slurp(w.manifest()) == before_manifest);
  }

  TEST_CASE("train is reproducible") {
    workspace();
    const std::string args = "train --manifest " + p(kRoot / "data/manifest.txt") +
                             " --epochs 1 --batch 3 --points-f 32 --points-h 32 --seed 4 --hidden 8 --out ";
    REQUIRE(run(args + p(kRoot / "t1")) == 0);
    REQUIRE(run(args + p(kRoot / "t2")) == 0);
    CHECK(same_tree(kRoot / "t1", kRoot / "t2"));
  }

  TEST_CASE("self-evaluation report") {
    const auto& w = workspace();
    REQUIRE(run("eval --gen " + p(w.manifest()) + " --ref " + p(w.manifest()) + " --metric cd --out " + p(kRoot / "ev")) == 0);
    const std::string kv = slurp(kRoot / "ev/metrics.txt");
    CHECK(kv.find("mmd_cd 0\n") != std::string::npos);
    CHECK(kv.find("cov_cd 1\n") != std::string::npos);
    CHECK(kv.find("mmd_emd") == std::string::npos);
    CHECK(fs::exists(kRoot / "ev/metrics.csv"));
  }

  TEST_CASE("align and rank outputs") {
    const auto& w = workspace();
    REQUIRE(run("align --checkpoint " + p(w.checkpoint()) + " --input " + p(kRoot / "data/lshape_0002.xyz") +
                " --restarts 1 --generations 10 --out " + p(kRoot / "al")) == 0);
    const std::string angles = slurp(kRoot / "al/angles.txt");
    CHECK(angles.rfind("angles ", 0) == 0);
    CHECK(angles.find("\nnll ") != std::string::npos);
    CHECK(fs::exists(kRoot / "al/aligned.xyz"));
    CHECK(slurp(kRoot / "al/trace.tsv").find("generation_best") != std::string::npos);

    REQUIRE(run("rank --checkpoint " + p(w.checkpoint()) + " --manifest " + p(w.manifest()) + " --out " + p(kRoot / "rk")) == 0);
    std::ifstream f(kRoot / "rk/ranking.tsv");
    std::string header, line;
    std::getline(f, header);
    double prev = 1e300;
    std::size_t rows = 0;
    while (std::getline(f, line)) {
      std::istringstream s(line);
      std::string rank, index, id;
      double score;
      s >> rank >> index >> id >> score;
      CHECK(score <= prev);
      prev = score;
      ++rows;
    }
    CHECK(rows == 6);
  }
}
