#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* stvg_bin() { return std::getenv("STVG_BIN"); }

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "stvg_cli_tests";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("cli usage and exit codes") {
  if (!stvg_bin()) {
    MESSAGE("STVG_BIN not set; skipping CLI tests");
    return;
  }
  const std::string bin = stvg_bin();

  SUBCASE("--help exits 0") { CHECK(run(bin + " --help") == 0); }
  SUBCASE("eval without --data is a usage error (exit 2)") {
    CHECK(run(bin + " eval") == 2);
  }
  SUBCASE("unknown flags are usage errors") {
    CHECK(run(bin + " gen-data --wat 1 --out /tmp/x.jsonl") == 2);
  }
  SUBCASE("missing subcommand is a usage error") { CHECK(run(bin) == 2); }
  SUBCASE("validation failures exit 1") {
    const auto dir = work_dir();
    CHECK(run(bin + " eval --data " + (dir / "missing.jsonl").string() +
              " --params nope.stvg") == 1);
  }
}

TEST_CASE("cli validate verdicts") {
  if (!stvg_bin()) return;
  const std::string bin = stvg_bin();
  const auto dir = work_dir();

  const auto good = dir / "good.txt";
  std::ofstream(good) << "the red panda moves to the left\n"
                      << "A man in a green uniform kicking the ball then running toward the net.\n";
  CHECK(run(bin + " validate --in " + good.string()) == 0);

  const auto bad = dir / "bad.txt";
  std::ofstream(bad) << "the panda slides\n";
  CHECK(run(bin + " validate --in " + bad.string()) == 1);
}

TEST_CASE("cli gen-data is deterministic and loadable") {
  if (!stvg_bin()) return;
  const std::string bin = stvg_bin();
  const auto dir = work_dir();
  const auto a = (dir / "a.jsonl").string();
  const auto b = (dir / "b.jsonl").string();
  CHECK(run(bin + " gen-data --preset motion --n 15 --seed 3 --out " + a) == 0);
  CHECK(run(bin + " gen-data --preset motion --n 15 --seed 3 --out " + b) == 0);

  std::ifstream fa(a), fb(b);
  const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);
  CHECK(!ca.empty());
  CHECK(fs::exists(a + ".manifest.json"));
}
