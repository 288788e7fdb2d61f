#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

// End-to-end runs of the installed binary. SURREAL_CLI_PATH and
// SURREAL_CONFIG_DIR come from the build system.

namespace fs = std::filesystem;

namespace {

struct RunOutput {
  int status = -1;
  std::string text;
};

RunOutput run_cli(const std::string& args) {
  const std::string cmd = std::string(SURREAL_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunOutput out;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) out.text += buf;
  const int rc = ::pclose(pipe);
  out.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return out;
}

std::string config(const char* name) {
  return (fs::path(SURREAL_CONFIG_DIR) / name).string();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() /
           ("surreal_cli_" + std::to_string(::getpid()) + "_" + tag);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const char* name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config problems exit with status 2 and name the cause") {
  const RunOutput missing = run_cli("train --config /nonexistent/run.cfg");
  CHECK(missing.status == 2);
  CHECK(missing.text.find("/nonexistent/run.cfg") != std::string::npos);

  TempDir tmp("badcfg");
  std::ofstream(tmp.file("bad.cfg")) << "mode = phase\nwhatever = 1\n";
  const RunOutput bad = run_cli("train --config " + tmp.file("bad.cfg"));
  CHECK(bad.status == 2);
  CHECK(bad.text.find(":2: unknown key") != std::string::npos);
}

TEST_CASE("property suites pass at contract tolerances") {
  const RunOutput out = run_cli("check --trials 100 --seed 5");
  CHECK(out.status == 0);
  CHECK(out.text.find("FAIL") == std::string::npos);
  // one line per suite
  std::size_t lines = 0;
  for (char c : out.text) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 7);
}

TEST_CASE("a tightened tolerance turns into a reported failure") {
  const RunOutput out =
      run_cli("check --suite oracle --trials 30 --seed 5 --tolerance-scale 1e-12");
  CHECK(out.status == 1);
  CHECK(out.text.find("FAIL") != std::string::npos);
  CHECK(out.text.find("reproducer seed") != std::string::npos);
}

TEST_CASE("synth writes one file per sample plus a manifest") {
  TempDir tmp("synth");
  const RunOutput out = run_cli("synth --classes 4 --n 50 --extents 16x16 --seed 3 --out " +
                                tmp.str());
  CHECK(out.status == 0);
  CHECK(out.text.find("wrote 200 samples") != std::string::npos);

  std::size_t cplx_files = 0;
  bool manifest = false;
  for (const auto& e : fs::directory_iterator(tmp.path)) {
    if (e.path().extension() == ".cplx") ++cplx_files;
    if (e.path().filename() == "manifest.csv") manifest = true;
  }
  CHECK(cplx_files == 200);
  CHECK(manifest);
}

TEST_CASE("viz renders a well-formed image") {
  TempDir tmp("viz");
  run_cli("synth --classes 2 --n 1 --extents 16x16 --seed 3 --out " + tmp.str());
  const RunOutput out = run_cli("viz --input " + tmp.file("sample_00000.cplx") +
                                " --out " + tmp.file("img.ppm"));
  CHECK(out.status == 0);
  const std::string ppm = read_file(tmp.file("img.ppm"));
  const std::string header = "P6\n16 16\n255\n";
  REQUIRE(ppm.size() == header.size() + 3 * 16 * 16);
  CHECK(ppm.compare(0, header.size(), header) == 0);
}

TEST_CASE("train and eval run end to end") {
  TempDir tmp("flow");
  const RunOutput train =
      run_cli("train --config " + config("det_check.cfg") + " --deterministic --out " +
              tmp.str());
  CHECK(train.status == 0);
  CHECK(train.text.find("complex parameters:") != std::string::npos);
  CHECK(train.text.find("baseline parameters:") != std::string::npos);
  CHECK(fs::exists(tmp.path / "metrics.csv"));
  CHECK(fs::exists(tmp.path / "model.ckpt"));
  CHECK(fs::exists(tmp.path / "metrics_baseline.csv"));
  CHECK(fs::exists(tmp.path / "baseline.ckpt"));

  const RunOutput eval =
      run_cli("eval --config " + config("det_check.cfg") + " --checkpoint " +
              tmp.file("model.ckpt") + " --scale 2.5 --rotate 0.7");
  CHECK(eval.status == 0);
  CHECK(eval.text.find("accuracy") != std::string::npos);

  const RunOutput eval_base =
      run_cli("eval --config " + config("det_check.cfg") + " --checkpoint " +
              tmp.file("baseline.ckpt") + " --baseline");
  CHECK(eval_base.status == 0);
  CHECK(eval_base.text.find("accuracy") != std::string::npos);
}

TEST_CASE("deterministic training is reproducible byte for byte") {
  TempDir a("det_a");
  TempDir b("det_b");
  const RunOutput ra = run_cli("train --config " + config("det_check.cfg") +
                               " --deterministic --out " + a.str());
  const RunOutput rb = run_cli("train --config " + config("det_check.cfg") +
                               " --deterministic --out " + b.str());
  REQUIRE(ra.status == 0);
  REQUIRE(rb.status == 0);
  CHECK(read_file(a.file("metrics.csv")) == read_file(b.file("metrics.csv")));
  CHECK(read_file(a.file("metrics.csv")).rfind("epoch,train_loss,test_acc\n", 0) == 0);
  CHECK(read_file(a.file("model.ckpt")) == read_file(b.file("model.ckpt")));
}
