#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

fs::path scratch() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("realc-cli-" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run realc(const std::string& args, const std::string& env = "") {
  std::string cmd = env + " " REALC_BINARY " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
  int st = ::pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string write(const std::string& name, const std::string& text) {
  fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSquare = "def sq(x: Real): Real = {\n require(x.in(1.0, 2.0))\n x * x\n} ensuring (res => res +/- 1e-12)\n";

}  // namespace

TEST_CASE("compile: verified program exits 0 and writes code and report") {
  std::string f = write("sq.real", kSquare);
  fs::path out = scratch() / "out";
  Run r = realc("compile " + f + " --out-dir " + out.string());
  CHECK(r.status == 0);
  CHECK(r.out.find("verified at float64") != std::string::npos);
  CHECK(fs::exists(out / "sq.float64.c-like"));
  CHECK(fs::exists(out / "sq.report.json"));
  CHECK(slurp(out / "sq.float64.c-like").find("double sq(double x)") != std::string::npos);
}

TEST_CASE("compile: pinned precision that is too coarse exits 1") {
  std::string f = write("sq32.real", kSquare);
  Run r = realc("compile " + f + " --precision float32 --out-dir " + (scratch() / "o32").string());
  CHECK(r.status == 1);
  CHECK(r.out.find("not verified") != std::string::npos);
  CHECK(fs::exists(scratch() / "o32" / "sq32.float32.c-like"));
}

TEST_CASE("input errors exit 2") {
  CHECK(realc("compile " + (scratch() / "missing.real").string()).status == 2);
  std::string bad = write("bad.real", "def f(x: Real): Real = {\n require(x.in(0.0, 1.0)\n x\n}\n");
  Run r = realc("compile " + bad);
  CHECK(r.status == 2);
  CHECK(r.out.find("bad.real:") != std::string::npos);
  CHECK(realc("compile " + write("p.real", kSquare) + " --precision float16").status == 2);
  CHECK(realc("compile " + write("s.real", kSquare) + " --solver nonsense").status == 2);
  CHECK(realc("simulate " + write("u.real", kSquare) + " --fnc nope").status == 2);
  CHECK(realc("simulate " + write("d.real", kSquare) + " --fnc sq --precision dd").status == 2);
  CHECK(realc("frobnicate").status == 2);
  CHECK(realc("").status == 2);
}

TEST_CASE("simulate prints the observed error") {
  std::string f = write("sim.real", kSquare);
  Run r = realc("simulate " + f + " --fnc sq -n 2000 --seed 3 --precision float64");
  CHECK(r.status == 0);
  CHECK(r.out.find("samples   2000 of 2000 drawn") != std::string::npos);
  CHECK(r.out.find("max error ") != std::string::npos);
  CHECK(realc("simulate " + f + " --fnc sq -n 2000 --seed 3 --precision float64").out == r.out);
}

TEST_CASE("range prints both columns") {
  std::string f = write("rng.real", "def g(x: Real): Real = {\n require(x.in(-1.0, 1.0))\n x * x - x\n}\n");
  Run r = realc("range " + f + " --fnc g");
  CHECK(r.status == 0);
  CHECK(r.out.find("interval  [-2.0000000000000000e+00, 2.0000000000000000e+00]") != std::string::npos);
  CHECK(r.out.find("tightened [") != std::string::npos);
}

TEST_CASE("solver selection falls back to the environment") {
  std::string f = write("env.real", kSquare);
  fs::path marker = scratch() / "solver-used";
  std::string script = write("solver.sh", "#!/bin/sh\ntouch " + marker.string() + "\nexec z3 -in\n");
  fs::permissions(script, fs::perms::owner_all);
  if (std::system("command -v z3 > /dev/null") == 0) {
    Run ext = realc("compile " + f + " --precision float64 --out-dir " + (scratch() / "env").string(),
                    "REALC_SOLVER=" + script);
    CHECK(ext.status == 0);
    CHECK(fs::exists(marker));
    fs::remove(marker);
  }
  Run builtin = realc("compile " + f + " --precision float64 --solver builtin --out-dir " + (scratch() / "env").string(),
                      "REALC_SOLVER=/nonexistent/solver");
  CHECK(builtin.status == 0);
  CHECK_FALSE(fs::exists(marker));
}
