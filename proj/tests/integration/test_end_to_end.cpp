#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "vocalsym/io.hpp"
#include "vocalsym/segmentation.hpp"
#include "vocalsym/symbolization.hpp"

using namespace vocalsym;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome cli(const std::string& args, const TempDir& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + VOCALSYM_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = io::read_text_file(out);
  o.err = io::read_text_file(err);
  return o;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const fs::path kExample = fs::path(VOCALSYM_DATA_DIR) / "worked_example";

// A small synthetic cohort: 3 control and 3 treated subjects, 2 days each.
void write_small_spec(const fs::path& path) {
  io::write_text_file(path, R"({
    "classes": [
      {"label": "Control", "subject_prefix": "C", "subjects": 3, "templates": [0, 1], "weights": [0.7, 0.3]},
      {"label": "PreTx", "subject_prefix": "P", "subjects": 3, "templates": [2, 3], "weights": [0.7, 0.3]}],
    "days_per_subject": 2, "day_seconds": 8, "format": "csv", "seed": 12})");
}

}  // namespace

TEST_CASE("usage errors exit 1 with a usage message") {
  TempDir dir("cli_usage");
  const auto missing = cli("run --manifest " + q(dir / "absent.json") + " --out " + q(dir / "out"), dir);
  CHECK(missing.code == 1);
  CHECK(missing.err.find("Usage") != std::string::npos);
  CHECK(cli("", dir).code == 1);
  CHECK(cli("frobnicate", dir).code == 1);
  CHECK(cli("--help", dir).code == 0);
}

TEST_CASE("data errors exit 2") {
  TempDir dir("cli_data");
  io::write_text_file(dir / "bad.json", R"({"entries": [{"path": "nope.wav", "subject": "A", "day": 0}]})");
  CHECK(cli("run --manifest " + q(dir / "bad.json") + " --out " + q(dir / "out"), dir).code == 2);
  io::write_text_file(dir / "cfg.json", R"({"evaluation": {"n": -3}})");
  CHECK(cli("evaluate --config " + q(dir / "cfg.json") + " --distances " + q(kExample / "distances.csv") +
                " --out " + q(dir / "out"),
            dir)
            .code == 2);
}

TEST_CASE("evaluate reproduces the worked example") {
  TempDir dir("cli_example");
  const auto r = cli("evaluate --distances " + q(kExample / "distances.csv") + " --labels " +
                         q(kExample / "labels.csv") + " --n 1 --trials 50 --out " + q(dir / "out"),
                     dir);
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(io::read_text_file(dir / "out" / "report.json"));
  REQUIRE(report.size() == 1);
  CHECK(report[0]["total_class_concentration"].get<double>() == 0.8);
  CHECK(report[0]["total_subject_concentration"].get<double>() == 2.0 / 3.0);
  CHECK(report[0]["subject_days"] == 5);
  CHECK(r.out.find("class 0.8") != std::string::npos);
}

TEST_CASE("stage subcommands chain from a synthetic cohort to a sweep") {
  TempDir dir("cli_chain");
  write_small_spec(dir / "spec.json");
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "data"), dir).code == 0);
  REQUIRE(fs::exists(dir / "data" / "manifest.json"));

  // One CSV through `segment`, and the dump back through the library reader.
  const auto one = cli("segment --input " + q(dir / "data" / "C01_d0.csv") +
                           " --sample-rate 8000 --subject C01 --day 0 --label Control --csv --out " + q(dir / "seg"),
                       dir);
  REQUIRE(one.code == 0);
  const auto dump = read_segment_dump(dir / "seg" / "C01_d0.segments.bin");
  CHECK(dump.size() > 50);
  const auto csv = read_segment_csv(dir / "seg" / "C01_d0.segments.csv");
  REQUIRE(csv.size() == dump.size());
  CHECK(csv.front().values == dump.front().values);

  REQUIRE(cli("segment --manifest " + q(dir / "data" / "manifest.json") + " --out " + q(dir / "seg"), dir).code == 0);
  std::string dumps;
  for (const auto& e : fs::directory_iterator(dir / "seg")) {
    if (e.path().extension() == ".bin") dumps += " --segments " + q(e.path());
  }
  io::write_text_file(dir / "labels.csv", [] {
    std::string out = "id,label\n";
    for (int s = 1; s <= 3; ++s) {
      for (int d = 0; d < 2; ++d) {
        out += "C0" + std::to_string(s) + ":" + std::to_string(d) + ",Control\n";
        out += "P0" + std::to_string(s) + ":" + std::to_string(d) + ",PreTx\n";
      }
    }
    return out;
  }());
  REQUIRE(cli("symbolize" + dumps + " --labels " + q(dir / "labels.csv") + " --out " + q(dir / "symbols.txt"), dir).code == 0);
  const auto vectors = read_symbol_vectors(dir / "symbols.txt");
  CHECK(vectors.size() == 12);
  for (const auto& v : vectors) v.validate();

  REQUIRE(cli("mismatch --symbols " + q(dir / "symbols.txt") + " --out " + q(dir / "mismatch.csv"), dir).code == 0);
  REQUIRE(cli("evaluate --distances " + q(dir / "mismatch.csv") +
                  " --comparison PreTx/Con --n 2 --trials 30 --out " + q(dir / "eval"),
              dir)
              .code == 0);
  CHECK(fs::exists(dir / "eval" / "heatmap_PreTx_vs_Con.csv"));

  REQUIRE(cli("sweep --distances " + q(dir / "mismatch.csv") +
                  " --comparison PreTx/Con --from 2 --to 10 --trials 20 --out " + q(dir / "sweep"),
              dir)
              .code == 0);
  const auto sweep = nlohmann::json::parse(io::read_text_file(dir / "sweep" / "sweep.json"));
  CHECK(sweep["rows"].size() == 9);
  const auto lines = io::split(io::trim(io::read_text_file(dir / "sweep" / "sweep.csv")), '\n');
  CHECK(lines.size() == 10);  // header + 9 rows

  io::write_text_file(dir / "base.json", R"({"baselines": {"window_seconds": 2}})");
  REQUIRE(cli("baseline --config " + q(dir / "base.json") + " --manifest " + q(dir / "data" / "manifest.json") +
                  " --n 2 --out " + q(dir / "base"),
              dir)
              .code == 0);
  CHECK(fs::exists(dir / "base" / "baseline_report.json"));
}

TEST_CASE("run is cache-sound and worker independent") {
  TempDir dir("cli_run");
  write_small_spec(dir / "spec.json");
  REQUIRE(cli("synth --spec " + q(dir / "spec.json") + " --out " + q(dir / "data"), dir).code == 0);
  io::write_text_file(dir / "cfg.json", R"({"seed": 5, "evaluation": {"n": 2, "trials": 30, "sweep_max": 6}})");
  const std::string base = "run --config " + q(dir / "cfg.json") + " --manifest " + q(dir / "data" / "manifest.json");
  REQUIRE(cli(base + " --out " + q(dir / "a"), dir).code == 0);
  const auto cached = cli(base + " --out " + q(dir / "b") + " --stage-cache " + q(dir / "a" / "cache"), dir);
  REQUIRE(cached.code == 0);
  CHECK(cached.err.find("segments 12 hit / 0 miss") != std::string::npos);
  REQUIRE(cli("--workers 3 " + base + " --out " + q(dir / "c"), dir).code == 0);
  for (const char* name : {"report.json", "report.csv", "sweep.json", "mismatch.csv", "symbols.txt", "run_manifest.json"}) {
    const auto a = io::read_text_file(dir / "a" / name);
    CHECK_MESSAGE(a == io::read_text_file(dir / "b" / name), std::string(name));
    CHECK_MESSAGE(a == io::read_text_file(dir / "c" / name), std::string(name));
  }
}
