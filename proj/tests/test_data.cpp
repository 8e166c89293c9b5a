#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"
#include "tpt/data.hpp"
#include "tpt/errors.hpp"

using tpt::ManifestRecord;
using tpt::MetricsRow;
using tpt::Regime;

namespace {

void touch(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  out << "x";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<ManifestRecord> sample_records() {
  ManifestRecord open;
  open.video = "vid_0000.tptf";
  open.question = {2, 7, 9};
  open.regime = Regime::OpenEnded;
  open.target = 3;

  ManifestRecord count;
  count.video = "vid_0001.tptf";
  count.question = {4};
  count.regime = Regime::Count;
  count.target = 6;

  ManifestRecord choice;
  choice.video = "vid_0002.tptf";
  choice.question = {2, 4};
  choice.regime = Regime::MultiChoice;
  choice.target = 1;
  choice.candidates = {{5, 6}, {7, 8, 9}, {10}};

  return {open, count, choice};
}

}  // namespace

TEST_CASE("manifest round trips through save and load") {
  tptt::TempDir dir("manifest");
  for (int i = 0; i < 3; ++i) touch(dir.file("vid_000" + std::to_string(i) + ".tptf"));

  std::vector<ManifestRecord> records = sample_records();
  tpt::save_manifest(dir.file("manifest.txt"), records);
  tpt::Manifest m = tpt::load_manifest(dir.file("manifest.txt"));

  REQUIRE(m.records.size() == 3);
  CHECK(m.dir == dir.path());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(m.records[i].video == records[i].video);
    CHECK(m.records[i].question == records[i].question);
    CHECK(m.records[i].regime == records[i].regime);
    CHECK(m.records[i].target == records[i].target);
    CHECK(m.records[i].candidates == records[i].candidates);
  }
  CHECK(tpt::resolve_video(m, m.records[0]) == dir.file("vid_0000.tptf"));
}

TEST_CASE("manifest loader skips comments and blank lines") {
  tptt::TempDir dir("manifest");
  touch(dir.file("a.tptf"));
  std::ofstream out(dir.file("manifest.txt"), std::ios::binary);
  out << "# generated for a unit test\n";
  out << "\n";
  out << "video=a.tptf question=1,2 regime=open-ended target=0\n";
  out << "   # trailing comment line\n";
  out.close();

  tpt::Manifest m = tpt::load_manifest(dir.file("manifest.txt"));
  REQUIRE(m.records.size() == 1);
  CHECK(m.records[0].question == std::vector<int>{1, 2});
}

TEST_CASE("manifest loader rejects malformed records") {
  tptt::TempDir dir("manifest");
  touch(dir.file("a.tptf"));
  auto write_and_load = [&](const std::string& line) {
    std::ofstream out(dir.file("manifest.txt"), std::ios::binary);
    out << line << "\n";
    out.close();
    return tpt::load_manifest(dir.file("manifest.txt"));
  };

  // missing feature file
  CHECK_THROWS_WITH_AS(write_and_load("video=gone.tptf question=1 regime=count target=2"),
                       doctest::Contains("does not exist"), tpt::TptError);
  // unknown key
  CHECK_THROWS_WITH_AS(write_and_load("video=a.tptf question=1 regime=count target=2 bogus=3"),
                       doctest::Contains("unknown field"), tpt::TptError);
  // missing regime / target
  CHECK_THROWS_WITH_AS(write_and_load("video=a.tptf question=1 target=2"),
                       doctest::Contains("missing regime"), tpt::TptError);
  CHECK_THROWS_WITH_AS(write_and_load("video=a.tptf question=1 regime=count"),
                       doctest::Contains("missing target"), tpt::TptError);
  // bad ids
  CHECK_THROWS_WITH_AS(write_and_load("video=a.tptf question=1,x regime=count target=2"),
                       doctest::Contains("bad token id"), tpt::TptError);
  CHECK_THROWS_WITH_AS(write_and_load("video=a.tptf question=1 regime=count target=two"),
                       doctest::Contains("bad target"), tpt::TptError);
  // not key=value
  CHECK_THROWS_WITH_AS(write_and_load("video=a.tptf question=1 regime=count target=2 oops"),
                       doctest::Contains("key=value"), tpt::TptError);
  // empty manifest
  CHECK_THROWS_WITH_AS(write_and_load("# nothing here"), doctest::Contains("no records"),
                       tpt::TptError);
}

TEST_CASE("manifest loader enforces regime-specific candidate rules") {
  tptt::TempDir dir("manifest");
  touch(dir.file("a.tptf"));
  auto write_and_load = [&](const std::string& line) {
    std::ofstream out(dir.file("manifest.txt"), std::ios::binary);
    out << line << "\n";
    out.close();
    return tpt::load_manifest(dir.file("manifest.txt"));
  };

  // multi-choice needs >= 2 candidates and target inside the list
  CHECK_THROWS_WITH_AS(
      write_and_load("video=a.tptf question=1 regime=multi-choice target=0 candidates=1,2"),
      doctest::Contains("need at least 2"), tpt::TptError);
  CHECK_THROWS_WITH_AS(
      write_and_load("video=a.tptf question=1 regime=multi-choice target=2 candidates=1,2|3,4"),
      doctest::Contains("outside"), tpt::TptError);
  // other regimes must not carry candidates
  CHECK_THROWS_WITH_AS(
      write_and_load("video=a.tptf question=1 regime=open-ended target=0 candidates=1|2"),
      doctest::Contains("only valid for multi-choice"), tpt::TptError);
  // negative target
  CHECK_THROWS_WITH_AS(write_and_load("video=a.tptf question=1 regime=count target=-1"),
                       doctest::Contains("negative target"), tpt::TptError);
}

TEST_CASE("save_manifest validates before writing") {
  tptt::TempDir dir("manifest");
  ManifestRecord bad;
  bad.video = "a.tptf";
  bad.question = {1};
  bad.regime = Regime::MultiChoice;
  bad.target = 0;
  bad.candidates = {{1, 2}};  // only one candidate
  CHECK_THROWS_AS(tpt::save_manifest(dir.file("manifest.txt"), {bad}), tpt::TptError);
}

TEST_CASE("metrics file round trips rows exactly") {
  tptt::TempDir dir("metrics");
  std::string path = dir.file("metrics.csv");
  {
    tpt::MetricsWriter writer(path, 42);
    writer.append({0, "train", 1.25, 0.5, 0.0, 1e-4, 1.234});
    writer.append({0, "val", 0.3333333333333333, 0.75, 0.0, 1e-4, 0.0});
    writer.append({1, "train", 0.1, 1.0, 2.5, 5e-5, 10.5});
  }

  tpt::MetricsFile file = tpt::read_metrics(path);
  CHECK(file.seed == 42);
  REQUIRE(file.rows.size() == 3);
  CHECK(file.rows[0].epoch == 0);
  CHECK(file.rows[0].split == "train");
  CHECK(file.rows[0].loss == 1.25);
  CHECK(file.rows[0].accuracy == 0.5);
  CHECK(file.rows[0].seconds == doctest::Approx(1.234));
  CHECK(file.rows[1].split == "val");
  CHECK(file.rows[1].loss == 0.3333333333333333);  // %.17g keeps doubles exact
  CHECK(file.rows[2].mse == 2.5);
  CHECK(file.rows[2].lr == 5e-5);
}

TEST_CASE("metrics writer output is byte-deterministic") {
  tptt::TempDir dir("metrics");
  auto emit = [&](const std::string& name) {
    tpt::MetricsWriter writer(dir.file(name), 7);
    writer.append({0, "train", 0.123456789, 0.25, 0.0, 1e-4, 0.001});
    writer.append({1, "val", 0.0625, 0.5, 0.0, 1e-4, 2.75});
    return slurp(dir.file(name));
  };
  std::string a = emit("a.csv");
  std::string b = emit("b.csv");
  CHECK(a == b);
  CHECK(a.substr(0, a.find('\n')) == "# seed=7");
  CHECK(a.find("epoch,split,loss,accuracy,mse,lr,seconds\n") != std::string::npos);
}

TEST_CASE("metrics reader rejects wrong headers and malformed rows") {
  tptt::TempDir dir("metrics");
  auto write_and_read = [&](const std::string& body) {
    std::ofstream out(dir.file("m.csv"), std::ios::binary);
    out << body;
    out.close();
    return tpt::read_metrics(dir.file("m.csv"));
  };

  CHECK_THROWS_WITH_AS(write_and_read("# seed=1\nepoch,loss\n"),
                       doctest::Contains("expected header"), tpt::TptError);
  CHECK_THROWS_WITH_AS(
      write_and_read("# seed=1\nepoch,split,loss,accuracy,mse,lr,seconds\n0,train,1.0\n"),
      doctest::Contains("expected 7 columns"), tpt::TptError);
  CHECK_THROWS_WITH_AS(
      write_and_read("# seed=1\nepoch,split,loss,accuracy,mse,lr,seconds\n0,train,x,0,0,0,0\n"),
      doctest::Contains("bad number"), tpt::TptError);
  CHECK_THROWS_WITH_AS(write_and_read("# seed=1\n"), doctest::Contains("missing metrics header"),
                       tpt::TptError);
}

TEST_CASE("metrics writer rejects unknown split names") {
  tptt::TempDir dir("metrics");
  tpt::MetricsWriter writer(dir.file("m.csv"), 1);
  CHECK_THROWS_AS(writer.append({0, "test", 0.0, 0.0, 0.0, 0.0, 0.0}), tpt::TptError);
}
